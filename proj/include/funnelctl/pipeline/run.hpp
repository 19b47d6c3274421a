#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>

#include "funnelctl/bounds/tables.hpp"
#include "funnelctl/funnel/simulate.hpp"
#include "funnelctl/lti/normal_form.hpp"
#include "funnelctl/lti/relative_degree.hpp"
#include "funnelctl/pipeline/config.hpp"
#include "funnelctl/pipeline/csv.hpp"
#include "funnelctl/pipeline/report.hpp"
#include "funnelctl/redef/assumptions.hpp"
#include "funnelctl/redef/redefinition.hpp"
#include "funnelctl/refgen/generator.hpp"

namespace funnelctl::pipeline {

enum class Stage { synthesize, simulate, bounds, all };

struct PipelineOverrides {
    std::optional<double> rtol, atol, restart_period;
    bool allow_disturbance_mismatch = false;
    std::optional<std::string> out_dir;
};

struct PipelineResult {
    RunReport report;
    lti::LtiSystem sys;
    lti::NormalForm nf;
    redef::UnstableIsolation iso;
    redef::SpectralSplit split;
    redef::OutputRedefinition red;
    refgen::ReferenceGenerator gen;
    funnel::FunnelSpec spec;
    std::optional<funnel::Trajectory> traj;
    std::vector<bounds::EpsilonProfile> profiles;
    std::optional<bounds::BoundTables> tables;
};

namespace detail {

class StageTimer {
public:
    StageTimer(RunReport& rep, std::string name)
        : rep_(rep), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
    ~StageTimer() {
        auto dt = std::chrono::steady_clock::now() - start_;
        rep_.timing_ms[name_] =
            std::chrono::duration_cast<std::chrono::microseconds>(dt).count() / 1000.0;
    }

private:
    RunReport& rep_;
    std::string name_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

/// Execute synthesis -> checks -> simulation -> bounds per the requested stage.
/// Certificates are accumulated in result.report as the pipeline progresses;
/// assumption failures abort with AssumptionError after recording.
inline PipelineResult run_pipeline(const RunConfig& cfg, Stage stage,
                                   const PipelineOverrides& ov = {}) {
    PipelineResult res;
    RunReport& rep = res.report;

    SimulationConfig sim = cfg.simulation;
    if (ov.rtol) sim.rtol = *ov.rtol;
    if (ov.atol) sim.atol = *ov.atol;
    if (ov.restart_period) sim.restart_period = *ov.restart_period;

    {
        detail::StageTimer timer(rep, "synthesize");
        res.sys = cfg.make_system();

        auto rd = lti::relative_degree(res.sys);
        rep.r = rd.r;
        rep.gamma = rd.gamma;
        Certificate rd_cert;
        rd_cert.name = "relative-degree";
        rd_cert.pass = true;
        rd_cert.metrics["r"] = static_cast<double>(rd.r);
        rd_cert.metrics["gain_cond"] = rd.gamma_cond;
        for (size_t k = 0; k < rd.markov_norms.size(); ++k)
            rd_cert.metrics["markov_norm_" + std::to_string(k)] = rd.markov_norms[k];
        rep.add(rd_cert);

        Certificate dm = lti::disturbance_matching(res.sys, rd.r, sim.horizon);
        rep.add(dm);
        if (!dm.pass && !ov.allow_disturbance_mismatch) {
            rep.failed_assumption = "disturbance-matching";
            throw AssumptionError("disturbance-matching",
                                  "disturbance enters the output chain (override to continue)");
        }

        res.nf = lti::byrnes_isidori(res.sys, rd.r);

        redef::IsolationOptions iso_opts;
        iso_opts.horizon = sim.horizon;
        {
            const lti::LtiSystem& sys = res.sys;
            const lti::NormalForm& nf = res.nf;
            if (nf.internal_dim() > 0)
                iso_opts.internal_disturbance = [&sys, &nf](double t) -> Vector {
                    return nf.u_transform.bottomRows(nf.internal_dim()) * sys.disturbance(t);
                };
        }
        try {
            res.iso = redef::find_unstable_isolation(res.nf, iso_opts);
        } catch (const AssumptionError& e) {
            rep.failed_assumption = e.assumption;
            Certificate c;
            c.name = "isolation";
            c.pass = false;
            c.detail = e.what();
            rep.add(c);
            throw;
        }
        rep.ell = res.iso.ell;
        rep.krylov_cond = res.iso.krylov_cond;
        {
            Certificate c;
            c.name = "isolation";
            c.pass = true;
            c.metrics["ell"] = static_cast<double>(res.iso.ell);
            c.metrics["krylov_cond"] = res.iso.krylov_cond;
            rep.add(c);
        }

        res.split = redef::spectral_split(res.iso);
        Index max_order = res.nf.r;  // reference derivative orders used anywhere
        refgen::ReferenceSignal y_ref = cfg.make_reference(max_order);

        Certificate a2 = redef::check_reference_boundedness(res.split, y_ref,
                                                            std::max(sim.horizon, 20.0));
        rep.add(a2);
        if (!a2.pass) {
            rep.failed_assumption = "bounded-critical-response";
            throw AssumptionError("bounded-critical-response", a2.detail);
        }

        res.red = redef::build_redefinition(res.nf, res.iso);
        rep.k_row = res.red.k_row;

        {
            std::function<Vector(double)> d_eta;
            if (res.nf.internal_dim() > 0) {
                const lti::LtiSystem& sys = res.sys;
                const lti::NormalForm& nf = res.nf;
                d_eta = [&sys, &nf](double t) -> Vector {
                    return nf.u_transform.bottomRows(nf.internal_dim()) * sys.disturbance(t);
                };
            }
            Certificate a3 = redef::check_disturbance_decoupling(
                res.iso, d_eta, res.nf.gamma, res.red.k_row, sim.horizon);
            rep.add(a3);
            if (!a3.pass) {
                rep.failed_assumption = "unstable-disturbance-free";
                throw AssumptionError("unstable-disturbance-free", a3.detail);
            }
        }

        rep.add(redef::verify_new_relative_degree(res.red));

        Vector init = refgen::generator_init_quadrature(res.split, y_ref);
        if (y_ref.kind == refgen::ReferenceKind::exosystem && y_ref.exo) {
            Vector init_sylv = refgen::generator_init_sylvester(res.split, *y_ref.exo);
            rep.governor_init_sylvester_gap = (init - init_sylv).norm();
            init = init_sylv;
        }
        rep.governor_init = init;

        res.gen = refgen::make_reference_generator(res.iso, res.red.k_row, res.nf.r,
                                                   std::move(y_ref), init);
        rep.add(refgen::boundedness_audit(res.gen, sim.horizon, 1001, &res.split));

        res.spec = cfg.make_funnels();
        if (res.spec.rho() != res.red.chain_len())
            throw ConfigError("funnels: controller needs " +
                              std::to_string(res.red.chain_len()) + " levels, config has " +
                              std::to_string(res.spec.rho()));
        rep.add(res.spec.audit(sim.horizon));

        // alpha weights are part of the synthesis summary
        {
            Matrix kql = res.red.k_row;
            for (Index j = 0; j < res.red.ell; ++j) kql = kql * res.red.q_tilde;
            for (Index i = 1; i <= res.red.ell; ++i)
                rep.alphas.push_back(norm2(
                    Matrix(res.red.gamma * kql * res.red.f_coeffs[static_cast<size_t>(i - 1)])));
            rep.alphas.push_back(norm2(res.red.gamma));
        }
    }
    if (stage == Stage::synthesize) return res;

    {
        detail::StageTimer timer(rep, "simulate");
        funnel::SimulationOptions sopts;
        sopts.horizon = sim.horizon;
        sopts.report_points = sim.report_points;
        sopts.ode.rtol = sim.rtol;
        sopts.ode.atol = sim.atol;
        sopts.guard_margin = sim.guard_margin;

        if (sim.restart_period > 0.0)
            res.traj = funnel::simulate_with_restarts(res.sys, res.red, res.gen, res.spec,
                                                      res.split, sopts, sim.restart_period);
        else
            res.traj = funnel::simulate_closed_loop(res.sys, res.red, res.gen, res.spec, sopts);

        const auto& traj = *res.traj;
        Certificate inv;
        inv.name = "funnel-invariant";
        inv.pass = true;
        for (Index i = 0; i < traj.levels(); ++i) {
            double margin = traj.eps_observed[static_cast<size_t>(i)];
            inv.metrics["margin_" + std::to_string(i)] = margin;
            inv.metrics["sup_gain_" + std::to_string(i)] =
                traj.sup_gain[static_cast<size_t>(i)];
            if (!(margin > 0.0) || !std::isfinite(traj.sup_gain[static_cast<size_t>(i)]))
                inv.pass = false;
        }
        rep.add(inv);
        rep.suprema["u"] = traj.sup_u;
        rep.suprema["x"] = traj.sup_x;
        rep.suprema["governor"] = traj.sup_zref;
        for (Index i = 0; i < traj.levels(); ++i)
            rep.suprema["gain_" + std::to_string(i)] = traj.sup_gain[static_cast<size_t>(i)];
    }
    if (stage == Stage::simulate) return res;

    if (cfg.bounds.enabled) {
        detail::StageTimer timer(rep, "bounds");
        const auto& traj = *res.traj;
        // initial cascade errors from the recorded start point
        std::vector<double> e0_norms;
        for (Index i = 0; i < traj.levels(); ++i)
            e0_norms.push_back(traj.e_levels[static_cast<size_t>(i)].front().norm());

        for (Index i = 0; i + 1 < res.spec.rho(); ++i)
            res.profiles.push_back(bounds::integrate_epsilon(
                res.spec, i, e0_norms[static_cast<size_t>(i)], traj.t));

        res.tables = bounds::build_tables(res.spec, res.profiles, traj.t);
        bounds::error_bound(res.red, *res.tables, res.spec);

        rep.add(bounds::improved_margin_audit(traj, res.profiles));

        Certificate dom;
        dom.name = "error-bound-dominance";
        dom.pass = true;
        double worst = 0.0;
        for (size_t g = 0; g < traj.t.size(); ++g) {
            double ratio = traj.e[g].norm() / std::max(res.tables->psi_bound[g], 1e-300);
            worst = std::max(worst, ratio);
            if (traj.e[g].norm() > res.tables->psi_bound[g]) dom.pass = false;
        }
        dom.metrics["max_error_to_bound_ratio"] = worst;
        rep.add(dom);

        if (cfg.bounds.target_funnel) {
            funnel::FunnelFunction target = funnel::FunnelFunction::exponential(
                cfg.bounds.target_funnel->a, cfg.bounds.target_funnel->b,
                cfg.bounds.target_funnel->c);
            rep.add(bounds::design_inequality_check(*res.tables, target, traj.e.front().norm()));
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Artifact emission
// ---------------------------------------------------------------------------

namespace detail {

inline void push_vec(std::vector<double>& row, const Vector& v) {
    for (Index i = 0; i < v.size(); ++i) row.push_back(v(i));
}

inline void vec_headers(std::vector<std::string>& cols, const std::string& base, Index n) {
    if (n == 1) {
        cols.push_back(base);
    } else {
        for (Index i = 0; i < n; ++i) cols.push_back(base + "_" + std::to_string(i));
    }
}

}  // namespace detail

/// Plot-ready data files: output-vs-reference with the +-Psi envelope, states,
/// input, and the per-level funnel file. Requires a completed simulation.
inline void write_plot_data(const PipelineResult& res, const std::string& dir) {
    if (!res.traj)
        throw Error("no trajectory to export: run the simulate stage first");
    const auto& traj = *res.traj;
    const Index n = res.sys.n(), m = res.sys.m();
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    {
        CsvWriter csv(dir + "/output_vs_reference.csv");
        std::vector<std::string> cols{"t"};
        detail::vec_headers(cols, "y", m);
        detail::vec_headers(cols, "y_ref", m);
        cols.push_back("err_norm");
        if (res.tables) cols.push_back("psi_bound");
        if (res.tables && m == 1) {
            cols.push_back("y_ref_minus_bound");
            cols.push_back("y_ref_plus_bound");
        }
        csv.header(cols);
        for (size_t g = 0; g < traj.t.size(); ++g) {
            std::vector<double> row{traj.t[g]};
            detail::push_vec(row, traj.y[g]);
            detail::push_vec(row, traj.y_ref[g]);
            row.push_back(traj.e[g].norm());
            if (res.tables) row.push_back(res.tables->psi_bound[g]);
            if (res.tables && m == 1) {
                row.push_back(traj.y_ref[g](0) - res.tables->psi_bound[g]);
                row.push_back(traj.y_ref[g](0) + res.tables->psi_bound[g]);
            }
            csv.row(row);
        }
    }
    {
        CsvWriter csv(dir + "/states.csv");
        std::vector<std::string> cols{"t"};
        detail::vec_headers(cols, "x", n);
        csv.header(cols);
        for (size_t g = 0; g < traj.t.size(); ++g) {
            std::vector<double> row{traj.t[g]};
            detail::push_vec(row, traj.x[g]);
            csv.row(row);
        }
    }
    {
        CsvWriter csv(dir + "/input.csv");
        std::vector<std::string> cols{"t"};
        detail::vec_headers(cols, "u", m);
        csv.header(cols);
        for (size_t g = 0; g < traj.t.size(); ++g) {
            std::vector<double> row{traj.t[g]};
            detail::push_vec(row, traj.u[g]);
            csv.row(row);
        }
    }
    {
        CsvWriter csv(dir + "/levels.csv");
        std::vector<std::string> cols{"t"};
        for (Index i = 0; i < traj.levels(); ++i) {
            cols.push_back("e" + std::to_string(i) + "_norm");
            cols.push_back("psi" + std::to_string(i));
            cols.push_back("k" + std::to_string(i));
        }
        csv.header(cols);
        for (size_t g = 0; g < traj.t.size(); ++g) {
            std::vector<double> row{traj.t[g]};
            for (Index i = 0; i < traj.levels(); ++i) {
                row.push_back(traj.e_levels[static_cast<size_t>(i)][g].norm());
                row.push_back(traj.psi[static_cast<size_t>(i)][g]);
                row.push_back(traj.gains[static_cast<size_t>(i)][g]);
            }
            csv.row(row);
        }
    }
}

/// Full trajectory table plus, when available, the bound profiles.
inline void write_artifacts(const PipelineResult& res, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream out(dir + "/report.json");
        out << res.report.to_json().dump(2) << "\n";
    }
    if (!res.traj) return;
    const auto& traj = *res.traj;
    const Index n = res.sys.n(), m = res.sys.m();
    {
        CsvWriter csv(dir + "/trajectory.csv");
        std::vector<std::string> cols{"t"};
        detail::vec_headers(cols, "x", n);
        detail::vec_headers(cols, "y", m);
        detail::vec_headers(cols, "y_ref", m);
        detail::vec_headers(cols, "e", m);
        detail::vec_headers(cols, "y_new", m);
        detail::vec_headers(cols, "yhat_ref", m);
        for (Index i = 0; i < traj.levels(); ++i)
            detail::vec_headers(cols, "e" + std::to_string(i), m);
        for (Index i = 0; i < traj.levels(); ++i) cols.push_back("k" + std::to_string(i));
        detail::vec_headers(cols, "u", m);
        for (Index i = 0; i < traj.levels(); ++i) cols.push_back("psi" + std::to_string(i));
        csv.header(cols);
        for (size_t g = 0; g < traj.t.size(); ++g) {
            std::vector<double> row{traj.t[g]};
            detail::push_vec(row, traj.x[g]);
            detail::push_vec(row, traj.y[g]);
            detail::push_vec(row, traj.y_ref[g]);
            detail::push_vec(row, traj.e[g]);
            detail::push_vec(row, traj.y_new[g]);
            detail::push_vec(row, traj.yhat_ref[g]);
            for (Index i = 0; i < traj.levels(); ++i)
                detail::push_vec(row, traj.e_levels[static_cast<size_t>(i)][g]);
            for (Index i = 0; i < traj.levels(); ++i)
                row.push_back(traj.gains[static_cast<size_t>(i)][g]);
            detail::push_vec(row, traj.u[g]);
            for (Index i = 0; i < traj.levels(); ++i)
                row.push_back(traj.psi[static_cast<size_t>(i)][g]);
            csv.row(row);
        }
    }
    if (res.tables) {
        CsvWriter csv(dir + "/bounds.csv");
        std::vector<std::string> cols{"t"};
        for (const auto& p : res.profiles) cols.push_back("eps" + std::to_string(p.level));
        for (size_t i = 0; i + 1 < static_cast<size_t>(res.spec.rho()); ++i)
            cols.push_back("khat" + std::to_string(i));
        cols.push_back("psi_bound");
        csv.header(cols);
        for (size_t g = 0; g < res.tables->t.size(); ++g) {
            std::vector<double> row{res.tables->t[g]};
            for (const auto& p : res.profiles) row.push_back(p.eps[g]);
            for (size_t i = 0; i + 1 < static_cast<size_t>(res.spec.rho()); ++i)
                row.push_back(res.tables->khat[i + 1][g]);
            row.push_back(res.tables->psi_bound[g]);
            csv.row(row);
        }
    }
    write_plot_data(res, dir);
}

}  // namespace funnelctl::pipeline
