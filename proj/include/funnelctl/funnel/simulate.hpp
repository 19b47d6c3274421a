#pragma once

#include <optional>
#include <vector>

#include "funnelctl/funnel/cascade.hpp"
#include "funnelctl/lti/system.hpp"
#include "funnelctl/ode/rk45.hpp"
#include "funnelctl/redef/redefinition.hpp"
#include "funnelctl/refgen/generator.hpp"

namespace funnelctl::funnel {

struct SimulationOptions {
    double horizon = 10.0;
    Index report_points = 2001;
    ode::OdeOptions ode{};       // defaults rel 1e-8 / abs 1e-7
    double guard_margin = 1e-10;
};

struct Trajectory {
    std::vector<double> t;
    std::vector<Vector> x;
    std::vector<Vector> zref;                  // governor state
    std::vector<Vector> y, y_ref, e;           // plant output, reference, e = y - y_ref
    std::vector<Vector> y_new, yhat_ref;       // redefined output and its reference
    std::vector<Vector> u;
    std::vector<std::vector<Vector>> e_levels;  // [level][time]
    std::vector<std::vector<double>> gains;     // [level][time]
    std::vector<std::vector<double>> psi;       // [level][time]

    std::vector<double> sup_gain;       // per level
    std::vector<double> eps_observed;   // per level: inf_t (psi_i - ||e_i||)
    double sup_u = 0.0, sup_x = 0.0, sup_zref = 0.0;
    std::vector<double> restart_corrections;

    Index levels() const { return static_cast<Index>(e_levels.size()); }
};

namespace detail {

struct ClosedLoop {
    const lti::LtiSystem* sys;
    const redef::OutputRedefinition* red;
    const refgen::ReferenceGenerator* gen;
    const FunnelSpec* spec;
    double guard_margin;

    Index n() const { return sys->n(); }
    Index zdim() const { return gen->state_dim(); }

    std::vector<Vector> e0_derivs(double t, const Vector& x, const Vector& z) const {
        const Index rho = red->chain_len();
        const Index m = red->m;
        Vector chain = red->h_x * x;
        std::vector<Vector> e0(static_cast<size_t>(rho));
        for (Index j = 0; j < rho; ++j)
            e0[static_cast<size_t>(j)] = chain.segment(j * m, m) - gen->derivative(z, t, j);
        return e0;
    }

    CascadeState cascade(double t, const Vector& x, const Vector& z) const {
        return evaluate_cascade(*spec, e0_derivs(t, x, z), t, guard_margin);
    }

    Vector rhs(double t, const Vector& aug) const {
        Vector x = aug.head(n());
        Vector z = aug.tail(zdim());
        CascadeState cs = cascade(t, x, z);
        Vector out(n() + zdim());
        out.head(n()) = sys->a * x + sys->b * cs.u + sys->disturbance(t);
        out.tail(zdim()) = gen->rhs(t, z);
        return out;
    }
};

inline void record_point(Trajectory& traj, const ClosedLoop& loop, double t, const Vector& aug) {
    const Index n = loop.n();
    Vector x = aug.head(n);
    Vector z = aug.tail(loop.zdim());
    CascadeState cs = loop.cascade(t, x, z);
    const Index rho = loop.red->chain_len();
    const Index m = loop.red->m;

    traj.t.push_back(t);
    traj.x.push_back(x);
    traj.zref.push_back(z);
    Vector y = loop.sys->c * x;
    Vector yr = loop.gen->y_ref(t, 0);
    traj.y.push_back(y);
    traj.y_ref.push_back(yr);
    traj.e.push_back(y - yr);
    Vector chain = loop.red->h_x * x;
    traj.y_new.push_back(chain.head(m));
    traj.yhat_ref.push_back(loop.gen->derivative(z, t, 0));
    traj.u.push_back(cs.u);
    for (Index i = 0; i < rho; ++i) {
        traj.e_levels[static_cast<size_t>(i)].push_back(cs.e[static_cast<size_t>(i)]);
        traj.gains[static_cast<size_t>(i)].push_back(cs.k[static_cast<size_t>(i)]);
        traj.psi[static_cast<size_t>(i)].push_back(loop.spec->level(i).psi(t));
    }
    traj.sup_u = std::max(traj.sup_u, cs.u.norm());
    traj.sup_x = std::max(traj.sup_x, x.norm());
    traj.sup_zref = std::max(traj.sup_zref, z.norm());
}

inline void finalize(Trajectory& traj) {
    const Index rho = traj.levels();
    traj.sup_gain.assign(static_cast<size_t>(rho), 0.0);
    traj.eps_observed.assign(static_cast<size_t>(rho),
                             std::numeric_limits<double>::infinity());
    for (Index i = 0; i < rho; ++i)
        for (size_t g = 0; g < traj.t.size(); ++g) {
            traj.sup_gain[static_cast<size_t>(i)] = std::max(
                traj.sup_gain[static_cast<size_t>(i)], traj.gains[static_cast<size_t>(i)][g]);
            traj.eps_observed[static_cast<size_t>(i)] =
                std::min(traj.eps_observed[static_cast<size_t>(i)],
                         traj.psi[static_cast<size_t>(i)][g] -
                             traj.e_levels[static_cast<size_t>(i)][g].norm());
        }
}

}  // namespace detail

/// Closed-loop integration of plant + reference governor + funnel cascade.
/// The initial condition must satisfy phi_i(0)||e_i(0)|| < 1 at every level.
inline Trajectory simulate_closed_loop(const lti::LtiSystem& sys,
                                       const redef::OutputRedefinition& red,
                                       const refgen::ReferenceGenerator& gen,
                                       const FunnelSpec& spec, const SimulationOptions& opts) {
    spec.validate(red.chain_len());
    detail::ClosedLoop loop{&sys, &red, &gen, &spec, opts.guard_margin};

    Vector aug(sys.n() + gen.state_dim());
    aug.head(sys.n()) = sys.x0;
    aug.tail(gen.state_dim()) = gen.init;

    try {
        loop.cascade(0.0, sys.x0, gen.init);
    } catch (const FunnelBoundaryReached& e) {
        throw InadmissibleInitialCondition(
            "initial errors violate the funnel at level " + std::to_string(e.level));
    }

    Trajectory traj;
    traj.e_levels.resize(static_cast<size_t>(red.chain_len()));
    traj.gains.resize(static_cast<size_t>(red.chain_len()));
    traj.psi.resize(static_cast<size_t>(red.chain_len()));

    auto grid = ode::uniform_grid(0.0, opts.horizon, opts.report_points);
    ode::integrate_grid([&loop](double t, const Vector& a) { return loop.rhs(t, a); }, grid, aug,
                        opts.ode,
                        [&](double t, const Vector& a) { detail::record_point(traj, loop, t, a); });
    detail::finalize(traj);
    return traj;
}

/// Closed-loop run with the governor re-anchored every restart_period: the
/// antistable component is recomputed from the shifted improper integral, an
/// optional per-restart error is injected, and re-admissibility is verified.
inline Trajectory simulate_with_restarts(
    const lti::LtiSystem& sys, const redef::OutputRedefinition& red,
    const refgen::ReferenceGenerator& gen, const FunnelSpec& spec,
    const redef::SpectralSplit& split, const SimulationOptions& opts, double restart_period,
    const std::function<Vector(int)>& injected_error = {},
    const refgen::QuadratureOptions& quad = {}) {
    if (restart_period <= 0.0) throw ConfigError("restart period must be positive");
    spec.validate(red.chain_len());
    detail::ClosedLoop loop{&sys, &red, &gen, &spec, opts.guard_margin};

    Vector aug(sys.n() + gen.state_dim());
    aug.head(sys.n()) = sys.x0;
    aug.tail(gen.state_dim()) = gen.init;
    try {
        loop.cascade(0.0, sys.x0, gen.init);
    } catch (const FunnelBoundaryReached& e) {
        throw InadmissibleInitialCondition(
            "initial errors violate the funnel at level " + std::to_string(e.level));
    }

    Trajectory traj;
    traj.e_levels.resize(static_cast<size_t>(red.chain_len()));
    traj.gains.resize(static_cast<size_t>(red.chain_len()));
    traj.psi.resize(static_cast<size_t>(red.chain_len()));

    auto grid = ode::uniform_grid(0.0, opts.horizon, opts.report_points);
    auto rhs = [&loop](double t, const Vector& a) { return loop.rhs(t, a); };

    auto apply_restart = [&](double t_now, int idx) {
        Vector z = aug.tail(gen.state_dim());
        Vector fresh = refgen::generator_init_quadrature(split, gen.y_ref, t_now, quad);
        Vector w = split.w_transform * z;
        Vector wf = split.w_transform * fresh;
        w.segment(split.k1, split.k2) = wf.segment(split.k1, split.k2);
        Vector corrected = split.w_inverse * w;
        if (injected_error) corrected += injected_error(idx);
        traj.restart_corrections.push_back((corrected - z).norm());
        aug.tail(gen.state_dim()) = corrected;
        try {
            loop.cascade(t_now, aug.head(sys.n()), corrected);
        } catch (const FunnelBoundaryReached& e) {
            throw RestartInadmissible("restart at t=" + std::to_string(t_now) +
                                      " violates the funnel at level " + std::to_string(e.level));
        }
    };

    const double tiny = 1e-12 * std::max(1.0, opts.horizon);
    double t_cur = 0.0;
    double next_restart = restart_period;
    int restart_idx = 1;
    size_t gi = 0;
    detail::record_point(traj, loop, 0.0, aug);
    ++gi;
    while (gi < grid.size() || next_restart <= opts.horizon + tiny) {
        double t_grid = (gi < grid.size()) ? grid[gi] : std::numeric_limits<double>::infinity();
        double t_rst =
            (next_restart <= opts.horizon + tiny) ? next_restart : std::numeric_limits<double>::infinity();
        double t_next = std::min(t_grid, t_rst);
        aug = ode::integrate_to(rhs, t_cur, aug, t_next, opts.ode);
        t_cur = t_next;
        if (t_grid <= t_rst + tiny && gi < grid.size() && std::abs(t_cur - t_grid) <= tiny) {
            detail::record_point(traj, loop, t_cur, aug);
            ++gi;
        }
        if (std::abs(t_cur - t_rst) <= tiny) {
            apply_restart(t_cur, restart_idx++);
            next_restart += restart_period;
        }
    }
    detail::finalize(traj);
    return traj;
}

}  // namespace funnelctl::funnel
