#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "funnelctl/pipeline/run.hpp"

namespace {

int log_level() {
    const char* env = std::getenv("FUNNELCTL_LOG");
    if (!env) return 1;
    std::string v(env);
    if (v == "quiet") return 0;
    if (v == "debug") return 2;
    return 1;
}

int execute(const std::string& config_path, funnelctl::pipeline::Stage stage,
            const funnelctl::pipeline::PipelineOverrides& ov) {
    using namespace funnelctl;
    const int verbosity = log_level();
    pipeline::RunConfig cfg;
    try {
        cfg = pipeline::RunConfig::load(config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    std::string out_dir = ov.out_dir.value_or(cfg.out_dir);

    pipeline::PipelineResult res;
    int code = 0;
    try {
        res = pipeline::run_pipeline(cfg, stage, ov);
    } catch (const ConfigError& e) {
        res.report.error = e.what();
        code = 2;
    } catch (const AssumptionError& e) {
        res.report.error = e.what();
        if (res.report.failed_assumption.empty()) res.report.failed_assumption = e.assumption;
        code = 3;
    } catch (const Error& e) {
        res.report.error = e.what();
        code = 4;
    }

    try {
        pipeline::write_artifacts(res, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "artifact write failed: " << e.what() << "\n";
        if (code == 0) code = 4;
    }

    if (code == 0 && !res.report.all_pass()) code = 3;

    if (verbosity > 0) {
        if (!res.report.error.empty()) std::cerr << "error: " << res.report.error << "\n";
        if (!res.report.failed_assumption.empty())
            std::cerr << "failed assumption: " << res.report.failed_assumption << "\n";
        for (const auto& c : res.report.certificates)
            std::cout << (c.pass ? "[pass] " : "[FAIL] ") << c.name << "\n";
        if (verbosity > 1)
            std::cout << res.report.to_json().dump(2) << "\n";
        std::cout << "report: " << out_dir << "/report.json (exit " << code << ")\n";
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"funnel tracking controller synthesis and simulation"};
    app.require_subcommand(1);

    std::string config_path;
    funnelctl::pipeline::PipelineOverrides ov;
    double tol_rel = -1.0, tol_abs = -1.0, restart = -1.0;
    std::string out_dir;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration file")->required();
        cmd->add_option("--out", out_dir, "output directory (overrides config)");
        cmd->add_option("--tol-rel", tol_rel, "integrator relative tolerance");
        cmd->add_option("--tol-abs", tol_abs, "integrator absolute tolerance");
        cmd->add_option("--restart-period", restart, "governor restart period");
        cmd->add_flag("--allow-disturbance-mismatch", ov.allow_disturbance_mismatch,
                      "downgrade a failed disturbance-matching check to a warning");
    };

    auto* synth = app.add_subcommand("synthesize", "normal form, checks, controller data");
    auto* simul = app.add_subcommand("simulate", "synthesize plus the closed-loop run");
    auto* bnd = app.add_subcommand("bounds", "simulate plus the a-priori error bounds");
    auto* all = app.add_subcommand("all", "full pipeline");
    for (auto* cmd : {synth, simul, bnd, all}) add_common(cmd);

    CLI11_PARSE(app, argc, argv);

    if (tol_rel > 0.0) ov.rtol = tol_rel;
    if (tol_abs > 0.0) ov.atol = tol_abs;
    if (restart > 0.0) ov.restart_period = restart;
    if (!out_dir.empty()) ov.out_dir = out_dir;

    funnelctl::pipeline::Stage stage = funnelctl::pipeline::Stage::all;
    if (synth->parsed()) stage = funnelctl::pipeline::Stage::synthesize;
    if (simul->parsed()) stage = funnelctl::pipeline::Stage::simulate;
    if (bnd->parsed()) stage = funnelctl::pipeline::Stage::bounds;

    return execute(config_path, stage, ov);
}
