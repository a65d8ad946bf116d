// Command-line front end: equilibrium / simulate / cct / compare.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "ftsim/report.hpp"

namespace fs = std::filesystem;
using namespace ftsim;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string method;
    double h = 0;
    double t_break = -1;
    double horizon = 0;
    std::string out_dir;
    int decimation = 0;
    bool dump_red = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "JSON run configuration");
    cmd->add_option("--method", o.method, "sp-euler | sp-midpoint | pc-beta1 | pc-beta0.5");
    cmd->add_option("--h", o.h, "integration step (s)");
    cmd->add_option("--t-break", o.t_break, "fault duration t_b (s)");
    cmd->add_option("--horizon", o.horizon, "absolute end time (s)");
    cmd->add_option("--out-dir", o.out_dir, "output directory");
    cmd->add_option("--decimation", o.decimation, "emit every k-th step");
    cmd->add_flag("--dump-reduction", o.dump_red, "dump fitted reduction coefficient matrices");
}

RunConfig resolve_config(const CommonOpts& o) {
    RunConfig cfg;
    if (!o.config_path.empty()) cfg = load_run_config(o.config_path);
    if (!o.method.empty()) cfg.scenario.method = parse_method(o.method);
    if (o.h > 0) cfg.scenario.h = o.h;
    if (o.t_break >= 0) cfg.scenario.t_break = o.t_break;
    if (o.horizon > 0) cfg.scenario.t_horizon = o.horizon;
    if (!o.out_dir.empty()) cfg.output.out_dir = o.out_dir;
    if (o.decimation > 0) cfg.output.decimation = o.decimation;
    if (o.dump_red) cfg.output.dump_reduction = true;
    cfg.scenario.validate();
    cfg.output.validate();
    return cfg;
}

bool wants(const RunConfig& cfg, const std::string& fmt) {
    for (const auto& f : cfg.output.formats)
        if (f == fmt) return true;
    return false;
}

void maybe_dump_reduction(const RunConfig& cfg, const ScenarioSystems& sys) {
    if (!cfg.output.dump_reduction) return;
    for (int i = 0; i < 3; ++i)
        dump_reduction(cfg.output.out_dir, "reduction_stage" + std::to_string(i + 1), sys.red[i]);
}

int cmd_equilibrium(const CommonOpts& o, int stage) {
    const RunConfig cfg = resolve_config(o);
    ScenarioSystems sys;
    try {
        sys = build_scenario_systems(cfg.model);
    } catch (const solve_error& e) {
        std::cerr << "equilibrium solve failed: " << e.what() << "\n";
        return 2;
    }
    json out = equilibrium_json(sys, stage);
    std::cout << out.dump(2) << "\n";
    if (!o.out_dir.empty() || !cfg.output.out_dir.empty()) {
        fs::create_directories(cfg.output.out_dir);
        write_equilibrium_csv(cfg.output.out_dir + "/equilibrium_stage" + std::to_string(stage) + ".csv",
                              sys, stage);
    }
    maybe_dump_reduction(cfg, sys);
    const double tol = 1e-8 * (1.0 + sys.stage[stage - 1].forcing_xy().cwiseAbs().maxCoeff());
    return out.at("residual_norm").get<double>() <= tol ? 0 : 2;
}

int cmd_simulate(const CommonOpts& o) {
    const RunConfig cfg = resolve_config(o);
    const ScenarioSystems sys = build_scenario_systems(cfg.model);
    maybe_dump_reduction(cfg, sys);
    const RunResult r = run_three_stage(sys, cfg.scenario, cfg.output.decimation,
                                        /*early_abort=*/true);
    fs::create_directories(cfg.output.out_dir);
    if (wants(cfg, "csv"))
        write_trajectory_csv(cfg.output.out_dir + "/trajectory.csv", r.rows, cfg.model.network.n);
    if (wants(cfg, "json"))
        write_json(cfg.output.out_dir + "/summary.json", run_summary_json(r, cfg));
    std::cout << "verdict: " << verdict_name(r.verdict) << " (" << r.verdict_reason << ")\n";
    if (!r.completed) {
        std::cerr << "step failure, partial outputs retained: " << r.failure << "\n";
        return 3;
    }
    return 0;
}

int cmd_cct(const CommonOpts& o, double t_lo, double t_hi, double tol, int jobs) {
    const RunConfig cfg = resolve_config(o);
    const ScenarioSystems sys = build_scenario_systems(cfg.model);
    CctResult r;
    try {
        r = find_cct(sys, cfg.scenario, t_lo, t_hi, tol, jobs);
    } catch (const solve_error& e) {
        std::cerr << "cct search failed: " << e.what() << "\n";
        return 4;
    }
    json probes = json::array();
    for (const auto& p : r.probes)
        probes.push_back({{"t_break", p.t_break}, {"verdict", verdict_name(p.verdict)},
                          {"reason", p.reason}});
    json out = {{"t_stable", r.t_stable}, {"t_unstable", r.t_unstable},
                {"width", r.t_unstable - r.t_stable}, {"probes", probes}};
    std::cout << out.dump(2) << "\n";
    fs::create_directories(cfg.output.out_dir);
    if (wants(cfg, "json")) write_json(cfg.output.out_dir + "/cct.json", out);
    return 0;
}

int cmd_compare(const CommonOpts& o, const std::string& methods_csv) {
    const auto comma = methods_csv.find(',');
    if (comma == std::string::npos)
        throw config_error("--methods expects two comma-separated method names");
    const Method ma = parse_method(methods_csv.substr(0, comma));
    const Method mb = parse_method(methods_csv.substr(comma + 1));
    RunConfig cfg = resolve_config(o);
    const ScenarioSystems sys = build_scenario_systems(cfg.model);
    cfg.scenario.method = ma;
    const RunResult ra = run_three_stage(sys, cfg.scenario, cfg.output.decimation, false);
    cfg.scenario.method = mb;
    const RunResult rb = run_three_stage(sys, cfg.scenario, cfg.output.decimation, false);
    fs::create_directories(cfg.output.out_dir);
    write_trajectory_csv(cfg.output.out_dir + "/trajectory_" + method_name(ma) + ".csv", ra.rows,
                         cfg.model.network.n);
    write_trajectory_csv(cfg.output.out_dir + "/trajectory_" + method_name(mb) + ".csv", rb.rows,
                         cfg.model.network.n);
    std::ofstream out(cfg.output.out_dir + "/compare.csv");
    out << "t,state_err_norm,d_power_angle_deg,d_delta_omega\n";
    const size_t nrows = std::min(ra.rows.size(), rb.rows.size());
    for (size_t i = 0; i < nrows; ++i) {
        const auto& a = ra.rows[i];
        const auto& b = rb.rows[i];
        const double err = std::sqrt((a.psi - b.psi).squaredNorm() + (a.theta - b.theta).squaredNorm());
        out << num17(a.t) << ',' << num17(err) << ','
            << num17(a.power_angle_deg - b.power_angle_deg) << ','
            << num17(a.delta_omega - b.delta_omega) << "\n";
    }
    std::cout << "compared " << method_name(ma) << " vs " << method_name(mb) << " over "
              << nrows << " rows\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fault transient simulator for a multi-mass synchronous generator on an inductive network"};
    app.require_subcommand(1);

    CommonOpts eq_o, sim_o, cct_o, cmp_o;
    int eq_stage = 1;
    auto* eq = app.add_subcommand("equilibrium", "solve an operating point and print it in both frames");
    add_common(eq, eq_o);
    eq->add_option("--stage", eq_stage, "1 (pre-fault) or 3 (post-fault)")
        ->check(CLI::IsMember({1, 3}));

    auto* sim = app.add_subcommand("simulate", "run the three-stage fault transient");
    add_common(sim, sim_o);

    double t_lo = 0.5, t_hi = 1.0, tol = 0.01;
    int jobs = 1;
    auto* cct = app.add_subcommand("cct", "bisect the critical clearing time");
    add_common(cct, cct_o);
    cct->add_option("--t-lo", t_lo, "stable bracket endpoint (s)");
    cct->add_option("--t-hi", t_hi, "unstable bracket endpoint (s)");
    cct->add_option("--tol", tol, "bracket width tolerance (s)");
    cct->add_option("--jobs", jobs, "worker pool bound for probes");

    std::string methods = "sp-midpoint,pc-beta0.5";
    auto* cmp = app.add_subcommand("compare", "run two methods on one config, emit paired CSVs");
    add_common(cmp, cmp_o);
    cmp->add_option("--methods", methods, "two comma-separated methods");

    CLI11_PARSE(app, argc, argv);

    try {
        if (eq->parsed()) return cmd_equilibrium(eq_o, eq_stage);
        if (sim->parsed()) return cmd_simulate(sim_o);
        if (cct->parsed()) return cmd_cct(cct_o, t_lo, t_hi, tol, jobs);
        if (cmp->parsed()) return cmd_compare(cmp_o, methods);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const model_error& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return 1;
    } catch (const solve_error& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
