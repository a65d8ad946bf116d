#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ftsim/config.hpp"

namespace ftsim {

/// All numeric CSV fields are printed with 17 significant digits so output is
/// bit-stable for a fixed build and config.
inline std::string num17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string electrical_label(int original_index, int n_nodes) {
    static const char* winding[] = {"f", "D", "g", "Q"};
    if (original_index >= 2 * n_nodes) return winding[original_index - 2 * n_nodes];
    return std::to_string(original_index / 2 + 1) + (original_index % 2 == 0 ? "a" : "b");
}

inline std::string trajectory_header(int n_nodes) {
    std::string h = "t,stage,delta_omega,torque_em,power_angle_deg";
    for (int i = 0; i < 2 * n_nodes + 4; ++i) h += ",psi_" + electrical_label(i, n_nodes);
    for (int i = 1; i <= 6; ++i) h += ",theta_" + std::to_string(i);
    return h;
}

inline void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows,
                                 int n_nodes) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open output file: " + path);
    out << trajectory_header(n_nodes) << "\n";
    for (const auto& r : rows) {
        out << num17(r.t) << ',' << r.stage << ',' << num17(r.delta_omega) << ','
            << num17(r.torque_em) << ',' << num17(r.power_angle_deg);
        for (int i = 0; i < r.psi.size(); ++i) out << ',' << num17(r.psi[i]);
        for (int i = 0; i < r.theta.size(); ++i) out << ',' << num17(r.theta[i]);
        out << "\n";
    }
}

inline json run_summary_json(const RunResult& r, const RunConfig& cfg) {
    json switches = json::array();
    for (int i = 0; i < r.n_switches; ++i) {
        const auto& s = r.switches[i];
        switches.push_back({{"t", s.t},
                            {"from", s.from},
                            {"to", s.to},
                            {"flux_continuity_max_abs", s.flux_continuity_max_abs},
                            {"algebraic_residual_rel", s.algebraic_residual_rel}});
    }
    json end_window;
    if (!std::isnan(r.window_mean_abs_domega)) {
        end_window = {{"t0", r.window_t0},
                      {"t1", r.window_t1},
                      {"mean_abs_delta_omega", r.window_mean_abs_domega},
                      {"mean_power_angle_deg", r.window_mean_power_angle_deg}};
    }
    return {{"verdict", verdict_name(r.verdict)},
            {"verdict_reason", r.verdict_reason},
            {"completed", r.completed},
            {"t_end", r.t_end},
            {"angle_target_deg", r.angle_target_deg},
            {"snapped_t_fault", r.snapped_t_fault},
            {"snapped_t_clear", r.snapped_t_clear},
            {"end_window", end_window},
            {"max_power_angle_dev_deg", r.max_power_angle_dev_deg},
            {"max_abs_delta_omega", r.max_abs_domega},
            {"max_power_angle_jump_deg", r.max_pa_jump_deg},
            {"switches", switches},
            {"newton", {{"steps", r.stats.steps},
                        {"total_iterations", r.stats.newton_total},
                        {"max_iterations_per_step", r.stats.newton_max},
                        {"max_dirac_residual", r.stats.dirac_max},
                        {"max_dirac_ratio", r.stats.dirac_ratio_max}}},
            {"config", run_config_to_json(cfg)}};
}

inline void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open output file: " + path);
    out << j.dump(2) << "\n";
}

inline void write_matrix_csv(const std::string& path, const Mat& m) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open output file: " + path);
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) out << (j ? "," : "") << num17(m(i, j));
        out << "\n";
    }
}

/// Diagnostic dump of the fitted trigonometric coefficient matrices,
/// one CSV per family member.
inline void dump_reduction(const std::string& dir, const std::string& tag, const ReducedSystem& red) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto dump_family = [&](const std::string& name, const TrigMatrixFamily& f) {
        if (f.s0.size() == 0) return;
        write_matrix_csv(dir + "/" + tag + "_" + name + "_S0.csv", f.s0);
        write_matrix_csv(dir + "/" + tag + "_" + name + "_S1.csv", f.s1);
        write_matrix_csv(dir + "/" + tag + "_" + name + "_C1.csv", f.c1);
        write_matrix_csv(dir + "/" + tag + "_" + name + "_S2.csv", f.s2);
        write_matrix_csv(dir + "/" + tag + "_" + name + "_C2.csv", f.c2);
    };
    dump_family("A0", red.a0);
    dump_family("Ntilde", red.ntilde);
}

inline json equilibrium_json(const ScenarioSystems& sys, int stage_1based) {
    const int idx = stage_1based - 1;
    const EquilibriumPoint& eq = (stage_1based == 3) ? sys.eq_post : sys.eq_pre;
    const StageSystem& st = sys.stage[idx];
    const FullElecState ab = equilibrium_alpha_beta_state(XYSystem(st), eq, 0.0);
    auto vec = [](const Vec& v) {
        json a = json::array();
        for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
        return a;
    };
    return {{"stage", stage_1based},
            {"residual_norm", eq.residual_norm},
            {"torque_em", eq.torque_em},
            {"power_angle_deg", eq.power_angle_deg},
            {"power_angle_node1_deg", eq.power_angle_node1_deg},
            {"xy", {{"phi", vec(eq.phi)}, {"delta", vec(eq.delta)}}},
            {"alpha_beta", {{"psi_dot", vec(ab.dpsi)},
                            {"psi", vec(ab.psi)},
                            {"theta_dot", vec(ab.dtheta)},
                            {"theta", vec(ab.theta)}}}};
}

inline void write_equilibrium_csv(const std::string& path, const ScenarioSystems& sys, int stage_1based) {
    const int idx = stage_1based - 1;
    const EquilibriumPoint& eq = (stage_1based == 3) ? sys.eq_post : sys.eq_pre;
    const StageSystem& st = sys.stage[idx];
    const FullElecState ab = equilibrium_alpha_beta_state(XYSystem(st), eq, 0.0);
    std::ofstream out(path);
    if (!out) throw config_error("cannot open output file: " + path);
    out << "quantity,index,label,value\n";
    for (int i = 0; i < eq.phi.size(); ++i)
        out << "phi," << i << ',' << electrical_label(st.kept[i], st.n_nodes) << ',' << num17(eq.phi[i]) << "\n";
    for (int i = 0; i < 6; ++i) out << "delta," << i << ",theta" << i + 1 << ',' << num17(eq.delta[i]) << "\n";
    for (int i = 0; i < ab.psi.size(); ++i)
        out << "psi," << i << ',' << electrical_label(st.kept[i], st.n_nodes) << ',' << num17(ab.psi[i]) << "\n";
    for (int i = 0; i < ab.dpsi.size(); ++i)
        out << "psi_dot," << i << ',' << electrical_label(st.kept[i], st.n_nodes) << ',' << num17(ab.dpsi[i]) << "\n";
    for (int i = 0; i < 6; ++i) out << "theta," << i << ",theta" << i + 1 << ',' << num17(ab.theta[i]) << "\n";
    for (int i = 0; i < 6; ++i)
        out << "theta_dot," << i << ",theta" << i + 1 << ',' << num17(ab.dtheta[i]) << "\n";
}

}  // namespace ftsim
