#pragma once

#include <fstream>

#include "ftsim/scenario.hpp"

namespace ftsim {

struct OutputConfig {
    std::string out_dir = ".";
    int decimation = 100;
    std::vector<std::string> formats = {"csv", "json"};
    bool dump_reduction = false;

    void validate() const {
        if (decimation < 1) throw config_error("decimation must be >= 1");
        for (const auto& f : formats)
            if (f != "csv" && f != "json") throw config_error("unknown output format: " + f);
    }
};

struct RunConfig {
    std::string model_name = "first-benchmark";  // "" for inline models
    Model model = first_benchmark();
    ScenarioConfig scenario;
    OutputConfig output;
};

inline RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    if (j.contains("model")) {
        const auto& m = j.at("model");
        c.model_name = m.is_string() ? m.get<std::string>() : "";
        c.model = model_from_json(m);
    }
    if (j.contains("scenario")) {
        const auto& s = j.at("scenario");
        auto& sc = c.scenario;
        if (s.contains("t_fault")) sc.t_fault = s.at("t_fault").get<double>();
        if (s.contains("t_break")) sc.t_break = s.at("t_break").get<double>();
        if (s.contains("t_horizon")) sc.t_horizon = s.at("t_horizon").get<double>();
        if (s.contains("method")) sc.method = parse_method(s.at("method").get<std::string>());
        if (s.contains("h")) sc.h = s.at("h").get<double>();
        if (s.contains("stability")) {
            const auto& st = s.at("stability");
            auto& cr = sc.stability;
            if (st.contains("omega_tol")) cr.omega_tol = st.at("omega_tol").get<double>();
            if (st.contains("angle_target_deg") && !st.at("angle_target_deg").is_null())
                cr.angle_target_deg = st.at("angle_target_deg").get<double>();
            if (st.contains("angle_window")) cr.angle_window = st.at("angle_window").get<double>();
            if (st.contains("angle_tol_deg")) cr.angle_tol_deg = st.at("angle_tol_deg").get<double>();
            if (st.contains("pole_slip_limit_deg"))
                cr.pole_slip_limit_deg = st.at("pole_slip_limit_deg").get<double>();
            if (st.contains("omega_slip_limit"))
                cr.omega_slip_limit = st.at("omega_slip_limit").get<double>();
            for (double v : {cr.omega_tol, cr.angle_window, cr.angle_tol_deg,
                             cr.pole_slip_limit_deg, cr.omega_slip_limit})
                if (!(v > 0)) throw config_error("stability thresholds must be positive");
        }
        if (s.contains("newton")) {
            const auto& nw = s.at("newton");
            if (nw.contains("tol_rel")) sc.newton.tol_rel = nw.at("tol_rel").get<double>();
            if (nw.contains("tol_abs")) sc.newton.tol_abs = nw.at("tol_abs").get<double>();
            if (nw.contains("max_iter")) sc.newton.max_iter = nw.at("max_iter").get<int>();
            if (nw.contains("jacobian"))
                sc.newton.jacobian_mode = nw.at("jacobian").get<std::string>() == "finite-difference"
                                              ? NewtonSettings::Jacobian::finite_difference
                                              : NewtonSettings::Jacobian::analytic;
            if (!(sc.newton.tol_rel > 0) || !(sc.newton.tol_abs > 0))
                throw config_error("newton tolerances must be positive");
        }
        sc.validate();
    }
    if (j.contains("output")) {
        const auto& o = j.at("output");
        if (o.contains("out_dir")) c.output.out_dir = o.at("out_dir").get<std::string>();
        if (o.contains("decimation")) c.output.decimation = o.at("decimation").get<int>();
        if (o.contains("formats")) c.output.formats = o.at("formats").get<std::vector<std::string>>();
        if (o.contains("dump_reduction")) c.output.dump_reduction = o.at("dump_reduction").get<bool>();
        c.output.validate();
    }
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw config_error(std::string("config parse error: ") + e.what());
    }
    return run_config_from_json(j);
}

inline json network_to_json(const NetworkTopology& nt) {
    json ell = json::array();
    for (int i = 0; i < nt.n; ++i) {
        json row = json::array();
        for (int j2 = 0; j2 < nt.n; ++j2) row.push_back(extended_to_json(nt.ell(i, j2)));
        ell.push_back(row);
    }
    json rg = json::array();
    for (int i = 0; i < nt.n; ++i) rg.push_back(extended_to_json(nt.r_ground[i]));
    return {{"n", nt.n}, {"ell", ell}, {"r_ground", rg}, {"U_s", nt.U_s}, {"omega_s", nt.omega_s}};
}

inline json generator_to_json(const GeneratorParams& g) {
    json wl = json::array();
    for (int i = 0; i < 6; ++i) {
        json row = json::array();
        for (int j2 = 0; j2 < 6; ++j2) row.push_back(g.winding_L(i, j2));
        wl.push_back(row);
    }
    auto vec = [](const Vec& v) {
        json a = json::array();
        for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
        return a;
    };
    return {{"winding_L", wl}, {"r_f", g.r_f}, {"r_D", g.r_D}, {"r_g", g.r_g}, {"r_Q", g.r_Q},
            {"J_diag", vec(g.J_diag)}, {"K_springs", vec(g.K_springs)},
            {"T_fracs", vec(g.T_fracs)}, {"T0", g.T0}, {"U_f", g.U_f}};
}

inline json run_config_to_json(const RunConfig& c) {
    json model;
    if (!c.model_name.empty()) {
        model = c.model_name;
    } else {
        json fault = {{"fault_node", c.model.fault.fault_node}, {"cleared_branches", json::array()}};
        for (auto [a, b] : c.model.fault.cleared_branches)
            fault["cleared_branches"].push_back(json::array({a, b}));
        model = {{"generator", generator_to_json(c.model.generator)},
                 {"network", network_to_json(c.model.network)},
                 {"fault", fault}};
    }
    const auto& sc = c.scenario;
    const auto& cr = sc.stability;
    json stability = {{"omega_tol", cr.omega_tol},
                      {"angle_window", cr.angle_window},
                      {"angle_tol_deg", cr.angle_tol_deg},
                      {"pole_slip_limit_deg", cr.pole_slip_limit_deg},
                      {"omega_slip_limit", cr.omega_slip_limit}};
    if (!std::isnan(cr.angle_target_deg)) stability["angle_target_deg"] = cr.angle_target_deg;
    json newton = {{"tol_rel", sc.newton.tol_rel},
                   {"tol_abs", sc.newton.tol_abs},
                   {"max_iter", sc.newton.max_iter},
                   {"jacobian", sc.newton.jacobian_mode == NewtonSettings::Jacobian::analytic
                                    ? "analytic" : "finite-difference"}};
    return {{"model", model},
            {"scenario", {{"t_fault", sc.t_fault},
                          {"t_break", sc.t_break},
                          {"t_horizon", sc.horizon_or_default()},
                          {"method", method_name(sc.method)},
                          {"h", sc.h},
                          {"stability", stability},
                          {"newton", newton}}},
            {"output", {{"out_dir", c.output.out_dir},
                        {"decimation", c.output.decimation},
                        {"formats", c.output.formats},
                        {"dump_reduction", c.output.dump_reduction}}}};
}

}  // namespace ftsim
