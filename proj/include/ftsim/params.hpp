#pragma once

#include <json.hpp>

#include <utility>
#include <vector>

#include "ftsim/common.hpp"

namespace ftsim {

using nlohmann::json;

/// Electrical and mechanical constants of the 7-winding machine.
/// winding_L is the 6x6 inductance matrix over (d, q, f, D, g, Q); its
/// inverse is the rotor coupling matrix used throughout.
struct GeneratorParams {
    Mat winding_L;    // 6x6, symmetric positive definite (H)
    double r_f = 0, r_D = 0, r_g = 0, r_Q = 0;  // winding resistances (Ohm)
    Vec J_diag;       // 6 shaft inertias (kg m^2)
    Vec K_springs;    // 5 shaft stiffnesses (N m / rad)
    Vec T_fracs;      // torque distribution over the 6 masses, sums to 1
    double T0 = 0;    // total driving torque (N m)
    double U_f = 0;   // field voltage (V)

    Vec torque() const { return T_fracs * T0; }

    void validate() const {
        if (winding_L.rows() != 6 || winding_L.cols() != 6)
            throw model_error("winding_L must be 6x6");
        if (!winding_L.isApprox(winding_L.transpose(), 1e-12))
            throw model_error("winding_L must be symmetric");
        Eigen::SelfAdjointEigenSolver<Mat> es(winding_L);
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        if (lo <= 0.0) throw model_error("winding_L must be positive definite");
        if (hi / lo > 1e12) throw model_error("winding_L too ill-conditioned to invert");
        if (J_diag.size() != 6 || (J_diag.array() <= 0).any())
            throw model_error("J_diag needs 6 positive entries");
        if (K_springs.size() != 5 || (K_springs.array() <= 0).any())
            throw model_error("K_springs needs 5 positive entries");
        if (T_fracs.size() != 6) throw model_error("T_fracs needs 6 entries");
        for (double r : {r_f, r_D, r_g, r_Q})
            if (!(r > 0) || !std::isfinite(r)) throw model_error("winding resistances must be finite and positive");
    }
};

/// Inductive network of n nodes. ell[i][j] in (0, +inf] is the branch
/// inductance between nodes i and j (+inf = not connected); r_ground[i] in
/// [0, +inf] is the ground resistance of node i (0 = short, +inf = open).
/// Node 1 (index 0) carries the Norton source (U_s, omega_s) behind r_ground[0].
struct NetworkTopology {
    int n = 0;
    Mat ell;          // n x n, symmetric, diagonal unused
    Vec r_ground;     // n entries
    double U_s = 0;
    double omega_s = 0;

    void validate() const {
        if (n < 1) throw model_error("need at least one node");
        if (ell.rows() != n || ell.cols() != n) throw model_error("ell must be n x n");
        if (r_ground.size() != n) throw model_error("r_ground needs n entries");
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                if (ell(i, j) != ell(j, i)) throw model_error("ell must be symmetric");
                if (!(ell(i, j) > 0)) throw model_error("branch inductances must be positive or +inf");
            }
        if (!(r_ground[0] > 0) || !std::isfinite(r_ground[0]))
            throw model_error("node 1 must touch ground through a finite positive resistance");
        for (int i = 1; i < n; ++i)
            if (r_ground[i] < 0) throw model_error("ground resistances must be non-negative");
        if (!(omega_s > 0)) throw model_error("omega_s must be positive");
    }
};

/// Fault scenario wiring: which node is shorted during the fault and which
/// branches are removed when it is cleared (1-based node numbers).
struct FaultSpec {
    int fault_node = 2;
    std::vector<std::pair<int, int>> cleared_branches = {{1, 2}, {2, 3}};
};

struct Model {
    GeneratorParams generator;
    NetworkTopology network;
    FaultSpec fault;
};

/// Built-in preset reproducing the first benchmark machine on the three-node
/// two-branch network.
inline Model first_benchmark() {
    Model m;
    auto& g = m.generator;
    const double L_d = 0.00359582836822968;
    const double L_dfD = 0.0235797400806847;  // L_df = L_fd = L_dD = L_Dd
    const double L_q = 0.00343512095512444;
    const double L_qgQ = 0.0224433670647480;  // L_qg = L_gq = L_qQ = L_Qq
    const double L_f = 0.172961353354511;
    const double L_fD = 0.166733941096683;
    const double L_D = 0.167286372829233;
    const double L_g = 0.191442705861614;
    const double L_gQ = 0.158698570441422;
    const double L_Q = 0.168240573094545;
    g.winding_L.resize(6, 6);
    g.winding_L << L_d, 0, L_dfD, L_dfD, 0, 0,
                   0, L_q, 0, 0, L_qgQ, L_qgQ,
                   L_dfD, 0, L_f, L_fD, 0, 0,
                   L_dfD, 0, L_fD, L_D, 0, 0,
                   0, L_qgQ, 0, 0, L_g, L_gQ,
                   0, L_qgQ, 0, 0, L_gQ, L_Q;
    g.r_f = 0.0532343305911098;
    g.r_D = 0.154680885113791;
    g.r_g = 0.532343305911098;
    g.r_Q = 0.311370612891397;
    g.J_diag = (Vec(6) << 1156.56, 1953.83, 10782.84, 11103.62, 10906.22, 429.68).finished();
    g.K_springs = (Vec(5) << 45692300.27, 82680741.64, 123179695.3, 167728592.0, 6679980.902).finished();
    g.T_fracs = (Vec(6) << 0.3, 0.26, 0.22, 0.22, 0.0, 0.0).finished();
    g.T0 = 2130673.909092358;
    g.U_f = 373.7756;

    auto& nt = m.network;
    nt.n = 3;
    const double ell1 = 4e-4, ell2 = 2e-4;
    nt.ell = Mat::Constant(3, 3, kInf);
    nt.ell(0, 1) = nt.ell(1, 0) = ell2;
    nt.ell(1, 2) = nt.ell(2, 1) = ell2;
    nt.ell(0, 2) = nt.ell(2, 0) = ell1;
    nt.r_ground = (Vec(3) << 5e-4, kInf, kInf).finished();
    nt.U_s = 2.6e4;
    nt.omega_s = 120.0 * kPi;

    m.fault.fault_node = 2;
    m.fault.cleared_branches = {{1, 2}, {2, 3}};
    return m;
}

// ---- JSON ingestion (field names mirror the structs; "inf" accepted for +inf) ----

inline double json_extended(const json& v) {
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf" || s == "+inf" || s == "Infinity") return kInf;
        throw config_error("unrecognized extended-real string: " + s);
    }
    return v.get<double>();
}

inline json extended_to_json(double v) {
    if (v == kInf) return json("inf");
    return json(v);
}

inline Mat mat_from_json(const json& j) {
    const auto rows = j.size();
    if (rows == 0) throw config_error("empty matrix");
    const auto cols = j.at(0).size();
    Mat m(rows, cols);
    for (size_t r = 0; r < rows; ++r) {
        if (j.at(r).size() != cols) throw config_error("ragged matrix");
        for (size_t c = 0; c < cols; ++c) m(r, c) = json_extended(j.at(r).at(c));
    }
    return m;
}

inline Vec vec_from_json(const json& j) {
    Vec v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v[i] = json_extended(j.at(i));
    return v;
}

inline GeneratorParams generator_from_json(const json& j) {
    GeneratorParams g;
    g.winding_L = mat_from_json(j.at("winding_L"));
    g.r_f = j.at("r_f").get<double>();
    g.r_D = j.at("r_D").get<double>();
    g.r_g = j.at("r_g").get<double>();
    g.r_Q = j.at("r_Q").get<double>();
    g.J_diag = vec_from_json(j.at("J_diag"));
    g.K_springs = vec_from_json(j.at("K_springs"));
    g.T_fracs = vec_from_json(j.at("T_fracs"));
    g.T0 = j.at("T0").get<double>();
    g.U_f = j.at("U_f").get<double>();
    return g;
}

inline NetworkTopology network_from_json(const json& j) {
    NetworkTopology nt;
    nt.n = j.at("n").get<int>();
    nt.ell = mat_from_json(j.at("ell"));
    nt.r_ground = vec_from_json(j.at("r_ground"));
    nt.U_s = j.at("U_s").get<double>();
    nt.omega_s = j.at("omega_s").get<double>();
    return nt;
}

inline Model model_from_json(const json& j) {
    if (j.is_string()) {
        const std::string name = j.get<std::string>();
        if (name == "first-benchmark") return first_benchmark();
        throw config_error("unknown model preset: " + name);
    }
    Model m;
    m.generator = generator_from_json(j.at("generator"));
    m.network = network_from_json(j.at("network"));
    if (j.contains("fault")) {
        const auto& f = j.at("fault");
        m.fault.fault_node = f.at("fault_node").get<int>();
        m.fault.cleared_branches.clear();
        for (const auto& b : f.at("cleared_branches"))
            m.fault.cleared_branches.emplace_back(b.at(0).get<int>(), b.at(1).get<int>());
    }
    m.generator.validate();
    m.network.validate();
    return m;
}

}  // namespace ftsim
