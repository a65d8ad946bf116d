#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "ftsim/params.hpp"

namespace ftsim {

// Electrical index convention: (1a, 1b, 2a, 2b, ..., na, nb, f, D, g, Q),
// 0-based. The four winding indices are 2n .. 2n+3 and are never removed.

/// Inductance coupling matrix: block-diag(L, 0_4) with
/// L[ia,ja] = L[ib,jb] = sum_k 1/ell_ik (i == j) or -1/ell_ij (i != j),
/// zero between a and b components. 1/inf reads as 0.
inline Mat build_kl(const NetworkTopology& t) {
    const int n = t.n;
    Mat kl = Mat::Zero(2 * n + 4, 2 * n + 4);
    for (int i = 0; i < n; ++i) {
        double diag = 0.0;
        for (int k = 0; k < n; ++k) {
            if (k == i) continue;
            const double inv = std::isfinite(t.ell(i, k)) ? 1.0 / t.ell(i, k) : 0.0;
            diag += inv;
            kl(2 * i, 2 * k) = -inv;
            kl(2 * i + 1, 2 * k + 1) = -inv;
        }
        kl(2 * i, 2 * i) = diag;
        kl(2 * i + 1, 2 * i + 1) = diag;
    }
    return kl;
}

/// Conductance diagonal diag(1/r_1, 1/r_1, ..., 1/r_n, 1/r_n, 1/r_f, 1/r_D,
/// 1/r_g, 1/r_Q). r = +inf maps to 0, r = 0 maps to the +inf sentinel that
/// remove_shorted later eliminates.
inline Vec build_kr(const NetworkTopology& t, const GeneratorParams& g) {
    const int n = t.n;
    Vec kr(2 * n + 4);
    for (int i = 0; i < n; ++i) {
        const double r = t.r_ground[i];
        const double e = (r == kInf) ? 0.0 : (r == 0.0 ? kInf : 1.0 / r);
        kr[2 * i] = e;
        kr[2 * i + 1] = e;
    }
    kr[2 * n] = 1.0 / g.r_f;
    kr[2 * n + 1] = 1.0 / g.r_D;
    kr[2 * n + 2] = 1.0 / g.r_g;
    kr[2 * n + 3] = 1.0 / g.r_Q;
    return kr;
}

/// Six-mass shaft stiffness matrix (tridiagonal in 1x1 blocks, zero row sums).
inline Mat shaft_stiffness(const Vec& springs) {
    Mat k = Mat::Zero(6, 6);
    for (int i = 0; i < 5; ++i) {
        k(i, i) += springs[i];
        k(i + 1, i + 1) += springs[i];
        k(i, i + 1) -= springs[i];
        k(i + 1, i) -= springs[i];
    }
    return k;
}

/// Rotor coupling block: G(theta) = P(theta) * Gamma0 * P(-theta) on the last
/// six electrical coordinates (na, nb, f, D, g, Q), where P rotates the
/// (na, nb) pair. Derivatives are commutators with the rotation generator.
class RotorCoupling {
  public:
    RotorCoupling() = default;
    explicit RotorCoupling(const Mat& winding_L) {
        Eigen::LDLT<Mat> ldlt(winding_L);
        gamma0_ = ldlt.solve(Mat::Identity(6, 6));
        if (ldlt.info() != Eigen::Success || !gamma0_.allFinite() ||
            (winding_L * gamma0_ - Mat::Identity(6, 6)).cwiseAbs().maxCoeff() > 1e-6)
            throw model_error("winding inductance matrix is not invertible");
        gamma0_ = 0.5 * (gamma0_ + gamma0_.transpose()).eval();
        omega_ = Mat::Zero(6, 6);
        omega_(0, 1) = -1.0;
        omega_(1, 0) = 1.0;
    }

    const Mat& gamma0() const { return gamma0_; }

    Mat block(double th) const {
        Mat p = Mat::Identity(6, 6);
        const double c = std::cos(th), s = std::sin(th);
        p(0, 0) = c; p(0, 1) = -s;
        p(1, 0) = s; p(1, 1) = c;
        return p * gamma0_ * p.transpose();
    }
    Mat d_block(double th) const {
        const Mat g = block(th);
        return omega_ * g - g * omega_;
    }
    Mat d2_block(double th) const {
        const Mat dg = d_block(th);
        return omega_ * dg - dg * omega_;
    }

  private:
    Mat gamma0_;
    Mat omega_;
};

/// Disjoint classification of electrical indices by ground conductance:
/// lambda0 = shorted (1/r = +inf), lambda1 = open (1/r = 0), lambda2 = finite.
/// Indices are stored as original 0-based labels.
struct IndexPartition {
    std::vector<int> lambda0, lambda1, lambda2;
};

/// Classify an extended-real conductance diagonal. Winding indices (the last
/// four) must end up in lambda2.
inline IndexPartition partition_from_kr(const Vec& kr_extended) {
    IndexPartition p;
    const int dim = static_cast<int>(kr_extended.size());
    for (int k = 0; k < dim; ++k) {
        if (kr_extended[k] == kInf)
            p.lambda0.push_back(k);
        else if (kr_extended[k] == 0.0)
            p.lambda1.push_back(k);
        else
            p.lambda2.push_back(k);
    }
    for (int k = dim - 4; k < dim; ++k)
        if (!std::binary_search(p.lambda2.begin(), p.lambda2.end(), k))
            throw model_error("winding conductances must be finite and positive");
    return p;
}

/// One stage of the transient, fully assembled, with shorted nodes removed.
/// `kept` maps post-removal positions back to original electrical labels;
/// local1/local2 are the lambda1/lambda2 positions in post-removal indexing.
struct StageSystem {
    int n_nodes = 0;               // nodes of the source topology
    std::vector<int> kept;         // original labels still present
    std::vector<int> removed;      // original labels dropped (lambda0)
    std::vector<int> local1, local2;
    IndexPartition part;           // in original labels
    Vec kr;                        // finite diagonal entries, post-removal
    Mat kl;                        // post-removal
    RotorCoupling rotor;
    Mat stiffness;                 // K, 6x6
    Vec inertia;                   // J diagonal, 6
    Vec torque;                    // T, 6
    // damping D is identically zero for this machine model
    Vec f_const, f_cos, f_sin;     // forcing f(t) = f_const + f_cos cos(w t) + f_sin sin(w t)
    double omega_s = 0;

    int dim() const { return static_cast<int>(kept.size()); }

    Vec forcing(double t) const {
        return f_const + f_cos * std::cos(omega_s * t) + f_sin * std::sin(omega_s * t);
    }
    Vec forcing_dot(double t) const {
        return omega_s * (f_sin * std::cos(omega_s * t) - f_cos * std::sin(omega_s * t));
    }
    /// f at t = 0; also the constant forcing of the synchronous-frame system.
    Vec forcing_xy() const { return f_const + f_cos; }

    /// Rotor coupling on the kept coordinates.
    Mat gamma(double th) const { return embed(rotor.block(th)); }
    Mat d_gamma(double th) const { return embed(rotor.d_block(th)); }
    Mat d2_gamma(double th) const { return embed(rotor.d2_block(th)); }

    Mat n_of(double th) const { return kl + gamma(th); }
    Mat dn_of(double th) const { return d_gamma(th); }

    /// Per-node-pair rotation generator (zero on windings), kept coordinates.
    Mat kj() const {
        const int d = dim();
        Mat m = Mat::Zero(d, d);
        for (int i = 0; i + 1 < d; ++i) {
            if (kept[i] >= 2 * n_nodes) break;  // windings
            if (kept[i] % 2 == 0 && kept[i + 1] == kept[i] + 1) {
                m(i, i + 1) = -1.0;
                m(i + 1, i) = 1.0;
            }
        }
        return m;
    }

  private:
    // Scatter the 6x6 tail block into the kept-index frame.
    Mat embed(const Mat& block6) const {
        const int d = dim();
        const int tail0 = 2 * n_nodes - 2;  // original label of na
        Mat out = Mat::Zero(d, d);
        for (int r = 0; r < d; ++r) {
            if (kept[r] < tail0) continue;
            for (int c = 0; c < d; ++c) {
                if (kept[c] < tail0) continue;
                out(r, c) = block6(kept[r] - tail0, kept[c] - tail0);
            }
        }
        return out;
    }
};

/// Assemble the full (pre-removal) stage; kr may still hold +inf sentinels.
inline StageSystem assemble_stage(const GeneratorParams& g, const NetworkTopology& t) {
    g.validate();
    t.validate();
    StageSystem s;
    s.n_nodes = t.n;
    const int dim = 2 * t.n + 4;
    s.kept.resize(dim);
    for (int i = 0; i < dim; ++i) s.kept[i] = i;
    s.kr = build_kr(t, g);
    s.kl = build_kl(t);
    s.rotor = RotorCoupling(g.winding_L);
    s.stiffness = shaft_stiffness(g.K_springs);
    s.inertia = g.J_diag;
    s.torque = g.torque();
    s.omega_s = t.omega_s;
    s.f_const = Vec::Zero(dim);
    s.f_cos = Vec::Zero(dim);
    s.f_sin = Vec::Zero(dim);
    s.f_const[2 * t.n] = g.U_f / g.r_f;
    s.f_cos[0] = t.U_s / t.r_ground[0];
    s.f_sin[1] = t.U_s / t.r_ground[0];
    s.part = partition_from_kr(s.kr);
    s.local1 = s.part.lambda1;
    s.local2 = s.part.lambda2;
    return s;
}

/// Drop the rows of Psi, dPsi, f and the rows+columns of K_R, K_L, Gamma that
/// belong to shorted (lambda0) nodes. Shorted node fluxes and voltages are
/// identically zero, so nothing is lost.
inline StageSystem remove_shorted(const StageSystem& in, const std::vector<int>& lambda0) {
    for (int k : lambda0) {
        if (k >= 2 * in.n_nodes) throw model_error("cannot remove a winding index");
        if (std::find(in.kept.begin(), in.kept.end(), k) == in.kept.end())
            throw model_error("lambda0 index not present in system");
    }
    StageSystem out = in;
    out.kept.clear();
    out.removed = lambda0;
    std::vector<int> keep_pos;
    for (size_t pos = 0; pos < in.kept.size(); ++pos) {
        const int label = in.kept[pos];
        if (std::find(lambda0.begin(), lambda0.end(), label) == lambda0.end()) {
            out.kept.push_back(label);
            keep_pos.push_back(static_cast<int>(pos));
        }
    }
    const int d = static_cast<int>(keep_pos.size());
    Vec kr(d), fc(d), fcos(d), fsin(d);
    Mat kl(d, d);
    for (int i = 0; i < d; ++i) {
        kr[i] = in.kr[keep_pos[i]];
        fc[i] = in.f_const[keep_pos[i]];
        fcos[i] = in.f_cos[keep_pos[i]];
        fsin[i] = in.f_sin[keep_pos[i]];
        for (int j = 0; j < d; ++j) kl(i, j) = in.kl(keep_pos[i], keep_pos[j]);
    }
    out.kr = kr;
    out.kl = kl;
    out.f_const = fc;
    out.f_cos = fcos;
    out.f_sin = fsin;
    if ((out.kr.array() == kInf).any())
        throw model_error("lambda0 did not cover all shorted indices");
    out.part.lambda0 = lambda0;
    out.part.lambda1.clear();
    out.part.lambda2.clear();
    out.local1.clear();
    out.local2.clear();
    for (int i = 0; i < d; ++i) {
        if (out.kr[i] == 0.0) {
            out.part.lambda1.push_back(out.kept[i]);
            out.local1.push_back(i);
        } else {
            out.part.lambda2.push_back(out.kept[i]);
            out.local2.push_back(i);
        }
    }
    return out;
}

/// Assemble and remove shorted nodes in one go.
inline StageSystem build_stage(const GeneratorParams& g, const NetworkTopology& t) {
    StageSystem full = assemble_stage(g, t);
    return remove_shorted(full, full.part.lambda0);
}

/// The three topologies of the fault transient: pre-fault, node shorted,
/// branches cleared (fault node stays shorted and isolated).
inline std::array<NetworkTopology, 3> stage_topologies(const NetworkTopology& base, const FaultSpec& f) {
    if (f.fault_node < 1 || f.fault_node > base.n) throw config_error("fault node out of range");
    NetworkTopology faulted = base;
    faulted.r_ground[f.fault_node - 1] = 0.0;
    NetworkTopology cleared = faulted;
    for (auto [a, b] : f.cleared_branches) {
        if (a < 1 || a > base.n || b < 1 || b > base.n) throw config_error("cleared branch out of range");
        cleared.ell(a - 1, b - 1) = kInf;
        cleared.ell(b - 1, a - 1) = kInf;
    }
    return {base, faulted, cleared};
}

}  // namespace ftsim
