#pragma once

#include "ftsim/model.hpp"
#include "ftsim/trig_family.hpp"

namespace ftsim {

/// Schur elimination gain for one theta: rows ordered [lambda1; lambda2],
/// top block A0 = -N11^-1 N12, bottom block the identity. N is given in
/// post-removal coordinates; local1/local2 index into it.
inline Mat schur_gain_direct(const Mat& n, const std::vector<int>& local1,
                             const std::vector<int>& local2) {
    const int n1 = static_cast<int>(local1.size());
    const int n2 = static_cast<int>(local2.size());
    Mat a(n1 + n2, n2);
    if (n1 > 0) {
        Mat n11(n1, n1), n12(n1, n2);
        for (int r = 0; r < n1; ++r) {
            for (int c = 0; c < n1; ++c) n11(r, c) = n(local1[r], local1[c]);
            for (int c = 0; c < n2; ++c) n12(r, c) = n(local1[r], local2[c]);
        }
        Eigen::LDLT<Mat> ldlt(n11);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
            throw solve_error("N_11 block not positive definite; model violates positivity");
        a.topRows(n1) = -ldlt.solve(n12);
    }
    a.bottomRows(n2) = Mat::Identity(n2, n2);
    return a;
}

/// The electrical system with the open (zero-conductance) variables
/// eliminated. The theta dependence of the gain A0 and of the reduced
/// stiffness Ntilde is held as fitted trigonometric families, so evaluation
/// and derivatives are closed-form.
struct ReducedSystem {
    StageSystem sys;             // post-removal stage this was built from
    Vec kr_red;                  // diag over lambda2, strictly positive
    TrigMatrixFamily a0;         // |lambda1| x |lambda2|; empty if lambda1 is
    TrigMatrixFamily ntilde;     // |lambda2| x |lambda2|
    Vec f_const, f_cos, f_sin;   // forcing restricted to lambda2

    int dim() const { return static_cast<int>(sys.local2.size()); }
    int full_dim() const { return sys.dim(); }
    bool trivial() const { return sys.local1.empty(); }

    Vec forcing(double t) const {
        return f_const + f_cos * std::cos(sys.omega_s * t) + f_sin * std::sin(sys.omega_s * t);
    }
    Vec forcing_dot(double t) const {
        return sys.omega_s * (f_cos * (-std::sin(sys.omega_s * t)) + f_sin * std::cos(sys.omega_s * t));
    }

    /// Scatter reduced fluxes back to post-removal coordinates,
    /// Psi_lambda1 = A0(theta) Psi_lambda2.
    Vec lift_flux(double th, const Vec& q) const {
        Vec psi = Vec::Zero(full_dim());
        for (int i = 0; i < dim(); ++i) psi[sys.local2[i]] = q[i];
        if (!trivial()) {
            const Vec top = a0.eval(th) * q;
            for (size_t i = 0; i < sys.local1.size(); ++i) psi[sys.local1[i]] = top[i];
        }
        return psi;
    }

    /// Time derivative of the lift: dPsi_lambda1 = A0' th5dot q + A0 qdot.
    Vec lift_voltage(double th, double th5_dot, const Vec& q, const Vec& q_dot) const {
        Vec v = Vec::Zero(full_dim());
        for (int i = 0; i < dim(); ++i) v[sys.local2[i]] = q_dot[i];
        if (!trivial()) {
            const Vec top = a0.eval(th) * q_dot + th5_dot * (a0.deriv(th) * q);
            for (size_t i = 0; i < sys.local1.size(); ++i) v[sys.local1[i]] = top[i];
        }
        return v;
    }

    /// Restrict a post-removal flux/voltage vector to reduced coordinates.
    Vec restrict(const Vec& full) const {
        Vec q(dim());
        for (int i = 0; i < dim(); ++i) q[i] = full[sys.local2[i]];
        return q;
    }
};

/// Build the reduced system. Shorted nodes must already be removed. The
/// fitted families are validated at construction; the degenerate case
/// lambda1 = {} short-circuits to A = I, Ntilde = N.
inline ReducedSystem reduce(const StageSystem& s) {
    if ((s.kr.array() == kInf).any())
        throw model_error("reduce() requires shorted nodes to be removed first");
    ReducedSystem r;
    r.sys = s;
    const auto& l1 = s.local1;
    const auto& l2 = s.local2;
    const int n2 = static_cast<int>(l2.size());
    r.kr_red.resize(n2);
    r.f_const.resize(n2);
    r.f_cos.resize(n2);
    r.f_sin.resize(n2);
    for (int i = 0; i < n2; ++i) {
        r.kr_red[i] = s.kr[l2[i]];
        r.f_const[i] = s.f_const[l2[i]];
        r.f_cos[i] = s.f_cos[l2[i]];
        r.f_sin[i] = s.f_sin[l2[i]];
    }
    if (l1.empty()) {
        r.ntilde = fit_trig([&](double th) { return s.n_of(th); });
        return r;
    }
    r.a0 = fit_trig([&](double th) {
        const Mat a = schur_gain_direct(s.n_of(th), l1, l2);
        return Mat(a.topRows(static_cast<int>(l1.size())));
    });
    r.ntilde = fit_trig([&](double th) {
        const Mat n = s.n_of(th);
        const Mat a = schur_gain_direct(n, l1, l2);
        // Ntilde = A^T N A with N's rows/cols permuted to [lambda1; lambda2]
        const int d = s.dim();
        std::vector<int> perm;
        perm.reserve(d);
        perm.insert(perm.end(), l1.begin(), l1.end());
        perm.insert(perm.end(), l2.begin(), l2.end());
        Mat np(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) np(i, j) = n(perm[i], perm[j]);
        Mat nt = a.transpose() * np * a;
        return Mat(0.5 * (nt + nt.transpose()));
    });
    return r;
}

}  // namespace ftsim
