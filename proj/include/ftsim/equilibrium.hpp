#pragma once

#include <optional>

#include "ftsim/model.hpp"

namespace ftsim {

/// The synchronous-frame (autonomous) form of a stage: at its equilibrium the
/// rotating-frame trajectory is a fixed point. Works on post-removal
/// coordinates; kr entries may be zero (open nodes) but not +inf.
struct XYSystem {
    StageSystem sys;
    Mat kj;

    explicit XYSystem(StageSystem s) : sys(std::move(s)), kj(sys.kj()) {
        if ((sys.kr.array() == kInf).any())
            throw model_error("xy system requires shorted nodes removed");
    }

    int dim() const { return sys.dim(); }

    /// K_L + omega_s K_j K_R + Gamma(delta5): the electrical balance matrix.
    Mat balance_matrix(double delta5) const {
        return sys.kl + sys.omega_s * (kj * sys.kr.asDiagonal()).eval() + sys.gamma(delta5);
    }
};

/// Stacked steady-state residual of the synchronous-frame system at
/// (phi, delta): electrical rows then the six shaft rows. The electromagnetic
/// torque enters shaft row 5 only (the coupling depends on delta5 alone).
inline Vec xy_residual(const XYSystem& xy, const Vec& phi, const Vec& delta) {
    const double d5 = delta[4];
    Vec res(xy.dim() + 6);
    res.head(xy.dim()) = xy.balance_matrix(d5) * phi - xy.sys.forcing_xy();
    Vec mech = xy.sys.stiffness * delta - xy.sys.torque;
    mech[4] += 0.5 * phi.dot(xy.sys.d_gamma(d5) * phi);
    res.tail(6) = mech;
    return res;
}

struct EquilibriumPoint {
    Vec phi;              // electrical state, post-removal coordinates (V s)
    Vec delta;            // six rotor angles (rad)
    double residual_norm = 0;
    double torque_em = 0;               // 1/2 phi' dGamma phi at the point
    double power_angle_deg = 0;         // delta5 + 90 deg (synchronous frame)
    double power_angle_node1_deg = 0;   // via the node-1 voltage phasor
};

namespace detail {

/// Electromagnetic torque surplus as a function of delta5 alone: phi is the
/// electrical balance solution, and equilibrium requires the total
/// electromagnetic torque to equal the total driving torque.
inline double torque_surplus(const XYSystem& xy, double d5, Vec* phi_out = nullptr) {
    Eigen::PartialPivLU<Mat> lu(xy.balance_matrix(d5));
    const Vec phi = lu.solve(xy.sys.forcing_xy());
    if (phi_out) *phi_out = phi;
    const double t_total = xy.sys.torque.sum();
    return 0.5 * phi.dot(xy.sys.d_gamma(d5) * phi) - t_total;
}

}  // namespace detail

/// Solve for the equilibrium operating point. delta5 pins the whole point:
/// the torque balance is solved for delta5 by a scan-and-bisect root search
/// around the guess, keeping only roots with positive synchronizing-torque
/// slope (the dynamically stable branch); the shaft angles follow from a
/// linear solve and a full Newton polish tightens everything.
inline EquilibriumPoint solve_equilibrium(const XYSystem& xy, double delta5_guess = -0.8,
                                          double tol = 1e-10, int max_iter = 25) {
    // 1. bracket roots of the torque surplus on [guess - pi, guess + pi]
    const int grid = 256;
    std::vector<double> roots;
    double prev_th = delta5_guess - kPi;
    double prev_g = detail::torque_surplus(xy, prev_th);
    for (int i = 1; i <= grid; ++i) {
        const double th = delta5_guess - kPi + 2.0 * kPi * i / grid;
        const double g = detail::torque_surplus(xy, th);
        if (prev_g == 0.0) roots.push_back(prev_th);
        if (prev_g * g < 0.0) {
            double lo = prev_th, hi = th, glo = prev_g;
            for (int it = 0; it < 80; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double gm = detail::torque_surplus(xy, mid);
                if (glo * gm <= 0.0) hi = mid;
                else { lo = mid; glo = gm; }
            }
            roots.push_back(0.5 * (lo + hi));
        }
        prev_th = th;
        prev_g = g;
    }
    std::optional<double> best;
    for (double r : roots) {
        const double h = 1e-6;
        const double slope = (detail::torque_surplus(xy, r + h) - detail::torque_surplus(xy, r - h)) / (2 * h);
        if (slope <= 0.0) {
            log(LogLevel::info, "equilibrium: rejected root delta5=", r, " (slope ", slope, ")");
            continue;
        }
        if (!best || std::abs(r - delta5_guess) < std::abs(*best - delta5_guess)) best = r;
    }
    if (!best) throw solve_error("no stable equilibrium root found near delta5 guess");
    const double d5 = *best;

    // 2. phi from the balance, delta from the shaft equations pinned at delta5
    Vec phi;
    detail::torque_surplus(xy, d5, &phi);
    const double t_total = xy.sys.torque.sum();
    Vec rhs_m = xy.sys.torque;
    rhs_m[4] -= t_total;  // shaft rows: K delta = T - T_total e5
    Mat a(7, 6);
    a.topRows(6) = xy.sys.stiffness;
    a.row(6).setZero();
    a(6, 4) = 1.0;
    Vec b(7);
    b.head(6) = rhs_m;
    b[6] = d5;
    Vec delta = a.colPivHouseholderQr().solve(b);

    // 3. full Newton polish on the stacked system
    const int d = xy.dim();
    const double scale = 1.0 + xy.sys.forcing_xy().cwiseAbs().maxCoeff();
    Vec res = xy_residual(xy, phi, delta);
    for (int it = 0; it < max_iter && res.cwiseAbs().maxCoeff() > tol * scale; ++it) {
        Mat jac = Mat::Zero(d + 6, d + 6);
        const double th5 = delta[4];
        jac.topLeftCorner(d, d) = xy.balance_matrix(th5);
        jac.block(0, d + 4, d, 1) = xy.sys.d_gamma(th5) * phi;
        jac.block(d + 4, 0, 1, d) = (xy.sys.d_gamma(th5) * phi).transpose();
        jac.bottomRightCorner(6, 6) = xy.sys.stiffness;
        jac(d + 4, d + 4) += 0.5 * phi.dot(xy.sys.d2_gamma(th5) * phi);
        Vec step = jac.partialPivLu().solve(res);
        phi -= step.head(d);
        delta -= step.tail(6);
        const Vec next = xy_residual(xy, phi, delta);
        log(LogLevel::debug, "equilibrium newton: |res| ", res.cwiseAbs().maxCoeff(),
            " -> ", next.cwiseAbs().maxCoeff());
        res = next;
    }
    if (res.cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw solve_error("equilibrium Newton polish did not converge");

    EquilibriumPoint eq;
    eq.phi = phi;
    eq.delta = delta;
    eq.residual_norm = res.cwiseAbs().maxCoeff();
    eq.torque_em = 0.5 * phi.dot(xy.sys.d_gamma(delta[4]) * phi);
    eq.power_angle_deg = deg(delta[4] + kPi / 2);
    const Vec v = xy.sys.omega_s * (xy.kj * phi);  // rotating-frame voltage at t = 0
    eq.power_angle_node1_deg = deg(delta[4] - std::atan2(v[1], v[0]) + kPi / 2);
    return eq;
}

/// Rotating-frame transform theta = delta + t omega_s, node pairs rotated by
/// omega_s t, winding components pass through.
inline std::pair<Vec, Vec> to_alpha_beta(const StageSystem& s, double t, const Vec& phi, const Vec& delta) {
    const double a = s.omega_s * t;
    const double c = std::cos(a), sn = std::sin(a);
    Vec psi = phi;
    for (int i = 0; i + 1 < s.dim(); ++i) {
        if (s.kept[i] >= 2 * s.n_nodes) break;
        if (s.kept[i] % 2 == 0 && s.kept[i + 1] == s.kept[i] + 1) {
            psi[i] = c * phi[i] - sn * phi[i + 1];
            psi[i + 1] = sn * phi[i] + c * phi[i + 1];
            ++i;
        }
    }
    Vec theta = delta.array() + s.omega_s * t;
    return {psi, theta};
}

inline std::pair<Vec, Vec> from_alpha_beta(const StageSystem& s, double t, const Vec& psi, const Vec& theta) {
    const double a = s.omega_s * t;
    const double c = std::cos(a), sn = std::sin(a);
    Vec phi = psi;
    for (int i = 0; i + 1 < s.dim(); ++i) {
        if (s.kept[i] >= 2 * s.n_nodes) break;
        if (s.kept[i] % 2 == 0 && s.kept[i + 1] == s.kept[i] + 1) {
            phi[i] = c * psi[i] + sn * psi[i + 1];
            phi[i + 1] = -sn * psi[i] + c * psi[i + 1];
            ++i;
        }
    }
    Vec delta = theta.array() - s.omega_s * t;
    return {phi, delta};
}

/// Full rotating-frame state of an equilibrium at time t. The voltage follows
/// from the time derivative of the transform with phi held fixed.
struct FullElecState {
    Vec psi, dpsi;    // post-removal coordinates
    Vec theta, dtheta;
};

inline FullElecState equilibrium_alpha_beta_state(const XYSystem& xy, const EquilibriumPoint& eq, double t = 0.0) {
    FullElecState st;
    auto [psi, theta] = to_alpha_beta(xy.sys, t, eq.phi, eq.delta);
    st.psi = psi;
    st.theta = theta;
    st.dpsi = xy.sys.omega_s * (xy.kj * psi);
    st.dtheta = Vec::Constant(6, xy.sys.omega_s);
    return st;
}

}  // namespace ftsim
