#pragma once

#include "ftsim/model.hpp"

namespace ftsim {

/// Predictor-corrector stepper on the unreduced (shorted-nodes-removed)
/// system. The angle vector is predicted with frozen angular speed, the
/// electrical half-state x_E = (dPsi; Psi) is advanced by one beta-weighted
/// linear solve, and the mechanical half-state x_M = (dTheta; Theta) follows
/// with the electromagnetic torque evaluated at the new fluxes and the
/// predicted angle.
class PcSystem {
  public:
    PcSystem(StageSystem sys, double beta, double h)
        : sys_(std::move(sys)), beta_(beta), h_(h), d_(sys_.dim()) {
        if (beta < 0.0 || beta > 1.0) throw config_error("beta must be in [0, 1]");
        // mechanical update matrix is constant: prefactor once
        Mat km1 = Mat::Zero(12, 12);
        km1.topLeftCorner(6, 6).diagonal() = sys_.inertia;
        km1.bottomRightCorner(6, 6).setIdentity();
        Mat km2 = Mat::Zero(12, 12);
        km2.topRightCorner(6, 6) = sys_.stiffness;   // D = 0
        km2.bottomLeftCorner(6, 6) = -Mat::Identity(6, 6);
        km1_ = km1;
        km2_ = km2;
        mech_lu_.compute(km1 + beta * h * km2);
    }

    const StageSystem& stage() const { return sys_; }
    double beta() const { return beta_; }
    double h() const { return h_; }

    /// Advance (x_E, x_M) from t to t + h. Throws solve_error when the
    /// electrical update matrix is singular (e.g. beta = 0).
    void step(Vec& x_e, Vec& x_m, double t) const {
        if (h_ == 0.0) return;
        const int d = d_;
        const Vec theta_pred = x_m.tail(6) + h_ * x_m.head(6);

        Mat ke2_pred = ke2(theta_pred[4]);
        Mat lhs = ke1();
        lhs += beta_ * h_ * ke2_pred;
        Vec rhs = ke1() * x_e;
        if (beta_ < 1.0) {
            rhs -= (1.0 - beta_) * h_ * (ke2(x_m[10]) * x_e);
        }
        rhs += h_ * ((1.0 - beta_) * g_e(t) + beta_ * g_e(t + h_));
        Vec x_e_next = lhs.partialPivLu().solve(rhs);
        const double rhs_scale = rhs.cwiseAbs().maxCoeff() + 1.0;
        if (!x_e_next.allFinite() ||
            (lhs * x_e_next - rhs).cwiseAbs().maxCoeff() > 1e-6 * rhs_scale)
            throw solve_error("predictor-corrector electrical update failed (beta=" +
                              std::to_string(beta_) + ", h=" + std::to_string(h_) + ")");

        Vec rhs_m = km1_ * x_m - (1.0 - beta_) * h_ * (km2_ * x_m);
        rhs_m += h_ * ((1.0 - beta_) * g_m(x_e.tail(d), x_m[10]) +
                       beta_ * g_m(x_e_next.tail(d), theta_pred[4]));
        Vec x_m_next = mech_lu_.solve(rhs_m);
        if (!x_m_next.allFinite())
            throw solve_error("predictor-corrector mechanical update failed (beta=" +
                              std::to_string(beta_) + ", h=" + std::to_string(h_) + ")");
        x_e = x_e_next;
        x_m = x_m_next;
    }

    Mat ke1() const {
        Mat m = Mat::Zero(2 * d_, 2 * d_);
        m.bottomRightCorner(d_, d_).setIdentity();
        return m;
    }
    Mat ke2(double th5) const {
        Mat m = Mat::Zero(2 * d_, 2 * d_);
        m.topLeftCorner(d_, d_) = Mat(sys_.kr.asDiagonal());
        m.topRightCorner(d_, d_) = sys_.n_of(th5);
        m.bottomLeftCorner(d_, d_) = -Mat::Identity(d_, d_);
        return m;
    }
    Vec g_e(double t) const {
        Vec v = Vec::Zero(2 * d_);
        v.head(d_) = sys_.forcing(t);
        return v;
    }
    Vec g_m(const Vec& psi, double th5) const {
        Vec v = Vec::Zero(12);
        v.head(6) = sys_.torque;
        v[4] -= 0.5 * psi.dot(sys_.d_gamma(th5) * psi);
        return v;
    }

  private:
    StageSystem sys_;
    double beta_, h_;
    int d_;
    Mat km1_, km2_;
    Eigen::PartialPivLU<Mat> mech_lu_;
};

}  // namespace ftsim
