#pragma once

#include <functional>
#include <memory>

#include "ftsim/equilibrium.hpp"
#include "ftsim/pc.hpp"
#include "ftsim/ph_system.hpp"

namespace ftsim {

struct Diagnostics {
    double delta_omega = 0;   // theta5_dot - omega_s
    double torque_em = 0;     // 1/2 Psi' dN Psi (reduced or full, equal by the lift identity)
    double v1_alpha = 0, v1_beta = 0;  // node-1 voltage pair
    double theta5 = 0;
};

struct StepperStats {
    long steps = 0;
    long newton_total = 0;
    int newton_max = 0;
    double dirac_max = 0;           // max dirac residual over accepted steps
    double dirac_ratio_max = 0;     // max dirac / (1 + |z| + |u|)
};

/// Common face of the two time-stepping methods for the scenario driver.
/// States are exchanged in full post-removal coordinates so that switching
/// and reporting are method-agnostic.
class StepperBase {
  public:
    virtual ~StepperBase() = default;
    virtual void advance() = 0;  // one step of h; throws solve_error on failure
    virtual double time() const = 0;
    virtual double h() const = 0;
    virtual FullElecState full_state() const = 0;
    virtual void reset_state(const FullElecState& st, double t) = 0;
    virtual Diagnostics diagnostics() const = 0;
    virtual const StageSystem& stage() const = 0;
    const StepperStats& stats() const { return stats_; }

  protected:
    StepperStats stats_;
};

/// Structure-preserving stepper: implicit RK on the reduced port-Hamiltonian
/// system with warm-started Newton stage solves and per-step Dirac residual
/// bookkeeping.
class SpStepper : public StepperBase {
  public:
    SpStepper(const ReducedSystem& red, RKTableau tb, double h, NewtonSettings ns = {})
        : red_(red), ph_(red), tb_(std::move(tb)), ns_(ns), h_(h), d_(red.dim()) {
        tb_.validate();
    }

    void init(const FullElecState& st, double t) { reset_state(st, t); }

    void advance() override {
        StepResult r = rk_step(ph_, x_, h_, tb_, ns_, warm_.empty() ? nullptr : &warm_);
        if (!r.converged)
            throw solve_error("Newton stage solve failed at t=" + std::to_string(time()) +
                              " (residual " + std::to_string(r.residual) + ")");
        const double dres = dirac_residual(ph_, x_, h_, tb_, r.stages);
        stats_.steps++;
        stats_.newton_total += r.iterations;
        stats_.newton_max = std::max(stats_.newton_max, r.iterations);
        stats_.dirac_max = std::max(stats_.dirac_max, dres);
        stats_.dirac_ratio_max = std::max(stats_.dirac_ratio_max, dres / (1.0 + r.zu_norm));
        x_ = r.x_next;
        warm_ = std::move(r.stages);
    }

    double time() const override { return x_[x_.size() - 1]; }
    double h() const override { return h_; }

    FullElecState full_state() const override {
        FullElecState st;
        const double th5 = x_[2 * d_ + 10];
        const auto p = x_.head(d_);
        const auto q = x_.segment(d_, d_);
        st.dtheta = x_.segment(2 * d_, 6);
        st.theta = x_.segment(2 * d_ + 6, 6);
        st.psi = red_.lift_flux(th5, q);
        st.dpsi = red_.lift_voltage(th5, st.dtheta[4], q, p);
        return st;
    }

    void reset_state(const FullElecState& st, double t) override {
        x_.resize(2 * d_ + 13);
        x_.head(d_) = red_.restrict(st.dpsi);
        x_.segment(d_, d_) = red_.restrict(st.psi);
        x_.segment(2 * d_, 6) = st.dtheta;
        x_.segment(2 * d_ + 6, 6) = st.theta;
        x_[2 * d_ + 12] = t;
        warm_.clear();
    }

    Diagnostics diagnostics() const override {
        Diagnostics g;
        const auto q = x_.segment(d_, d_);
        const double th5 = x_[2 * d_ + 10];
        g.delta_omega = x_[2 * d_ + 4] - red_.sys.omega_s;
        g.torque_em = 0.5 * q.dot(red_.ntilde.deriv(th5) * q);
        g.v1_alpha = x_[node1_alpha_];
        g.v1_beta = x_[node1_beta_];
        g.theta5 = th5;
        return g;
    }

    const StageSystem& stage() const override { return red_.sys; }
    const Vec& state() const { return x_; }
    const ReducedSystem& reduced() const { return red_; }
    const PhSystem& ph() const { return ph_; }

  private:
    ReducedSystem red_;
    PhSystem ph_;
    RKTableau tb_;
    NewtonSettings ns_;
    double h_;
    int d_;
    Vec x_;
    std::vector<Vec> warm_;
    int node1_alpha_ = 0, node1_beta_ = 1;  // node 1 is always in lambda2, first pair
};

/// Predictor-corrector stepper on the unreduced system.
class PcStepper : public StepperBase {
  public:
    PcStepper(const StageSystem& sys, double beta, double h)
        : pc_(sys, beta, h), h_(h), d_(sys.dim()) {}

    void advance() override {
        pc_.step(x_e_, x_m_, t_);
        t_ += h_;
        stats_.steps++;
    }

    double time() const override { return t_; }
    double h() const override { return h_; }

    FullElecState full_state() const override {
        FullElecState st;
        st.dpsi = x_e_.head(d_);
        st.psi = x_e_.tail(d_);
        st.dtheta = x_m_.head(6);
        st.theta = x_m_.tail(6);
        return st;
    }

    void reset_state(const FullElecState& st, double t) override {
        x_e_.resize(2 * d_);
        x_e_.head(d_) = st.dpsi;
        x_e_.tail(d_) = st.psi;
        x_m_.resize(12);
        x_m_.head(6) = st.dtheta;
        x_m_.tail(6) = st.theta;
        t_ = t;
    }

    Diagnostics diagnostics() const override {
        Diagnostics g;
        const auto psi = x_e_.tail(d_);
        const double th5 = x_m_[10];
        g.delta_omega = x_m_[4] - pc_.stage().omega_s;
        g.torque_em = 0.5 * psi.dot(pc_.stage().d_gamma(th5) * psi);
        g.v1_alpha = x_e_[0];
        g.v1_beta = x_e_[1];
        g.theta5 = th5;
        return g;
    }

    const StageSystem& stage() const override { return pc_.stage(); }

  private:
    PcSystem pc_;
    double h_;
    int d_;
    Vec x_e_, x_m_;
    double t_ = 0;
};

/// Keeps the power angle theta5 - arg(v1_alpha + i v1_beta) + pi/2 continuous
/// across samples by unwinding 2 pi jumps. Also records the largest jump seen
/// (should stay well under pi/2 at the default step).
class PowerAngleTracker {
  public:
    double update(double th5, double va, double vb) {
        double raw = th5 - std::atan2(vb, va) + kPi / 2;
        if (has_prev_) {
            raw += 2.0 * kPi * std::round((prev_ - raw) / (2.0 * kPi));
            max_jump_ = std::max(max_jump_, std::abs(raw - prev_));
        } else {
            raw = std::remainder(raw, 2.0 * kPi);
            has_prev_ = true;
        }
        prev_ = raw;
        return raw;
    }
    double max_jump() const { return max_jump_; }

  private:
    bool has_prev_ = false;
    double prev_ = 0;
    double max_jump_ = 0;
};

struct TrajectoryRow {
    double t = 0;
    int stage = 0;
    double delta_omega = 0;
    double torque_em = 0;
    double power_angle_deg = 0;
    Vec psi;     // original electrical labels (2n+4), zeros where removed
    Vec theta;   // 6
};

/// Expand a post-removal state into original electrical labels.
inline Vec scatter_to_original(const StageSystem& s, const Vec& kept_values) {
    Vec full = Vec::Zero(2 * s.n_nodes + 4);
    for (int i = 0; i < s.dim(); ++i) full[s.kept[i]] = kept_values[i];
    return full;
}

struct IntegrateResult {
    std::vector<TrajectoryRow> rows;
    bool completed = true;
    std::string failure;
};

/// Fixed-step loop emitting decimated observer rows. Step failures abort
/// with the rows collected so far and the failure message.
inline IntegrateResult integrate(StepperBase& st, int stage_tag, double t_end, int decimation,
                                 PowerAngleTracker& tracker,
                                 const std::function<void(const TrajectoryRow&)>& on_row = {},
                                 const std::function<bool(const StepperBase&, double)>& per_step = {}) {
    if (decimation < 1) throw config_error("decimation must be >= 1");
    IntegrateResult out;
    const double h = st.h();
    const long nsteps = std::lround((t_end - st.time()) / h);
    for (long i = 0; i < nsteps; ++i) {
        try {
            st.advance();
        } catch (const solve_error& e) {
            out.completed = false;
            out.failure = e.what();
            log(LogLevel::warn, "step failure at t=", st.time(), " h=", h, ": ", e.what());
            return out;
        }
        // the power angle is tracked at full step resolution so unwrapping
        // and verdicts never miss a sample
        const Diagnostics g = st.diagnostics();
        const double pa = deg(tracker.update(g.theta5, g.v1_alpha, g.v1_beta));
        if (((i + 1) % decimation == 0) || (i + 1 == nsteps)) {
            const FullElecState fs = st.full_state();
            TrajectoryRow row;
            row.t = st.time();
            row.stage = stage_tag;
            row.delta_omega = g.delta_omega;
            row.torque_em = g.torque_em;
            row.power_angle_deg = pa;
            row.psi = scatter_to_original(st.stage(), fs.psi);
            row.theta = fs.theta;
            out.rows.push_back(row);
            if (on_row) on_row(out.rows.back());
        }
        if (per_step && !per_step(st, pa)) return out;  // verdict already decided
    }
    return out;
}

}  // namespace ftsim
