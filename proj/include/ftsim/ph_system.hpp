#pragma once

#include <vector>

#include "ftsim/reduction.hpp"

namespace ftsim {

/// Butcher tableau. Only the two one-stage schemes below are shipped; the
/// type admits more stages.
struct RKTableau {
    int s = 1;
    Mat a;
    Vec b;
    std::string name;

    static RKTableau implicit_euler() {
        RKTableau t;
        t.s = 1;
        t.a = Mat::Constant(1, 1, 1.0);
        t.b = Vec::Constant(1, 1.0);
        t.name = "implicit-euler";
        return t;
    }
    static RKTableau implicit_midpoint() {
        RKTableau t;
        t.s = 1;
        t.a = Mat::Constant(1, 1, 0.5);
        t.b = Vec::Constant(1, 1.0);
        t.name = "implicit-midpoint";
        return t;
    }
    void validate() const {
        if (s < 1 || a.rows() != s || a.cols() != s || b.size() != s)
            throw config_error("malformed Runge-Kutta tableau");
        if (std::abs(b.sum() - 1.0) > 1e-14) throw config_error("tableau weights must sum to 1");
    }
};

struct NewtonSettings {
    double tol_rel = 1e-10;
    double tol_abs = 1e-12;
    int max_iter = 25;
    enum class Jacobian { analytic, finite_difference } jacobian_mode = Jacobian::analytic;
};

/// Port-Hamiltonian descriptor form of a reduced stage:
///   M x' = (P - Q) z(x) + (F - V) u(x),   y = (F + V)' z + (S - W) u
/// with V = S = W = 0, state x = (qdot~, q~, w, theta, t), effort
/// z = (qdot~, Ntilde q~, w, K theta + 1/2 q~' dNtilde q~ e5, 0) and port
/// u = (f~(t), 0, T, 0, 1).
class PhSystem {
  public:
    explicit PhSystem(const ReducedSystem& red)
        : red_(red), d_(red.dim()), m_(2 * d_ + 13) {
        m_diag_ = Vec::Ones(m_);
        m_diag_.head(d_).setZero();
        m_diag_.segment(2 * d_, 6) = red.sys.inertia;
        ab_ = a_big() - b_big();
    }

    int size() const { return m_; }
    int elec_dim() const { return d_; }
    const Vec& mass_diag() const { return m_diag_; }
    const ReducedSystem& reduced() const { return red_; }

    // state accessors
    double theta5(const Vec& x) const { return x[2 * d_ + 10]; }
    double time_of(const Vec& x) const { return x[m_ - 1]; }

    Vec z(const Vec& x) const {
        const auto p = x.head(d_);
        const auto q = x.segment(d_, d_);
        const auto w = x.segment(2 * d_, 6);
        const auto th = x.segment(2 * d_ + 6, 6);
        const double th5 = th[4];
        Vec out(m_);
        out.head(d_) = p;
        out.segment(d_, d_) = red_.ntilde.eval(th5) * q;
        out.segment(2 * d_, 6) = w;
        Vec zt = red_.sys.stiffness * th;
        zt[4] += 0.5 * q.dot(red_.ntilde.deriv(th5) * q);
        out.segment(2 * d_ + 6, 6) = zt;
        out[m_ - 1] = 0.0;
        return out;
    }

    Vec u(const Vec& x) const {
        Vec out = Vec::Zero(m_);
        out.head(d_) = red_.forcing(time_of(x));
        out.segment(2 * d_, 6) = red_.sys.torque;
        out[m_ - 1] = 1.0;
        return out;
    }

    Vec y(const Vec& x) const {
        Vec out = Vec::Zero(m_);
        out.head(d_) = x.head(d_);
        out.segment(2 * d_, 6) = x.segment(2 * d_, 6);
        return out;
    }

    /// (P - Q) z(x) + F u(x), assembled blockwise.
    void eval_rhs(const Vec& x, Vec& rhs, double& zu_norm) const {
        const auto p = x.head(d_);
        const auto q = x.segment(d_, d_);
        const auto w = x.segment(2 * d_, 6);
        const auto th = x.segment(2 * d_ + 6, 6);
        const double th5 = th[4];
        const double t = time_of(x);
        const Vec ntq = red_.ntilde.eval(th5) * q;
        const Vec f = red_.forcing(t);
        Vec zt = red_.sys.stiffness * th;
        const double te = 0.5 * q.dot(red_.ntilde.deriv(th5) * q);
        zt[4] += te;
        rhs.resize(m_);
        rhs.head(d_) = -(red_.kr_red.array() * p.array()).matrix() - ntq + f;
        rhs.segment(d_, d_) = p;
        rhs.segment(2 * d_, 6) = -zt + red_.sys.torque;
        rhs.segment(2 * d_ + 6, 6) = w;
        rhs[m_ - 1] = 1.0;
        const double zn = std::max({p.cwiseAbs().maxCoeff(), ntq.cwiseAbs().maxCoeff(),
                                    w.cwiseAbs().maxCoeff(), zt.cwiseAbs().maxCoeff()});
        const double un = std::max({f.cwiseAbs().maxCoeff(), red_.sys.torque.cwiseAbs().maxCoeff(), 1.0});
        zu_norm = zn + un;
    }

    /// d rhs / dx, analytic. The torque row needs the second theta derivative
    /// of Ntilde, which the trig family provides for free.
    void eval_jacobian(const Vec& x, Mat& jac) const {
        const auto q = x.segment(d_, d_);
        const double th5 = theta5(x);
        const double t = time_of(x);
        const Mat nt = red_.ntilde.eval(th5);
        const Vec dntq = red_.ntilde.deriv(th5) * q;
        jac.setZero(m_, m_);
        jac.topLeftCorner(d_, d_).diagonal() = -red_.kr_red;
        jac.block(0, d_, d_, d_) = -nt;
        jac.block(0, 2 * d_ + 10, d_, 1) = -dntq;
        jac.block(0, m_ - 1, d_, 1) = red_.forcing_dot(t);
        jac.block(d_, 0, d_, d_).setIdentity();
        jac.block(2 * d_, 2 * d_ + 6, 6, 6) = -red_.sys.stiffness;
        jac.block(2 * d_ + 4, d_, 1, d_) -= dntq.transpose();
        jac(2 * d_ + 4, 2 * d_ + 10) -= 0.5 * q.dot(red_.ntilde.deriv2(th5) * q);
        jac.block(2 * d_ + 6, 2 * d_, 6, 6).setIdentity();
    }

    /// Skew block matrix A = [[P, F], [-F', W]] of the Dirac condition.
    Mat a_big() const {
        Mat p = Mat::Zero(m_, m_);
        p.block(0, d_, d_, d_) = -Mat::Identity(d_, d_);
        p.block(d_, 0, d_, d_) = Mat::Identity(d_, d_);
        p.block(2 * d_, 2 * d_ + 6, 6, 6) = -Mat::Identity(6, 6);
        p.block(2 * d_ + 6, 2 * d_, 6, 6) = Mat::Identity(6, 6);
        Mat f = f_mat();
        Mat a = Mat::Zero(2 * m_, 2 * m_);
        a.topLeftCorner(m_, m_) = p;
        a.topRightCorner(m_, m_) = f;
        a.bottomLeftCorner(m_, m_) = -f.transpose();
        return a;
    }

    /// Non-negative block matrix B = [[Q, V], [V', S]].
    Mat b_big() const {
        Mat b = Mat::Zero(2 * m_, 2 * m_);
        b.topLeftCorner(m_, m_).diagonal().head(d_) = red_.kr_red;
        return b;
    }

    Mat f_mat() const {
        Vec fd = Vec::Zero(m_);
        fd.head(d_).setOnes();
        fd.segment(2 * d_, 6).setOnes();
        fd[m_ - 1] = 1.0;
        return fd.asDiagonal();
    }

    const Mat& a_minus_b() const { return ab_; }

  private:
    ReducedSystem red_;
    int d_, m_;
    Vec m_diag_;
    Mat ab_;
};

struct StepResult {
    Vec x_next;
    std::vector<Vec> stages;   // converged k_i
    int iterations = 0;
    double residual = 0;       // final |G|_inf
    double zu_norm = 0;        // max over stages of |z|_inf + |u|_inf
    bool converged = false;
};

/// One step of the s-stage implicit Runge-Kutta scheme
///   M k_i = (P - Q) z(x_i) + (F - V) u(x_i),  x_i = x0 + h sum_j a_ij k_j,
///   x_next = x0 + h sum_j b_j k_j,
/// solved monolithically with Newton on the stacked stage vector. The caller
/// may pass previous stages as a warm start.
template <class System>
StepResult rk_step(const System& sys, const Vec& x0, double h, const RKTableau& tb,
                   const NewtonSettings& ns, const std::vector<Vec>* warm = nullptr) {
    tb.validate();
    if (!(h > 0)) throw solve_error("rk_step requires h > 0");
    const int m = sys.size();
    const int s = tb.s;
    const Vec& md = sys.mass_diag();

    Vec kk = Vec::Zero(s * m);
    if (warm && static_cast<int>(warm->size()) == s)
        for (int i = 0; i < s; ++i) kk.segment(i * m, m) = (*warm)[i];

    StepResult res;
    Vec g(s * m), rhs_i(m);
    Mat jac(s * m, s * m), jrhs(m, m);
    std::vector<Vec> xi(s, Vec(m));
    for (int it = 0; it <= ns.max_iter; ++it) {
        double zu_max = 0;
        for (int i = 0; i < s; ++i) {
            xi[i] = x0;
            for (int j = 0; j < s; ++j) xi[i] += h * tb.a(i, j) * kk.segment(j * m, m);
            double zu = 0;
            sys.eval_rhs(xi[i], rhs_i, zu);
            zu_max = std::max(zu_max, zu);
            g.segment(i * m, m) = (md.array() * kk.segment(i * m, m).array()).matrix() - rhs_i;
        }
        res.residual = g.cwiseAbs().maxCoeff();
        res.zu_norm = zu_max;
        res.iterations = it;
        if (res.residual <= ns.tol_abs + ns.tol_rel * (1.0 + zu_max)) {
            res.converged = true;
            break;
        }
        if (it == ns.max_iter || !std::isfinite(res.residual)) break;
        jac.setZero();
        for (int i = 0; i < s; ++i) {
            if (ns.jacobian_mode == NewtonSettings::Jacobian::analytic) {
                sys.eval_jacobian(xi[i], jrhs);
            } else {
                // finite-difference fallback, column by column
                Vec base(m), pert(m);
                double zu = 0;
                sys.eval_rhs(xi[i], base, zu);
                for (int c = 0; c < m; ++c) {
                    Vec xp = xi[i];
                    const double eps = 1e-7 * std::max(1.0, std::abs(xp[c]));
                    xp[c] += eps;
                    sys.eval_rhs(xp, pert, zu);
                    jrhs.col(c) = (pert - base) / eps;
                }
            }
            for (int j = 0; j < s; ++j)
                jac.block(i * m, j * m, m, m) -= (h * tb.a(i, j)) * jrhs;
            jac.block(i * m, i * m, m, m).diagonal() += md;
        }
        kk -= jac.partialPivLu().solve(g);
    }
    if (!res.converged) return res;

    res.x_next = x0;
    res.stages.resize(s);
    for (int i = 0; i < s; ++i) {
        res.stages[i] = kk.segment(i * m, m);
        res.x_next += h * tb.b[i] * res.stages[i];
    }
    return res;
}

/// Max over stages of the residual of the discrete Dirac membership
///   v_f,i + [[A, I],[-I, 0]] v_e,i = 0
/// with v_f,i = (-M k_i; y(x_i); z(x_i); u(x_i)) and
/// v_e,i = (z(x_i); u(x_i); -B (z;u)). The lower half vanishes identically;
/// the upper half is (-M k_i; y(x_i)) + (A - B)(z; u).
template <class System>
double dirac_residual(const System& sys, const Vec& x0, double h, const RKTableau& tb,
                      const std::vector<Vec>& stages) {
    const int m = sys.size();
    const Vec& md = sys.mass_diag();
    const Mat& ab = sys.a_minus_b();
    double worst = 0;
    for (int i = 0; i < tb.s; ++i) {
        Vec xi = x0;
        for (int j = 0; j < tb.s; ++j) xi += h * tb.a(i, j) * stages[j];
        Vec zu(2 * m);
        zu.head(m) = sys.z(xi);
        zu.tail(m) = sys.u(xi);
        Vec top(2 * m);
        top.head(m) = -(md.array() * stages[i].array()).matrix();
        top.tail(m) = sys.y(xi);
        top += ab * zu;
        worst = std::max(worst, top.cwiseAbs().maxCoeff());
    }
    return worst;
}

}  // namespace ftsim
