#pragma once

#include <future>
#include <memory>

#include "ftsim/integrate.hpp"

namespace ftsim {

enum class Method { sp_euler, sp_midpoint, pc_beta1, pc_beta05 };

inline Method parse_method(const std::string& s) {
    if (s == "sp-euler") return Method::sp_euler;
    if (s == "sp-midpoint") return Method::sp_midpoint;
    if (s == "pc-beta1") return Method::pc_beta1;
    if (s == "pc-beta0.5") return Method::pc_beta05;
    throw config_error("unknown method: " + s +
                       " (expected sp-euler, sp-midpoint, pc-beta1 or pc-beta0.5)");
}

inline std::string method_name(Method m) {
    switch (m) {
        case Method::sp_euler: return "sp-euler";
        case Method::sp_midpoint: return "sp-midpoint";
        case Method::pc_beta1: return "pc-beta1";
        case Method::pc_beta05: return "pc-beta0.5";
    }
    return "?";
}

/// Thresholds that turn the visual "did it settle" judgement into a Boolean.
/// angle_target_deg defaults to the post-fault equilibrium power angle.
struct StabilityCriteria {
    double omega_tol = 0.5;                 // rad/s, mean |delta omega| over the window
    double angle_target_deg = std::numeric_limits<double>::quiet_NaN();
    double angle_window = 5.0;              // s, averaging window at the horizon end
    double angle_tol_deg = 5.0;             // mean power angle must be this close
    double pole_slip_limit_deg = 180.0;     // |PA - target| beyond this is a slip
    double omega_slip_limit = 50.0;         // rad/s, hard instability threshold
};

struct ScenarioConfig {
    double t_fault = 0.1;    // length of the pre-fault stage
    double t_break = 0.5;    // fault duration t_b
    double t_horizon = std::numeric_limits<double>::quiet_NaN();  // absolute end time
    Method method = Method::sp_midpoint;
    double h = 1e-4;
    StabilityCriteria stability;
    NewtonSettings newton;

    double horizon_or_default() const {
        return std::isnan(t_horizon) ? t_fault + t_break + 60.0 : t_horizon;
    }
    void validate() const {
        if (!(t_fault > 0)) throw config_error("t_fault must be positive");
        if (t_break < 0) throw config_error("t_break must be non-negative");
        if (!(h > 0)) throw config_error("h must be positive");
        if (!(horizon_or_default() > t_fault + t_break))
            throw config_error("t_horizon must exceed t_fault + t_break");
    }
};

/// Everything derived from a model that the scenario needs: the three stage
/// systems with their reductions, and both end-point equilibria. Immutable
/// after construction; probes may share it across threads.
struct ScenarioSystems {
    std::array<StageSystem, 3> stage;
    std::array<ReducedSystem, 3> red;
    EquilibriumPoint eq_pre;    // stage I operating point
    EquilibriumPoint eq_post;   // stage III target
    double omega_s = 0;
};

inline ScenarioSystems build_scenario_systems(const Model& model) {
    ScenarioSystems s;
    const auto topos = stage_topologies(model.network, model.fault);
    for (int i = 0; i < 3; ++i) {
        s.stage[i] = build_stage(model.generator, topos[i]);
        s.red[i] = reduce(s.stage[i]);
    }
    s.omega_s = model.network.omega_s;
    s.eq_pre = solve_equilibrium(XYSystem(s.stage[0]));
    s.eq_post = solve_equilibrium(XYSystem(s.stage[2]));
    return s;
}

struct SwitchRecord {
    double t = 0;
    int from = 0, to = 0;
    double flux_continuity_max_abs = 0;  // |Psi_lambda2 after - before|, exact copy -> 0
    double algebraic_residual_rel = 0;   // |N_lambda1 Psi| / |Psi| after the switch
};

/// Map the end state of one stage to the initial state of the next:
/// mechanical state copied, shorted entries dropped, lambda2 fluxes copied,
/// lambda1 fluxes from the elimination gain, voltages from the row balances
/// and the product-rule lift.
inline FullElecState switch_state(const StageSystem& prev, const StageSystem& next,
                                  const ReducedSystem& next_red, const FullElecState& at,
                                  double t, SwitchRecord* rec = nullptr) {
    FullElecState out;
    out.theta = at.theta;
    out.dtheta = at.dtheta;
    const double th5 = at.theta[4];

    std::vector<int> prev_pos(2 * prev.n_nodes + 4, -1);
    for (int i = 0; i < prev.dim(); ++i) prev_pos[prev.kept[i]] = i;

    const int d = next.dim();
    out.psi = Vec::Zero(d);
    out.dpsi = Vec::Zero(d);
    for (int j : next.local2) {
        const int p = prev_pos[next.kept[j]];
        if (p < 0) throw config_error("stage switch: no source component for kept index");
        out.psi[j] = at.psi[p];
    }
    Mat a0, da0;
    if (!next.local1.empty()) {
        a0 = next_red.a0.eval(th5);
        da0 = next_red.a0.deriv(th5);
        Vec q(next.local2.size());
        for (size_t i = 0; i < next.local2.size(); ++i) q[i] = out.psi[next.local2[i]];
        const Vec top = a0 * q;
        for (size_t i = 0; i < next.local1.size(); ++i) out.psi[next.local1[i]] = top[i];
    }
    const Mat n = next.n_of(th5);
    const Vec f = next.forcing(t);
    for (int j : next.local2)
        out.dpsi[j] = (f[j] - n.row(j).dot(out.psi)) / next.kr[j];
    if (!next.local1.empty()) {
        Vec q(next.local2.size()), dq(next.local2.size());
        for (size_t i = 0; i < next.local2.size(); ++i) {
            q[i] = out.psi[next.local2[i]];
            dq[i] = out.dpsi[next.local2[i]];
        }
        const Vec top = a0 * dq + at.dtheta[4] * (da0 * q);
        for (size_t i = 0; i < next.local1.size(); ++i) out.dpsi[next.local1[i]] = top[i];
    }
    if (rec) {
        rec->t = t;
        double cont = 0;
        for (int j : next.local2)
            cont = std::max(cont, std::abs(out.psi[j] - at.psi[prev_pos[next.kept[j]]]));
        rec->flux_continuity_max_abs = cont;
        double res = 0;
        for (int j : next.local1) res = std::max(res, std::abs(n.row(j).dot(out.psi)));
        rec->algebraic_residual_rel = res / std::max(1e-300, out.psi.cwiseAbs().maxCoeff());
    }
    return out;
}

enum class Verdict { stable, unstable, inconclusive };

inline std::string verdict_name(Verdict v) {
    switch (v) {
        case Verdict::stable: return "stable";
        case Verdict::unstable: return "unstable";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

struct RunResult {
    std::vector<TrajectoryRow> rows;
    Verdict verdict = Verdict::inconclusive;
    std::string verdict_reason;
    std::array<SwitchRecord, 2> switches{};
    int n_switches = 0;
    StepperStats stats;
    bool completed = false;
    std::string failure;
    double t_end = 0;
    double angle_target_deg = 0;
    double window_t0 = 0, window_t1 = 0;
    double window_mean_abs_domega = std::numeric_limits<double>::quiet_NaN();
    double window_mean_power_angle_deg = std::numeric_limits<double>::quiet_NaN();
    double max_power_angle_dev_deg = 0;   // after stage III begins
    double max_abs_domega = 0;            // after stage III begins
    double snapped_t_fault = 0, snapped_t_clear = 0;
    double max_pa_jump_deg = 0;
};

inline std::unique_ptr<StepperBase> make_stepper(const ScenarioSystems& sys, int stage_idx,
                                                 const ScenarioConfig& sc) {
    switch (sc.method) {
        case Method::sp_euler:
            return std::make_unique<SpStepper>(sys.red[stage_idx], RKTableau::implicit_euler(), sc.h, sc.newton);
        case Method::sp_midpoint:
            return std::make_unique<SpStepper>(sys.red[stage_idx], RKTableau::implicit_midpoint(), sc.h, sc.newton);
        case Method::pc_beta1:
            return std::make_unique<PcStepper>(sys.stage[stage_idx], 1.0, sc.h);
        case Method::pc_beta05:
            return std::make_unique<PcStepper>(sys.stage[stage_idx], 0.5, sc.h);
    }
    throw config_error("bad method");
}

/// Run the full three-stage transient: equilibrium start, fault at t_fault,
/// clearing after t_break, then the post-fault stage to the horizon, with a
/// stability verdict against the post-fault equilibrium.
inline RunResult run_three_stage(const ScenarioSystems& sys, const ScenarioConfig& sc,
                                 int decimation = 100, bool early_abort = true) {
    sc.validate();
    RunResult out;
    const double h = sc.h;
    const double t1 = std::llround(sc.t_fault / h) * h;
    const double t2 = std::llround((sc.t_fault + sc.t_break) / h) * h;
    const double t3 = std::llround(sc.horizon_or_default() / h) * h;
    out.snapped_t_fault = t1;
    out.snapped_t_clear = t2;

    StabilityCriteria crit = sc.stability;
    if (std::isnan(crit.angle_target_deg)) crit.angle_target_deg = sys.eq_post.power_angle_deg;
    out.angle_target_deg = crit.angle_target_deg;
    out.window_t1 = t3;
    out.window_t0 = t3 - crit.angle_window;

    // verdict accumulators, fed at full step resolution
    bool slipped = false;
    std::string slip_reason;
    double win_sum_dw = 0, win_sum_pa = 0;
    long win_count = 0;
    bool in_stage3 = false;
    auto per_step = [&](const StepperBase& st, double pa_deg) -> bool {
        if (in_stage3) {
            const double dev = std::abs(pa_deg - crit.angle_target_deg);
            const double adw = std::abs(st.diagnostics().delta_omega);
            out.max_power_angle_dev_deg = std::max(out.max_power_angle_dev_deg, dev);
            out.max_abs_domega = std::max(out.max_abs_domega, adw);
            if (dev > crit.pole_slip_limit_deg) {
                slipped = true;
                slip_reason = "pole slip: |power angle - target| = " + std::to_string(dev) + " deg";
            } else if (adw > crit.omega_slip_limit) {
                slipped = true;
                slip_reason = "speed deviation " + std::to_string(adw) + " rad/s";
            }
            if (st.time() >= out.window_t0 - 1e-12) {
                win_sum_dw += adw;
                win_sum_pa += pa_deg;
                ++win_count;
            }
        }
        return !(slipped && early_abort);
    };

    PowerAngleTracker tracker;
    auto run_stage = [&](StepperBase& st, int tag, double t_end) {
        IntegrateResult r = integrate(st, tag, t_end, decimation, tracker, {}, per_step);
        auto acc = st.stats();
        out.stats.steps += acc.steps;
        out.stats.newton_total += acc.newton_total;
        out.stats.newton_max = std::max(out.stats.newton_max, acc.newton_max);
        out.stats.dirac_max = std::max(out.stats.dirac_max, acc.dirac_max);
        out.stats.dirac_ratio_max = std::max(out.stats.dirac_ratio_max, acc.dirac_ratio_max);
        for (const auto& row : r.rows) out.rows.push_back(row);
        out.t_end = st.time();
        out.max_pa_jump_deg = std::max(out.max_pa_jump_deg, deg(tracker.max_jump()));
        if (!r.completed) {
            out.completed = false;
            out.failure = r.failure;
            return false;
        }
        return true;
    };

    // stage I from the pre-fault equilibrium
    out.completed = true;
    FullElecState state = equilibrium_alpha_beta_state(XYSystem(sys.stage[0]), sys.eq_pre, 0.0);
    auto st1 = make_stepper(sys, 0, sc);
    st1->reset_state(state, 0.0);
    {
        // initial row
        const Diagnostics g = st1->diagnostics();
        TrajectoryRow row;
        row.t = 0;
        row.stage = 1;
        row.delta_omega = g.delta_omega;
        row.torque_em = g.torque_em;
        row.power_angle_deg = deg(tracker.update(g.theta5, g.v1_alpha, g.v1_beta));
        row.psi = scatter_to_original(sys.stage[0], st1->full_state().psi);
        row.theta = st1->full_state().theta;
        out.rows.push_back(row);
    }
    bool ok = run_stage(*st1, 1, t1);

    if (ok && !slipped && t2 > t1) {
        state = switch_state(sys.stage[0], sys.stage[1], sys.red[1], st1->full_state(), t1,
                             &out.switches[out.n_switches]);
        out.switches[out.n_switches].from = 1;
        out.switches[out.n_switches].to = 2;
        ++out.n_switches;
        auto st2 = make_stepper(sys, 1, sc);
        st2->reset_state(state, t1);
        ok = run_stage(*st2, 2, t2);
        if (ok && !slipped) {
            state = switch_state(sys.stage[1], sys.stage[2], sys.red[2], st2->full_state(), t2,
                                 &out.switches[out.n_switches]);
        }
    } else if (ok && !slipped) {
        // degenerate t_break = 0: stage II is skipped, switch straight through
        SwitchRecord tmp;
        FullElecState mid = switch_state(sys.stage[0], sys.stage[1], sys.red[1], st1->full_state(), t1, &tmp);
        tmp.from = 1;
        tmp.to = 2;
        out.switches[out.n_switches++] = tmp;
        state = switch_state(sys.stage[1], sys.stage[2], sys.red[2], mid, t2,
                             &out.switches[out.n_switches]);
    }
    if (ok && !slipped) {
        out.switches[out.n_switches].from = 2;
        out.switches[out.n_switches].to = 3;
        ++out.n_switches;
        auto st3 = make_stepper(sys, 2, sc);
        st3->reset_state(state, t2);
        in_stage3 = true;
        ok = run_stage(*st3, 3, t3);
    }

    if (!out.completed) {
        out.verdict = Verdict::inconclusive;
        out.verdict_reason = "step failure: " + out.failure;
        return out;
    }
    if (slipped) {
        out.verdict = Verdict::unstable;
        out.verdict_reason = slip_reason;
        return out;
    }
    if (win_count > 0) {
        out.window_mean_abs_domega = win_sum_dw / win_count;
        out.window_mean_power_angle_deg = win_sum_pa / win_count;
        const bool omega_ok = out.window_mean_abs_domega <= crit.omega_tol;
        const bool angle_ok =
            std::abs(out.window_mean_power_angle_deg - crit.angle_target_deg) <= crit.angle_tol_deg;
        if (omega_ok && angle_ok) {
            out.verdict = Verdict::stable;
            out.verdict_reason = "end-window means within thresholds";
        } else {
            out.verdict = Verdict::inconclusive;
            out.verdict_reason = std::string("end-window means outside thresholds: mean|dw|=") +
                                 std::to_string(out.window_mean_abs_domega) + ", mean PA=" +
                                 std::to_string(out.window_mean_power_angle_deg);
        }
    } else {
        out.verdict = Verdict::inconclusive;
        out.verdict_reason = "no samples in the verdict window";
    }
    return out;
}

/// Operationalized stability judgement on a recorded trajectory: a pole slip
/// or speed runaway after the clearing stage begins is unstable; settled
/// end-window means are stable; anything else is inconclusive.
inline std::pair<Verdict, std::string> stability_verdict(const std::vector<TrajectoryRow>& rows,
                                                         const StabilityCriteria& crit,
                                                         double t_horizon) {
    if (std::isnan(crit.angle_target_deg))
        throw config_error("stability_verdict needs angle_target_deg");
    double win_dw = 0, win_pa = 0;
    long n = 0;
    const double w0 = t_horizon - crit.angle_window;
    for (const auto& r : rows) {
        if (r.stage < 3) continue;
        const double dev = std::abs(r.power_angle_deg - crit.angle_target_deg);
        if (dev > crit.pole_slip_limit_deg)
            return {Verdict::unstable, "pole slip: power angle " + std::to_string(dev) +
                                           " deg from target"};
        if (std::abs(r.delta_omega) > crit.omega_slip_limit)
            return {Verdict::unstable, "speed deviation " + std::to_string(r.delta_omega) + " rad/s"};
        if (r.t >= w0 - 1e-12) {
            win_dw += std::abs(r.delta_omega);
            win_pa += r.power_angle_deg;
            ++n;
        }
    }
    if (n == 0) return {Verdict::inconclusive, "no samples in the verdict window"};
    const double mean_dw = win_dw / n;
    const double mean_pa = win_pa / n;
    if (mean_dw <= crit.omega_tol && std::abs(mean_pa - crit.angle_target_deg) <= crit.angle_tol_deg)
        return {Verdict::stable, "end-window means within thresholds"};
    return {Verdict::inconclusive, "end-window means outside thresholds"};
}

struct CctProbe {
    double t_break = 0;
    Verdict verdict = Verdict::inconclusive;
    std::string reason;
};

struct CctResult {
    double t_stable = 0;     // last break time judged stable
    double t_unstable = 0;   // first break time judged unstable
    std::vector<CctProbe> probes;
};

/// Bisect the break time between a stable and an unstable bracket endpoint.
/// The stage III duration of the base scenario is preserved for every probe.
/// An inconclusive probe is retried once with a doubled horizon.
inline CctResult find_cct(const ScenarioSystems& sys, const ScenarioConfig& base,
                          double t_lo, double t_hi, double tol, int jobs = 1) {
    if (!(t_lo < t_hi)) throw config_error("cct bracket: need t_lo < t_hi");
    if (!(tol > 0)) throw config_error("cct tolerance must be positive");
    const double stage3_span = base.horizon_or_default() - base.t_fault - base.t_break;
    CctResult out;

    auto probe = [&](double tb) -> CctProbe {
        ScenarioConfig sc = base;
        sc.t_break = tb;
        sc.t_horizon = sc.t_fault + tb + stage3_span;
        RunResult r = run_three_stage(sys, sc, /*decimation=*/1000, /*early_abort=*/true);
        if (r.verdict == Verdict::inconclusive && r.completed) {
            log(LogLevel::info, "cct probe t_b=", tb, " inconclusive, widening horizon once");
            sc.t_horizon = sc.t_fault + tb + 2.0 * stage3_span;
            r = run_three_stage(sys, sc, 1000, true);
        }
        CctProbe p;
        p.t_break = tb;
        p.verdict = r.verdict;
        p.reason = r.verdict_reason;
        log(LogLevel::info, "cct probe t_b=", tb, " -> ", verdict_name(p.verdict));
        return p;
    };

    CctProbe plo, phi;
    if (jobs > 1) {
        auto flo = std::async(std::launch::async, probe, t_lo);
        auto fhi = std::async(std::launch::async, probe, t_hi);
        plo = flo.get();
        phi = fhi.get();
    } else {
        plo = probe(t_lo);
        phi = probe(t_hi);
    }
    out.probes.push_back(plo);
    out.probes.push_back(phi);
    if (plo.verdict != Verdict::stable || phi.verdict != Verdict::unstable)
        throw solve_error("cct bracket endpoints do not bracket: t_lo is " +
                          verdict_name(plo.verdict) + ", t_hi is " + verdict_name(phi.verdict));

    double lo = t_lo, hi = t_hi;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        CctProbe p = probe(mid);
        out.probes.push_back(p);
        if (p.verdict == Verdict::inconclusive)
            throw solve_error("cct probe inconclusive at t_b=" + std::to_string(mid) +
                              " even with widened horizon: " + p.reason);
        if (p.verdict == Verdict::stable) lo = mid;
        else hi = mid;
    }
    out.t_stable = lo;
    out.t_unstable = hi;

    // physical monotonicity is assumed by bisection, not enforced; warn on violations
    for (const auto& a : out.probes)
        for (const auto& b : out.probes)
            if (a.verdict == Verdict::unstable && b.verdict == Verdict::stable &&
                a.t_break < b.t_break)
                log(LogLevel::warn, "cct: non-monotone verdicts (unstable at ", a.t_break,
                    " but stable at ", b.t_break, ")");
    return out;
}

}  // namespace ftsim
