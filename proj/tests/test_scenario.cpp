#include <catch2/catch_amalgamated.hpp>

#include "ftsim/scenario.hpp"
#include "support/oracles.hpp"

using namespace ftsim;

namespace {
ScenarioSystems& systems() {
    static ScenarioSystems s = build_scenario_systems(first_benchmark());
    return s;
}

FullElecState state_at_fault() {
    // integrate the pre-fault stage briefly so the switch sees a live state
    const auto& sys = systems();
    FullElecState init = equilibrium_alpha_beta_state(XYSystem(sys.stage[0]), sys.eq_pre, 0.0);
    SpStepper sp(sys.red[0], RKTableau::implicit_midpoint(), 1e-4);
    sp.reset_state(init, 0.0);
    for (int i = 0; i < 100; ++i) sp.advance();
    return sp.full_state();
}
}  // namespace

TEST_CASE("switching from the pre-fault to the faulted stage") {
    const auto& sys = systems();
    const FullElecState at = state_at_fault();
    const double t1 = 0.01;
    SwitchRecord rec;
    const FullElecState next = switch_state(sys.stage[0], sys.stage[1], sys.red[1], at, t1, &rec);

    SECTION("mechanical state is copied exactly") {
        CHECK((next.theta - at.theta).cwiseAbs().maxCoeff() == 0.0);
        CHECK((next.dtheta - at.dtheta).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("dimensions drop by the removed pair") {
        CHECK(next.psi.size() == 8);
        CHECK(next.dpsi.size() == 8);
    }
    SECTION("retained fluxes are copied bit-exactly") {
        // node 1 pair and the four windings (prev positions 0,1,6..9 -> next 0,1,4..7)
        CHECK(next.psi[0] == at.psi[0]);
        CHECK(next.psi[1] == at.psi[1]);
        for (int i = 0; i < 4; ++i) CHECK(next.psi[4 + i] == at.psi[6 + i]);
        CHECK(rec.flux_continuity_max_abs == 0.0);
    }
    SECTION("post-switch algebraic rows are consistent") {
        const Mat n = sys.stage[1].n_of(next.theta[4]);
        double res = 0;
        for (int k : sys.stage[1].local1) res = std::max(res, std::abs(n.row(k).dot(next.psi)));
        CHECK(res <= 1e-9 * next.psi.cwiseAbs().maxCoeff());
        CHECK(rec.algebraic_residual_rel <= 1e-9);
    }
    SECTION("retained voltages satisfy their row balance") {
        const Mat n = sys.stage[1].n_of(next.theta[4]);
        const Vec f = sys.stage[1].forcing(t1);
        for (int k : sys.stage[1].local2) {
            const double expect = (f[k] - n.row(k).dot(next.psi)) / sys.stage[1].kr[k];
            CHECK(next.dpsi[k] == Catch::Approx(expect).margin(1e-12 * (1 + std::abs(expect))));
        }
    }
}

TEST_CASE("switching into a stage that needs an absent component fails") {
    const Model m = first_benchmark();
    NetworkTopology shorted = m.network;
    shorted.r_ground[1] = 0.0;  // node 2 removed
    NetworkTopology grounded = m.network;
    grounded.r_ground[1] = 0.1;  // node 2 in lambda2
    const StageSystem prev = build_stage(m.generator, shorted);
    const StageSystem next = build_stage(m.generator, grounded);
    const ReducedSystem next_red = reduce(next);
    FullElecState at;
    at.psi = Vec::Zero(prev.dim());
    at.dpsi = Vec::Zero(prev.dim());
    at.theta = Vec::Zero(6);
    at.dtheta = Vec::Zero(6);
    CHECK_THROWS_AS(switch_state(prev, next, next_red, at, 0.0, nullptr), config_error);
}

TEST_CASE("electromagnetic torque is lift-invariant") {
    for (const auto& red : systems().red) {
        for (int i = 0; i < 5; ++i) {
            const double th = testing::uniform(-kPi, kPi);
            const Vec q = testing::random_vec(red.dim(), 20.0);
            const Vec psi = red.lift_flux(th, q);
            const double te_red = 0.5 * q.dot(red.ntilde.deriv(th) * q);
            const double te_full = 0.5 * psi.dot(red.sys.d_gamma(th) * psi);
            CHECK(te_red == Catch::Approx(te_full).epsilon(1e-9));
        }
    }
}

TEST_CASE("three-stage run with a short fault") {
    const auto& sys = systems();
    ScenarioConfig sc;
    sc.t_fault = 0.05;
    sc.t_break = 0.1;
    sc.t_horizon = 1.0;
    sc.method = Method::sp_midpoint;
    sc.h = 1e-4;
    const RunResult r = run_three_stage(sys, sc, 10, true);
    REQUIRE(r.completed);
    CHECK(r.n_switches == 2);
    CHECK(r.switches[0].t == Catch::Approx(0.05));
    CHECK(r.switches[0].from == 1);
    CHECK(r.switches[1].to == 3);
    for (int i = 0; i < 2; ++i) {
        CHECK(r.switches[i].flux_continuity_max_abs == 0.0);
        CHECK(r.switches[i].algebraic_residual_rel <= 1e-9);
    }
    CHECK(r.verdict != Verdict::unstable);  // short fault, short horizon: not slipping
    CHECK(r.max_pa_jump_deg < 90.0);
    CHECK(r.rows.front().stage == 1);
    CHECK(r.rows.back().stage == 3);
    CHECK(r.rows.back().t == Catch::Approx(1.0));

    SECTION("trajectory verdict agrees with the run accumulator on slips") {
        StabilityCriteria crit;
        crit.angle_target_deg = r.angle_target_deg;
        const auto [v, why] = stability_verdict(r.rows, crit, sc.t_horizon);
        CHECK(v != Verdict::unstable);
    }
}

TEST_CASE("degenerate zero break time skips the faulted stage") {
    const auto& sys = systems();
    ScenarioConfig sc;
    sc.t_fault = 0.05;
    sc.t_break = 0.0;
    sc.t_horizon = 1.5;
    sc.method = Method::sp_midpoint;
    sc.h = 1e-4;
    const RunResult r = run_three_stage(sys, sc, 100, true);
    REQUIRE(r.completed);
    CHECK(r.n_switches == 2);
    CHECK(r.switches[1].t == r.switches[0].t);
    CHECK(r.verdict != Verdict::unstable);
    CHECK(r.max_abs_domega < 5.0);  // stays near the equilibrium family
    for (const auto& row : r.rows) CHECK(row.stage != 2);
}

TEST_CASE("stability verdict on synthetic trajectories") {
    StabilityCriteria crit;
    crit.angle_target_deg = 47.421;
    const double horizon = 10.0;

    auto make_rows = [](const std::function<double(double)>& pa,
                        const std::function<double(double)>& dw) {
        std::vector<TrajectoryRow> rows;
        for (double t = 0.7; t <= 10.0; t += 0.01) {
            TrajectoryRow r;
            r.t = t;
            r.stage = 3;
            r.power_angle_deg = pa(t);
            r.delta_omega = dw(t);
            rows.push_back(r);
        }
        return rows;
    };

    SECTION("constant trajectory at the target is stable") {
        const auto rows = make_rows([](double) { return 47.421; }, [](double) { return 0.0; });
        CHECK(stability_verdict(rows, crit, horizon).first == Verdict::stable);
    }
    SECTION("monotone growth through the slip limit is unstable") {
        const auto rows = make_rows([](double t) { return 47.421 + 40.0 * t; }, [](double) { return 0.0; });
        CHECK(stability_verdict(rows, crit, horizon).first == Verdict::unstable);
    }
    SECTION("speed runaway is unstable") {
        const auto rows = make_rows([](double) { return 47.421; }, [](double t) { return 8.0 * t; });
        CHECK(stability_verdict(rows, crit, horizon).first == Verdict::unstable);
    }
    SECTION("bounded but unsettled ringing is inconclusive") {
        const auto rows = make_rows([](double t) { return 47.421 + 30.0 * std::sin(t); },
                                    [](double t) { return 3.0 * std::sin(2 * t); });
        CHECK(stability_verdict(rows, crit, horizon).first == Verdict::inconclusive);
    }
}

TEST_CASE("cct bracketing rejects a stable-stable bracket") {
    const auto& sys = systems();
    ScenarioConfig sc;
    sc.t_fault = 0.05;
    sc.t_break = 0.01;
    sc.t_horizon = 0.05 + 0.01 + 4.0;  // 4 s of the clearing stage per probe
    sc.method = Method::sp_midpoint;
    sc.h = 2e-4;
    sc.stability.angle_window = 2.0;
    sc.stability.angle_tol_deg = 10.0;
    sc.stability.omega_tol = 2.0;
    CHECK_THROWS_AS(find_cct(sys, sc, 0.005, 0.02, 0.01), solve_error);
}
