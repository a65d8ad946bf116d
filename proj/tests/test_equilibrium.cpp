#include <catch2/catch_amalgamated.hpp>

#include "ftsim/equilibrium.hpp"
#include "support/oracles.hpp"

using namespace ftsim;

namespace {

const Vec kPrintedPsiDot = (Vec(10) << 26015.4363, -6.3200, 26491.9549, 1157.5512, 26968.4734,
                            2321.4224, 0, 0, 0, 0).finished();
const Vec kPrintedPsi = (Vec(10) << -0.0168, -69.0081, 3.0705, -70.2721, 6.1578, -71.5361,
                         492.6430, 448.9184, -297.6778, -297.6778).finished();
const Vec kPrintedTheta = (Vec(6) << -0.7429, -0.7569, -0.7713, -0.7848, -0.7975, -0.7975).finished();

struct Fixture {
    Model model = first_benchmark();
    StageSystem pre, post;
    Fixture() {
        const auto topos = stage_topologies(model.network, model.fault);
        pre = build_stage(model.generator, topos[0]);
        post = build_stage(model.generator, topos[2]);
    }
};

Fixture& fx() {
    static Fixture f;
    return f;
}

}  // namespace

TEST_CASE("residual at zero state is (-f0; -T)") {
    const XYSystem xy(fx().pre);
    const Vec r = xy_residual(xy, Vec::Zero(10), Vec::Zero(6));
    CHECK((r.head(10) + xy.sys.forcing_xy()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((r.tail(6) + xy.sys.torque).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("shaft residual rows sum to the torque identity") {
    const XYSystem xy(fx().pre);
    for (int i = 0; i < 5; ++i) {
        const Vec phi = testing::random_vec(10, 50.0);
        const Vec delta = testing::random_vec(6, 1.0);
        const Vec r = xy_residual(xy, phi, delta);
        const double expect = 0.5 * phi.dot(xy.sys.d_gamma(delta[4]) * phi) - xy.sys.torque.sum();
        CHECK(r.tail(6).sum() == Catch::Approx(expect).margin(1e-6 * std::max(1.0, std::abs(expect))));
    }
}

TEST_CASE("pre-fault equilibrium reproduces the benchmark operating point") {
    const XYSystem xy(fx().pre);
    const EquilibriumPoint eq = solve_equilibrium(xy);
    const double scale = 1.0 + xy.sys.forcing_xy().cwiseAbs().maxCoeff();
    CHECK(eq.residual_norm <= 1e-8 * scale);

    const FullElecState ab = equilibrium_alpha_beta_state(xy, eq, 0.0);
    CHECK((ab.psi - kPrintedPsi).cwiseAbs().maxCoeff() < 5e-3);
    CHECK((ab.dpsi - kPrintedPsiDot).cwiseAbs().maxCoeff() < 5e-3);
    CHECK((ab.theta - kPrintedTheta).cwiseAbs().maxCoeff() < 5e-3);
    for (int i = 0; i < 6; ++i) CHECK(ab.dtheta[i] == 120.0 * kPi);

    SECTION("self-consistency of the residual at the solution") {
        const Vec r = xy_residual(xy, eq.phi, eq.delta);
        CHECK(r.cwiseAbs().maxCoeff() <= 1e-8 * scale);
    }
    SECTION("torque balance at the point") {
        CHECK(eq.torque_em == Catch::Approx(fx().model.generator.T0).epsilon(1e-6));
    }
}

TEST_CASE("post-fault equilibrium hits the published power angle") {
    const XYSystem xy(fx().post);
    const EquilibriumPoint eq = solve_equilibrium(xy);
    CHECK(eq.power_angle_deg == Catch::Approx(47.421).margin(0.02));
    CHECK(eq.torque_em == Catch::Approx(fx().model.generator.T0).epsilon(1e-6));
}

TEST_CASE("the guess only pins the branch, not the answer") {
    const XYSystem xy(fx().pre);
    const EquilibriumPoint a = solve_equilibrium(xy, -0.8);
    const EquilibriumPoint b = solve_equilibrium(xy, -0.55);
    CHECK((a.phi - b.phi).cwiseAbs().maxCoeff() < 1e-7 * (1 + a.phi.cwiseAbs().maxCoeff()));
    CHECK((a.delta - b.delta).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("unreachable torque has no equilibrium") {
    Model m = first_benchmark();
    m.generator.T0 = 1e9;
    const StageSystem s = build_stage(m.generator, m.network);
    CHECK_THROWS_AS(solve_equilibrium(XYSystem(s)), solve_error);
}

TEST_CASE("rotating-frame transform") {
    const StageSystem& s = fx().pre;
    const Vec phi = testing::random_vec(10, 30.0);
    const Vec delta = testing::random_vec(6, 1.0);

    SECTION("t = 0 is the identity") {
        const auto [psi, theta] = to_alpha_beta(s, 0.0, phi, delta);
        CHECK((psi - phi).cwiseAbs().maxCoeff() == 0.0);
        CHECK((theta - delta).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("a full period returns the node components") {
        const double period = 2 * kPi / s.omega_s;
        const auto [psi, theta] = to_alpha_beta(s, period, phi, delta);
        CHECK((psi - phi).cwiseAbs().maxCoeff() < 1e-12 * (1 + phi.cwiseAbs().maxCoeff()));
        CHECK((theta - (delta.array() + 2 * kPi).matrix()).cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("round trip at t = 0.37") {
        const auto [psi, theta] = to_alpha_beta(s, 0.37, phi, delta);
        const auto [phi2, delta2] = from_alpha_beta(s, 0.37, psi, theta);
        CHECK((phi2 - phi).cwiseAbs().maxCoeff() <= 1e-12 * (1 + phi.cwiseAbs().maxCoeff()));
        CHECK((delta2 - delta).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SECTION("winding components pass through") {
        const auto [psi, theta] = to_alpha_beta(s, 0.123, phi, delta);
        CHECK((psi.tail(4) - phi.tail(4)).cwiseAbs().maxCoeff() == 0.0);
    }
}
