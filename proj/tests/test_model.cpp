#include <catch2/catch_amalgamated.hpp>

#include "ftsim/model.hpp"
#include "support/oracles.hpp"

using namespace ftsim;

namespace {
Model bench() { return first_benchmark(); }

std::array<StageSystem, 3> bench_stages() {
    const Model m = bench();
    const auto topos = stage_topologies(m.network, m.fault);
    return {build_stage(m.generator, topos[0]), build_stage(m.generator, topos[1]),
            build_stage(m.generator, topos[2])};
}
}  // namespace

TEST_CASE("inductance coupling matrix of the benchmark network") {
    const Model m = bench();
    const Mat kl = build_kl(m.network);
    REQUIRE(kl.rows() == 10);
    const double il1 = 1.0 / 4e-4, il2 = 1.0 / 2e-4;
    // upper 6x6 block as printed for the pre-fault network
    Mat expect(6, 6);
    expect << il1 + il2, 0, -il2, 0, -il1, 0,
              0, il1 + il2, 0, -il2, 0, -il1,
              -il2, 0, 2 * il2, 0, -il2, 0,
              0, -il2, 0, 2 * il2, 0, -il2,
              -il1, 0, -il2, 0, il1 + il2, 0,
              0, -il1, 0, -il2, 0, il1 + il2;
    CHECK((kl.topLeftCorner(6, 6) - expect).cwiseAbs().maxCoeff() == 0.0);
    CHECK(kl.bottomRightCorner(4, 4).cwiseAbs().maxCoeff() == 0.0);
    CHECK(kl.isApprox(kl.transpose()));

    SECTION("row sums over paired columns vanish per phase") {
        for (int i = 0; i < 3; ++i) {
            double sa = 0, sb = 0;
            for (int j = 0; j < 3; ++j) {
                sa += kl(2 * i, 2 * j);
                sb += kl(2 * i + 1, 2 * j + 1);
            }
            CHECK(std::abs(sa) < 1e-12);
            CHECK(std::abs(sb) < 1e-12);
        }
    }
}

TEST_CASE("fully open network gives zero coupling") {
    Model m = bench();
    m.network.ell.setConstant(kInf);
    CHECK(build_kl(m.network).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("post-clearing network zeroes the faulted node rows") {
    const Model m = bench();
    const auto topos = stage_topologies(m.network, m.fault);
    const Mat kl = build_kl(topos[2]);
    CHECK(kl.row(2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(kl.row(3).cwiseAbs().maxCoeff() == 0.0);
    CHECK(kl.col(2).cwiseAbs().maxCoeff() == 0.0);
    const double il1 = 1.0 / 4e-4;
    CHECK(kl(0, 0) == il1);
    CHECK(kl(0, 4) == -il1);
    CHECK(kl(4, 4) == il1);
}

TEST_CASE("conductance diagonal per stage") {
    const Model m = bench();
    const auto topos = stage_topologies(m.network, m.fault);
    const Vec kr1 = build_kr(topos[0], m.generator);
    CHECK(kr1[0] == 2000.0);
    CHECK(kr1[1] == 2000.0);
    CHECK(kr1.segment(2, 4).cwiseAbs().maxCoeff() == 0.0);
    CHECK(kr1[6] == Catch::Approx(1.0 / m.generator.r_f));
    CHECK(kr1[9] == Catch::Approx(1.0 / m.generator.r_Q));

    const Vec kr2 = build_kr(topos[1], m.generator);
    CHECK(kr2[2] == kInf);
    CHECK(kr2[3] == kInf);
    CHECK(kr2[4] == 0.0);

    Model open = m;
    open.network.r_ground[1] = kInf;
    open.network.r_ground[2] = kInf;
    const Vec kro = build_kr(open.network, m.generator);
    CHECK(kro.segment(2, 4).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rotor coupling block and its derivatives") {
    const Model m = bench();
    const RotorCoupling rc(m.generator.winding_L);

    SECTION("theta = 0 reproduces the inverse winding matrix") {
        CHECK((rc.block(0.0) - rc.gamma0()).cwiseAbs().maxCoeff() < 1e-14 * rc.gamma0().cwiseAbs().maxCoeff());
    }
    SECTION("theta = pi/2 against an explicit rotation product") {
        Mat p = Mat::Identity(6, 6);
        p(0, 0) = 0; p(0, 1) = -1; p(1, 0) = 1; p(1, 1) = 0;
        const Mat expect = p * rc.gamma0() * p.transpose();
        CHECK((rc.block(kPi / 2) - expect).cwiseAbs().maxCoeff() < 1e-12 * expect.cwiseAbs().maxCoeff());
    }
    SECTION("2 pi periodicity") {
        CHECK((rc.block(0.7 + 2 * kPi) - rc.block(0.7)).cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("central-difference consistency") {
        const double scale = rc.gamma0().cwiseAbs().maxCoeff();
        auto check_at = [&](double th) {
            const double h1 = 1e-4, h2 = 5e-5;
            const Mat d1 = (rc.block(th + h1) - rc.block(th - h1)) / (2 * h1) - rc.d_block(th);
            const Mat d2 = (rc.block(th + h2) - rc.block(th - h2)) / (2 * h2) - rc.d_block(th);
            // halving h shrinks the defect by ~4 (second order)
            CHECK(d1.cwiseAbs().maxCoeff() < 1e-6 * scale);
            CHECK(d2.cwiseAbs().maxCoeff() < 0.3 * d1.cwiseAbs().maxCoeff());
            const Mat e1 = (rc.d_block(th + h1) - rc.d_block(th - h1)) / (2 * h1) - rc.d2_block(th);
            CHECK(e1.cwiseAbs().maxCoeff() < 1e-6 * scale);
        };
        check_at(0.7);
        for (int i = 0; i < 10; ++i) check_at(testing::uniform(-kPi, kPi));
    }
    SECTION("singular winding matrix is rejected") {
        Mat bad = Mat::Zero(6, 6);
        CHECK_THROWS_AS(RotorCoupling(bad), model_error);
    }
}

TEST_CASE("forcing vector") {
    const auto stages = bench_stages();
    const StageSystem& s1 = stages[0];
    const Vec f0 = s1.forcing(0.0);
    CHECK(f0[0] == Catch::Approx(5.2e7));
    CHECK(f0[1] == 0.0);
    CHECK(f0[6] == Catch::Approx(373.7756 / 0.0532343305911098));
    CHECK(f0.segment(2, 4).cwiseAbs().maxCoeff() == 0.0);

    const Vec fp = s1.forcing(kPi / s1.omega_s);
    CHECK(fp[0] == Catch::Approx(-5.2e7));
    CHECK(std::abs(fp[1]) < 1e-7);  // sin(pi) up to round-off

    SECTION("lambda1 entries are zero for all t") {
        for (double t : {0.0, 0.123, 0.5, 2.0})
            for (int k : s1.local1) CHECK(s1.forcing(t)[k] == 0.0);
    }
    SECTION("forcing_xy equals f(0)") {
        CHECK((s1.forcing_xy() - f0).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("shorted-node removal") {
    const Model m = bench();
    const auto topos = stage_topologies(m.network, m.fault);

    SECTION("fault stage drops the node-2 pair") {
        const StageSystem s2 = build_stage(m.generator, topos[1]);
        CHECK(s2.dim() == 8);
        CHECK(s2.removed == std::vector<int>{2, 3});
        CHECK(s2.kept == std::vector<int>{0, 1, 4, 5, 6, 7, 8, 9});
        CHECK(s2.part.lambda1 == std::vector<int>{4, 5});
        CHECK(s2.part.lambda2 == std::vector<int>{0, 1, 6, 7, 8, 9});
        CHECK((s2.kr.array() != kInf).all());
    }
    SECTION("empty lambda0 is the identity") {
        const StageSystem full = assemble_stage(m.generator, topos[0]);
        const StageSystem same = remove_shorted(full, {});
        CHECK(same.dim() == full.dim());
        CHECK((same.kl - full.kl).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("removed system keeps N positive definite") {
        const StageSystem s2 = build_stage(m.generator, topos[1]);
        for (int i = 0; i < 16; ++i) {
            const double th = 2 * kPi * i / 16;
            Eigen::SelfAdjointEigenSolver<Mat> es(s2.n_of(th));
            CHECK(es.eigenvalues().minCoeff() > 0.0);
        }
    }
    SECTION("winding indices cannot be removed") {
        const StageSystem full = assemble_stage(m.generator, topos[0]);
        CHECK_THROWS_AS(remove_shorted(full, {6}), model_error);
    }
}

TEST_CASE("index partition invariants") {
    const auto stages = bench_stages();
    CHECK(stages[0].part.lambda1 == std::vector<int>{2, 3, 4, 5});
    CHECK(stages[0].part.lambda2 == std::vector<int>{0, 1, 6, 7, 8, 9});
    for (const auto& s : stages) {
        // windings in lambda2
        for (int k = 2 * s.n_nodes; k < 2 * s.n_nodes + 4; ++k) {
            const auto& l2 = s.part.lambda2;
            CHECK(std::find(l2.begin(), l2.end(), k) != l2.end());
        }
        // node pairs stay together
        auto paired = [](const std::vector<int>& v) {
            for (int k : v) {
                const int mate = (k % 2 == 0) ? k + 1 : k - 1;
                if (std::find(v.begin(), v.end(), mate) == v.end()) return false;
            }
            return true;
        };
        std::vector<int> l1_nodes, l2_nodes;
        for (int k : s.part.lambda1)
            if (k < 2 * s.n_nodes) l1_nodes.push_back(k);
        for (int k : s.part.lambda2)
            if (k < 2 * s.n_nodes) l2_nodes.push_back(k);
        CHECK(paired(l1_nodes));
        CHECK(paired(l2_nodes));
    }
    SECTION("winding short is rejected") {
        Vec kr(10);
        kr << 1, 1, 0, 0, 0, 0, 1, 1, 1, kInf;
        CHECK_THROWS_AS(partition_from_kr(kr), model_error);
    }
}

TEST_CASE("shaft stiffness structure") {
    const Model m = bench();
    const Mat k = shaft_stiffness(m.generator.K_springs);
    CHECK(k.isApprox(k.transpose()));
    CHECK((k * Vec::Ones(6)).cwiseAbs().maxCoeff() < 1e-6);  // absolute, entries ~1e8
    Eigen::SelfAdjointEigenSolver<Mat> es(k);
    CHECK(es.eigenvalues()[0] > -1e-6);
    CHECK(es.eigenvalues()[1] > 1.0);  // one-dimensional nullspace only
}

TEST_CASE("N(theta) positive definite on the 64-point grid for all stages") {
    for (const auto& s : bench_stages()) {
        for (int i = 0; i < 64; ++i) {
            const double th = 2 * kPi * i / 64;
            const Mat n = s.n_of(th);
            CHECK((n - n.transpose()).cwiseAbs().maxCoeff() < 1e-10 * n.cwiseAbs().maxCoeff());
            Eigen::SelfAdjointEigenSolver<Mat> es(n);
            CHECK(es.eigenvalues().minCoeff() > 0.0);
        }
    }
}

TEST_CASE("parameter validation") {
    Model m = bench();
    m.generator.J_diag[2] = -1.0;
    CHECK_THROWS_AS(m.generator.validate(), model_error);

    Model m2 = bench();
    m2.network.r_ground[0] = kInf;
    CHECK_THROWS_AS(m2.network.validate(), model_error);

    Model m3 = bench();
    m3.network.ell(0, 1) = 1e-4;  // breaks symmetry
    CHECK_THROWS_AS(m3.network.validate(), model_error);
}
