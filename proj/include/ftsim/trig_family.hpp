#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "ftsim/common.hpp"

namespace ftsim {

/// Matrix-valued function of theta of the form
///   B(theta) = S0 + S1 sin(theta) + C1 cos(theta) + S2 sin(2 theta) + C2 cos(2 theta),
/// stored by its five coefficient matrices. eval/deriv/deriv2 are exact.
struct TrigMatrixFamily {
    Mat s0, s1, c1, s2, c2;

    Eigen::Index rows() const { return s0.rows(); }
    Eigen::Index cols() const { return s0.cols(); }

    Mat eval(double th) const {
        return s0 + s1 * std::sin(th) + c1 * std::cos(th) + s2 * std::sin(2 * th) + c2 * std::cos(2 * th);
    }
    Mat deriv(double th) const {
        return s1 * std::cos(th) - c1 * std::sin(th) + 2.0 * s2 * std::cos(2 * th) - 2.0 * c2 * std::sin(2 * th);
    }
    Mat deriv2(double th) const {
        return -s1 * std::sin(th) - c1 * std::cos(th) - 4.0 * s2 * std::sin(2 * th) - 4.0 * c2 * std::cos(2 * th);
    }
};

/// Recover the five coefficient matrices from samples at
/// theta = 0, +-pi/4, +-pi/2, +-pi, +-3pi/2 and validate the fit at 50
/// pseudo-random angles. Throws solve_error if the sampled function does not
/// actually lie in the trigonometric span (wrong topology class).
inline TrigMatrixFamily fit_trig(const std::function<Mat(double)>& sample,
                                 double validate_rel_tol = 1e-9) {
    const double p = kPi;
    const Mat b0 = sample(0.0);
    const Mat bp4 = sample(p / 4), bm4 = sample(-p / 4);
    const Mat bp2 = sample(p / 2), bm2 = sample(-p / 2);
    const Mat bp = sample(p), bm = sample(-p);
    const Mat bp32 = sample(3 * p / 2), bm32 = sample(-3 * p / 2);

    TrigMatrixFamily f;
    f.s0 = (2.0 * b0 + bp2 + bm2 + bp + bm + bp32 + bm32) / 8.0;
    f.s1 = 0.5 * bp2 - 0.5 * bm2;
    f.c1 = 0.5 * b0 - 0.25 * bp - 0.25 * bm;
    f.s2 = 0.5 * bp4 - 0.5 * bm4 - (std::sqrt(2.0) / 2.0) * f.s1;
    f.c2 = 0.5 * b0 + 0.25 * bp + 0.25 * bm - f.s0;

    double scale = std::max({f.s0.cwiseAbs().maxCoeff(), f.s1.cwiseAbs().maxCoeff(),
                             f.c1.cwiseAbs().maxCoeff(), f.s2.cwiseAbs().maxCoeff(),
                             f.c2.cwiseAbs().maxCoeff(), 1e-300});
    std::mt19937 rng(0x5eedf17u);
    std::uniform_real_distribution<double> dist(-kPi, kPi);
    for (int i = 0; i < 50; ++i) {
        const double th = dist(rng);
        const Mat direct = sample(th);
        const double err = (f.eval(th) - direct).cwiseAbs().maxCoeff();
        const double ref = std::max(direct.cwiseAbs().maxCoeff(), scale);
        if (err > validate_rel_tol * ref)
            throw solve_error("trig fit validation failed: sampled function is outside "
                              "span{1, sin, cos, sin2, cos2} (relative error " +
                              std::to_string(err / ref) + ")");
    }
    return f;
}

}  // namespace ftsim
