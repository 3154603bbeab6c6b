#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "recfg/errors.hpp"

namespace recfg {

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;
    std::int64_t evaluations = 0;
};

namespace quad_detail {

// 15-point Kronrod extension of 7-point Gauss (positive abscissae; rule is
// symmetric). Same nodes/weights as QUADPACK's dqk15.
inline constexpr double kXgk[8] = {
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691, 0.7415311855993944,
    0.5860872354676911, 0.4058451513773972, 0.2077849550078985, 0.0,
};
inline constexpr double kWgk[8] = {
    0.02293532201052922, 0.06309209262997855, 0.1047900103222502, 0.1406532597155259,
    0.1690047266392679,  0.1903505780647854,  0.2044329400752989, 0.2094821410847278,
};
inline constexpr double kWg[4] = {
    0.1294849661688697, 0.2797053914892767, 0.3818300505051189, 0.4179591836734694,
};

template <class F>
inline void gauss_kronrod_15(F& f, double a, double b, double& kronrod, double& err) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double result_gauss = kWg[3] * fc;
    double result_kronrod = kWgk[7] * fc;
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        const double fsum = f(center - dx) + f(center + dx);
        result_kronrod += kWgk[j] * fsum;
        if (j % 2 == 1) result_gauss += kWg[j / 2] * fsum;
    }
    kronrod = result_kronrod * half;
    err = std::abs((result_kronrod - result_gauss) * half);
}

template <class F>
inline QuadratureResult integrate_rec(F& f, double a, double b, double abs_tol, int depth,
                                      int max_depth) {
    double value, err;
    gauss_kronrod_15(f, a, b, value, err);
    QuadratureResult res{value, err, 15};
    if (err <= abs_tol || !(std::isfinite(err))) {
        if (!std::isfinite(value)) {
            fail_numeric("quadrature produced a non-finite panel value on [" + std::to_string(a) +
                         ", " + std::to_string(b) + "]");
        }
        return res;
    }
    if (depth >= max_depth) {
        fail_numeric("quadrature failed to reach tolerance " + std::to_string(abs_tol) +
                     " (error estimate " + std::to_string(err) + " on [" + std::to_string(a) +
                     ", " + std::to_string(b) + "])");
    }
    const double mid = 0.5 * (a + b);
    const QuadratureResult left = integrate_rec(f, a, mid, 0.5 * abs_tol, depth + 1, max_depth);
    const QuadratureResult right = integrate_rec(f, mid, b, 0.5 * abs_tol, depth + 1, max_depth);
    return QuadratureResult{left.value + right.value, left.error_estimate + right.error_estimate,
                            left.evaluations + right.evaluations + 15};
}

}  // namespace quad_detail

// Adaptive Gauss-Kronrod integration of f over [a, b] to an absolute
// tolerance. Bisects panels whose Kronrod-vs-Gauss discrepancy exceeds the
// (halving) local tolerance; throws a numeric error if the tolerance is not
// reached within max_depth levels.
template <class F>
QuadratureResult integrate(F&& f, double a, double b, double abs_tol, int max_depth = 48) {
    require_valid(std::isfinite(a) && std::isfinite(b), "integration bounds must be finite");
    require_valid(abs_tol > 0.0, "integration tolerance must be positive");
    if (a == b) return QuadratureResult{0.0, 0.0, 0};
    auto& fr = f;
    return quad_detail::integrate_rec(fr, a, b, abs_tol, 0, max_depth);
}

}  // namespace recfg
