#pragma once

#include "recfg/vec.hpp"

namespace recfg {

// Feasibility policy for the rectified coefficients: strict enforces
// gamma0 <= 0 and gamma1 + gamma0 >= 1 (the variance-contraction condition),
// loose relaxes the sum bound to >= 0, off disables projection.
enum class ClampMode { off, strict, loose };

// Per-dimension guidance coefficients. gamma1/gamma0 of size 1 broadcast to
// any prediction dimension; otherwise they must match it exactly.
struct GuidanceCoefficients {
    Vec gamma1;
    Vec gamma0;
    ClampMode clamp_mode = ClampMode::strict;

    static GuidanceCoefficients scalar(double g1, double g0, ClampMode mode = ClampMode::off) {
        return GuidanceCoefficients{Vec{g1}, Vec{g0}, mode};
    }
};

// gamma * eps_cond + (1 - gamma) * eps_uncond.
Vec combine_cfg(const Vec& eps_cond, const Vec& eps_uncond, double gamma);

// gamma1 (x) eps_cond + gamma0 (x) eps_uncond, element-wise. Shares the
// combination kernel with combine_cfg, so the (gamma, 1-gamma) case
// reproduces it bit-for-bit.
Vec combine_recfg(const Vec& eps_cond, const Vec& eps_uncond, const GuidanceCoefficients& coeffs);

// Projects each gamma0 component onto the feasible interval of the active
// mode ([1-gamma1, 0] strict, [-gamma1, 0] loose); gamma1 passes through.
// Throws when the interval is empty (strict with gamma1 < 1).
GuidanceCoefficients clamp_coeffs(const GuidanceCoefficients& coeffs);

// Residual prediction that drives the expectation shift:
// (gamma1 - 1) (x) eps_cond + gamma0 (x) eps_uncond.
Vec residual_eps(const Vec& eps_cond, const Vec& eps_uncond, const GuidanceCoefficients& coeffs);

}  // namespace recfg
