#include "recfg/guidance.hpp"

#include <algorithm>
#include <string>

namespace recfg {

namespace {

// Broadcast access: a size-1 coefficient vector applies to every dimension.
inline double bcast(const Vec& v, std::size_t d) { return v.size() == 1 ? v[0] : v[d]; }

void require_broadcastable(const Vec& coeff, std::size_t dim, const char* what) {
    if (coeff.size() != 1 && coeff.size() != dim) {
        fail_validation(std::string(what) + ": coefficient size " + std::to_string(coeff.size()) +
                        " does not broadcast to dimension " + std::to_string(dim));
    }
}

// The one combination kernel: w1 (x) a + w0 (x) b.
Vec weighted_sum(const Vec& a, const Vec& b, const Vec& w1, const Vec& w0, const char* what) {
    require_same_dim(a, b, what);
    require_broadcastable(w1, a.size(), what);
    require_broadcastable(w0, a.size(), what);
    Vec out(a.size());
    for (std::size_t d = 0; d < a.size(); ++d) {
        out[d] = bcast(w1, d) * a[d] + bcast(w0, d) * b[d];
    }
    return out;
}

}  // namespace

Vec combine_cfg(const Vec& eps_cond, const Vec& eps_uncond, double gamma) {
    return weighted_sum(eps_cond, eps_uncond, Vec{gamma}, Vec{1.0 - gamma}, "combine_cfg");
}

Vec combine_recfg(const Vec& eps_cond, const Vec& eps_uncond, const GuidanceCoefficients& coeffs) {
    return weighted_sum(eps_cond, eps_uncond, coeffs.gamma1, coeffs.gamma0, "combine_recfg");
}

GuidanceCoefficients clamp_coeffs(const GuidanceCoefficients& coeffs) {
    if (coeffs.clamp_mode == ClampMode::off) return coeffs;
    require_valid(coeffs.gamma1.size() == coeffs.gamma0.size() || coeffs.gamma1.size() == 1 ||
                      coeffs.gamma0.size() == 1,
                  "clamp_coeffs: gamma1/gamma0 sizes cannot broadcast together");
    const std::size_t n = std::max(coeffs.gamma1.size(), coeffs.gamma0.size());
    GuidanceCoefficients out = coeffs;
    out.gamma0.assign(n, 0.0);
    for (std::size_t d = 0; d < n; ++d) {
        const double g1 = bcast(coeffs.gamma1, d);
        const double lo = coeffs.clamp_mode == ClampMode::strict ? 1.0 - g1 : -g1;
        if (lo > 0.0) {
            fail_validation("clamp_coeffs: infeasible interval [" + std::to_string(lo) +
                            ", 0] for gamma1 = " + std::to_string(g1));
        }
        out.gamma0[d] = std::clamp(bcast(coeffs.gamma0, d), lo, 0.0);
    }
    return out;
}

Vec residual_eps(const Vec& eps_cond, const Vec& eps_uncond, const GuidanceCoefficients& coeffs) {
    Vec g1m1(coeffs.gamma1.size());
    for (std::size_t d = 0; d < g1m1.size(); ++d) g1m1[d] = coeffs.gamma1[d] - 1.0;
    return weighted_sum(eps_cond, eps_uncond, g1m1, coeffs.gamma0, "residual_eps");
}

}  // namespace recfg
