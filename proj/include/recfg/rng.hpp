#pragma once

#include <cmath>
#include <cstdint>

namespace recfg {

// Counter-based pseudo-randomness: every draw is a pure function of
// (seed, stream path, counter), so results are independent of evaluation
// order and thread count. The generator is the SplitMix64 finalizer applied
// to key + counter * golden-ratio increment; statistical quality is ample
// for Monte Carlo use (it is the mixer behind SplittableRandom). Not
// cryptographic.
namespace rng_detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

// Inverse normal CDF, Wichura's PPND16 rational approximations
// (relative error below 1e-15 across (0,1)).
inline double inverse_normal_cdf(double p) {
    const double q = p - 0.5;
    if (q >= -0.425 && q <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                                 6.7265770927008700853e4) *
                                    r +
                                4.5921953931549871457e4) *
                                   r +
                               1.3731693765509461125e4) *
                                  r +
                              1.9715909503065514427e3) *
                                 r +
                             1.3314166789178437745e2) *
                                r +
                            3.3871328727963666080e0);
        const double den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                                 3.9307895800092710610e4) *
                                    r +
                                2.1213794301586595867e4) *
                                   r +
                               5.3941960214247511077e3) *
                                  r +
                              6.8718700749205790830e2) *
                                 r +
                             4.2313330701600911252e1) *
                                r +
                            1.0);
        return q * num / den;
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        const double num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                                 2.41780725177450611770e-1) *
                                    r +
                                1.27045825245236838258e0) *
                                   r +
                               3.64784832476320460504e0) *
                                  r +
                              5.76949722146069140550e0) *
                                 r +
                             4.63033784615654529590e0) *
                                r +
                            1.42343711074968357734e0);
        const double den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                                 1.51986665636164571966e-2) *
                                    r +
                                1.48103976427480074590e-1) *
                                   r +
                               6.89767334985100004550e-1) *
                                  r +
                              1.67638483018380384940e0) *
                                 r +
                             2.05319162663775882187e0) *
                                r +
                            1.0);
        x = num / den;
    } else {
        r -= 5.0;
        const double num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                                 1.24266094738807843860e-3) *
                                    r +
                                2.65321895265761230930e-2) *
                                   r +
                               2.96560571828504891230e-1) *
                                  r +
                              1.78482653991729133580e0) *
                                 r +
                             5.46378491116411436990e0) *
                                r +
                            6.65790464350110377720e0);
        const double den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                                 1.84631831751005468180e-5) *
                                    r +
                                7.86869131145613259100e-4) *
                                   r +
                               1.48753612908506148525e-2) *
                                  r +
                              1.36929880922735805310e-1) *
                                 r +
                             5.99832206555887937690e-1) *
                                r +
                            1.0);
        x = num / den;
    }
    return q < 0.0 ? -x : x;
}

}  // namespace rng_detail

// One stream of draws. Copyable/immutable; derive substreams with child().
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(rng_detail::mix64(seed + rng_detail::kGolden)) {}

    // Derives a decorrelated substream for the given component index.
    Rng child(std::uint64_t component) const {
        return Rng(key_ ^ rng_detail::mix64(component + rng_detail::kGolden), FromKey{});
    }

    // Uniform draw in the open interval (0, 1); exact dyadic rational.
    double uniform(std::uint64_t counter) const {
        const std::uint64_t bits =
            rng_detail::mix64(key_ + (counter + 1) * rng_detail::kGolden);
        return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal draw via the inverse CDF (one uniform per normal,
    // keeping the draw<->counter mapping one-to-one).
    double normal(std::uint64_t counter) const {
        return rng_detail::inverse_normal_cdf(uniform(counter));
    }

    std::uint64_t key() const { return key_; }

private:
    struct FromKey {};
    Rng(std::uint64_t key, FromKey) : key_(key) {}
    std::uint64_t key_;
};

}  // namespace recfg
