#pragma once

#include <utility>
#include <vector>

#include "recfg/vec.hpp"

namespace recfg {

// Noise schedule (alpha_t, sigma_t) as pure functions of continuous time.
// The variance-exploding flavor is pinned to alpha=1, sigma=sqrt(t) so the
// analytic world's per-time marginals take the form N(c, 1+t); the
// variance-preserving flavor uses the standard linear-beta parameterization.
struct NoiseSchedule {
    enum class Kind { VE, VP };

    Kind kind = Kind::VE;
    double beta_min = 0.1;  // VP only
    double beta_max = 20.0;

    static NoiseSchedule ve() { return NoiseSchedule{Kind::VE, 0.0, 0.0}; }
    static NoiseSchedule vp(double beta_min, double beta_max);

    double alpha(double t) const;
    double sigma(double t) const;
    // Noise variance without the sqrt round trip (sigma(t)^2 exactly; for
    // the square-root flavor this is just t).
    double sigma2(double t) const;
    std::pair<double, double> eval(double t) const { return {alpha(t), sigma(t)}; }

    // Probability-flow drift pieces: f = d(log alpha)/dt and g^2 = the
    // diffusion-squared coefficient matching d(sigma^2)/dt - 2 f sigma^2.
    double f(double t) const;
    double g2(double t) const;
};

// Coefficients (a, b) of the deterministic denoising update
// x_prev = a * x + b * eps_hat between adjacent grid times.
std::pair<double, double> ddim_step_coeffs(const NoiseSchedule& sched, double t, double t_prev);

// x_t = alpha_t * x0 + sigma_t * noise.
Vec forward_perturb(const NoiseSchedule& sched, const Vec& x0, double t, const Vec& noise);

// Descending time grid T = times[0] > ... > times[N-1] = t_min > times[N] = 0.
// The first N entries are the evaluation times of a sampler (so NFE = N); the
// final step lands on t = 0 through the affine update, where the noise
// prediction itself is never evaluated (it is singular at sigma = 0).
struct TimeGrid {
    double T = 0.0;
    std::vector<double> times;

    int nfe() const { return static_cast<int>(times.size()) - 1; }

    bool operator==(const TimeGrid&) const = default;

    // Evaluation times uniformly spaced in sigma between sigma(T) and
    // sigma(t_min); inverts sigma by bisection for generic schedules.
    static TimeGrid uniform_sigma(const NoiseSchedule& sched, double T, int nfe,
                                  double t_min = 1e-3);
    // Evaluation times uniformly spaced in t on [t_min, T].
    static TimeGrid uniform_t(const NoiseSchedule& sched, double T, int nfe, double t_min = 1e-3);

    static TimeGrid from_times(const NoiseSchedule& sched, std::vector<double> times);
};

// Shared grid sanity check: descending times from T to 0 with strictly
// increasing signal-to-noise ratio toward t = 0. The factories call it; code
// accepting externally supplied grids should too.
void validate_grid(const NoiseSchedule& sched, const TimeGrid& grid);

}  // namespace recfg
