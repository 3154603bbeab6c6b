#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "recfg/guidance.hpp"
#include "recfg/schedule.hpp"
#include "recfg/vec.hpp"
#include "recfg/world.hpp"

namespace recfg {

// Closed-form theory of the guided terminal distribution in the reference
// world: the mean coefficient phi, the variance laws, and the step-by-step
// expectation-drift recursion that explains where the shift comes from.

// phi(gamma, T): the factor multiplying c in the terminal mean of a
// gamma-guided deterministic reverse run from horizon T. Evaluated by
// adaptive quadrature (absolute tolerance 1e-10) after substituting
// u = 1/(s+1), w = sqrt(u), which maps the integral onto the smooth kernel
// (1 + w^2)^{(gamma-1)/2} over a finite interval.
double phi_finite(double gamma, double T);

// T -> infinity limit of phi (tolerance 1e-9).
double phi_limit(double gamma);

// Exact finite-sum values at odd integer arguments: phi(2n+1), n >= 0.
double phi_closed_odd(int n);

// Exact values at even integer arguments: phi(2n), n >= 1; switches to
// log-space accumulation for n > 20 where the double factorials overflow.
double phi_closed_even(int n);

// phi(gamma + 2) - 1 - ((gamma+1)/(2 gamma)) * phi(gamma), which is zero in
// exact arithmetic for every gamma >= 1.
double phi_recurrence_residual(double gamma);

// True iff phi(gamma) respects the applicable lower bounds:
// gamma*(7/15)*(10/7)^{(5-gamma)/2} on [1,3], gamma*(2/3)^{(gamma-1)/2} on
// [3,5], and the floor of 2 beyond 3.
bool phi_bounds_check(double gamma);

enum class ShiftSource { quadrature, closed_form, recurrence };

// Terminal-distribution summary for one coefficient configuration.
struct ShiftReport {
    double gamma1 = 1.0;
    double gamma0 = 0.0;
    double T = 0.0;
    double mean_coeff = 1.0;  // factor multiplying c in the terminal mean
    double variance = 1.0;
    ShiftSource source = ShiftSource::quadrature;
};

// Terminal law of plain gamma-guidance in the reference world:
// N(c * phi(gamma,T), 2^{1-gamma} * (T+1)^{1-gamma} * (T+2)^{gamma-1}).
ShiftReport cfg_toy_distribution(double gamma, double T);

// Terminal variance of rectified guidance with constant coefficients:
// 2^{gamma0} * (T+1)^{1-gamma1} * (T+2)^{-gamma0}.
double recfg_variance(double gamma1, double gamma0, double T);

struct DriftState {
    int t_index = 0;  // position in grid.times (0 is the horizon)
    Vec delta;        // E[x_t] of the plain chain minus E of the guided chain
};

// Propagates the expectation drift Delta down the grid: Delta starts at 0 at
// the horizon, and each update applies the step map to the difference of the
// two chains' expected predictions. For oracles affine in x, expectations
// pass through evaluation at the chain means and the result is exact; for
// non-affine oracles they are Monte Carlo estimates over mc_samples forward
// draws from mc_world (guided-chain draws approximated by shifting forward
// draws by the current drift). coeffs_at(k) supplies the coefficients used
// when stepping from grid.times[k] to grid.times[k+1].
std::vector<DriftState> drift_propagate(const ScoreOracle& oracle, const NoiseSchedule& sched,
                                        const std::function<GuidanceCoefficients(int)>& coeffs_at,
                                        const TimeGrid& grid, const Vec& c,
                                        std::size_t mc_samples, std::uint64_t seed,
                                        const AnalyticWorld* mc_world = nullptr);

// Fixed-coefficient convenience overload.
std::vector<DriftState> drift_propagate(const ScoreOracle& oracle, const NoiseSchedule& sched,
                                        const GuidanceCoefficients& coeffs, const TimeGrid& grid,
                                        const Vec& c, std::size_t mc_samples = 100000,
                                        std::uint64_t seed = 0,
                                        const AnalyticWorld* mc_world = nullptr);

}  // namespace recfg
