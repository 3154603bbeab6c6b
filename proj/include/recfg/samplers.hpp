#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "recfg/guidance.hpp"
#include "recfg/lookup.hpp"
#include "recfg/schedule.hpp"
#include "recfg/vec.hpp"
#include "recfg/world.hpp"

namespace recfg {

enum class SamplerMethod { DDIM, ODE_RK4, ODE_EULER };

struct SamplerConfig {
    SamplerMethod method = SamplerMethod::DDIM;
    NoiseSchedule sched = NoiseSchedule::ve();
    TimeGrid grid;
    std::size_t batch = 1;
    std::uint64_t seed = 0;
    int workers = 1;
    bool record_trajectory = false;
    // When set, every chain starts at exactly this terminal state instead of
    // a draw from the forward marginal — the handle for solver-accuracy
    // checks against closed-form trajectories.
    std::optional<Vec> fixed_init;
};

// How the noise prediction is combined at each step:
//   none   -> conditional branch alone,
//   cfg    -> gamma * eps_cond + (1 - gamma) * eps_uncond,
//   recfg  -> gamma1 (x) eps_cond + gamma0 (x) eps_uncond with gamma0 either
//             forced (testing) or resolved per step by a Gamma0Source.
struct GuidanceRule {
    enum class Kind { none, cfg, recfg };
    Kind kind = Kind::none;
    double gamma = 1.0;
    Vec gamma1;
    std::optional<Vec> forced_gamma0;

    static GuidanceRule none_rule() { return {}; }
    static GuidanceRule cfg_rule(double gamma) {
        GuidanceRule r;
        r.kind = Kind::cfg;
        r.gamma = gamma;
        return r;
    }
    static GuidanceRule recfg_rule(Vec gamma1) {
        GuidanceRule r;
        r.kind = Kind::recfg;
        r.gamma1 = std::move(gamma1);
        return r;
    }
    static GuidanceRule recfg_forced(Vec gamma1, Vec gamma0) {
        GuidanceRule r = recfg_rule(std::move(gamma1));
        r.forced_gamma0 = std::move(gamma0);
        return r;
    }
};

// Per-step gamma0 resolver plus any warnings produced while wiring it up
// (e.g. a grid mismatch that forces nearest-time lookups).
struct Gamma0Source {
    std::function<Vec(const std::string& cond_id, int t_index, double t)> resolve;
    std::vector<std::string> warnings;
};

// Builds a resolver against a lookup table. When the run grid's evaluation
// times match the table's, steps map by index; otherwise each run time maps
// to the nearest table time and a warning is recorded.
Gamma0Source table_gamma0_source(const LookupTable& table, const Vec& gamma1,
                                 const TimeGrid& run_grid, ClampMode clamp_mode,
                                 bool allow_avg_fallback = true);

struct SampleBatch {
    std::vector<Vec> x0;  // batch x D terminal states
    Vec c;                // the run's shared condition
    std::string cond_id;
    // trajectory[k][i]: state of chain i after k update steps (k = 0 is the
    // initial x_T); filled only when record_trajectory is set.
    std::vector<std::vector<Vec>> trajectory;
};

// Reverse-time denoising with the affine update x_prev = a * x + b * eps_hat
// where (a, b) come from ddim_step_coeffs. Chains are independent and their
// draws are pure functions of (seed, chain index), so results are identical
// for any worker count. Initial states follow the forward marginal of the
// world at T unless fixed_init overrides them.
SampleBatch ddim_run(const ScoreOracle& oracle, const AnalyticWorld& world, const Vec& c,
                     const GuidanceRule& rule, const SamplerConfig& cfg,
                     const Gamma0Source* gamma0_source = nullptr);

// Probability-flow integration dx/dt = f(t) x - g(t)^2/2 * s_hat(x, t) over
// the same grid, with s_hat the guided score. Runge-Kutta 4 by default;
// cfg.method = ODE_EULER selects the explicit Euler variant. The score view
// of the oracle keeps the final segment down to t = 0 regular.
SampleBatch ode_run(const ScoreOracle& oracle, const AnalyticWorld& world, const Vec& c,
                    const GuidanceRule& rule, const SamplerConfig& cfg,
                    const Gamma0Source* gamma0_source = nullptr);

// One row per sample: chain id, condition id, x0 components.
std::string samples_to_csv(const SampleBatch& batch);

}  // namespace recfg
