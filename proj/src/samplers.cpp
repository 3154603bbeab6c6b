#include "recfg/samplers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "recfg/errors.hpp"
#include "recfg/io.hpp"

namespace recfg {

namespace {

// Combination plan resolved once per run and shared read-only by all chains:
// for rectified guidance, the per-step coefficients; otherwise just the kind.
struct GuidancePlan {
    GuidanceRule::Kind kind = GuidanceRule::Kind::none;
    double gamma = 1.0;
    std::vector<GuidanceCoefficients> per_step;

    Vec combine(const Vec& eps_cond, const Vec& eps_uncond, int k) const {
        switch (kind) {
            case GuidanceRule::Kind::none:
                return eps_cond;
            case GuidanceRule::Kind::cfg:
                return combine_cfg(eps_cond, eps_uncond, gamma);
            case GuidanceRule::Kind::recfg:
                return combine_recfg(eps_cond, eps_uncond, per_step[std::size_t(k)]);
        }
        fail_validation("unknown guidance kind");
    }

    // Allocation-free variant for the per-step loop; identical arithmetic to
    // combine() so run outputs do not depend on which entry point is used.
    void combine_into(Vec& out, const Vec& eps_cond, const Vec& eps_uncond, int k) const {
        out.resize(eps_cond.size());
        switch (kind) {
            case GuidanceRule::Kind::none:
                out = eps_cond;
                return;
            case GuidanceRule::Kind::cfg: {
                const double g0 = 1.0 - gamma;
                for (std::size_t d = 0; d < out.size(); ++d) {
                    out[d] = gamma * eps_cond[d] + g0 * eps_uncond[d];
                }
                return;
            }
            case GuidanceRule::Kind::recfg: {
                const auto& cc = per_step[std::size_t(k)];
                for (std::size_t d = 0; d < out.size(); ++d) {
                    const double g1 = cc.gamma1.size() == 1 ? cc.gamma1[0] : cc.gamma1[d];
                    const double g0 = cc.gamma0.size() == 1 ? cc.gamma0[0] : cc.gamma0[d];
                    out[d] = g1 * eps_cond[d] + g0 * eps_uncond[d];
                }
                return;
            }
        }
        fail_validation("unknown guidance kind");
    }
};

GuidancePlan make_plan(const GuidanceRule& rule, const SamplerConfig& cfg, const Vec& c,
                       std::size_t dim, const Gamma0Source* gamma0_source) {
    GuidancePlan plan;
    plan.kind = rule.kind;
    plan.gamma = rule.gamma;
    if (rule.kind != GuidanceRule::Kind::recfg) return plan;

    require_valid(rule.gamma1.size() == 1 || rule.gamma1.size() == dim,
                  "gamma1 must be scalar or match the prediction dimension");
    const int K = cfg.grid.nfe();
    plan.per_step.reserve(std::size_t(K));
    const std::string cond = condition_id(c);
    for (int k = 0; k < K; ++k) {
        Vec g0;
        if (rule.forced_gamma0) {
            g0 = *rule.forced_gamma0;
            require_valid(g0.size() == 1 || g0.size() == dim,
                          "forced gamma0 must be scalar or match the prediction dimension");
        } else {
            require_valid(gamma0_source != nullptr && bool(gamma0_source->resolve),
                          "rectified guidance needs a gamma0 source or forced coefficients");
            g0 = gamma0_source->resolve(cond, k, cfg.grid.times[std::size_t(k)]);
        }
        // Sources hand back already-clamped values and forced coefficients
        // are taken verbatim, so no further projection here.
        plan.per_step.push_back(GuidanceCoefficients{rule.gamma1, std::move(g0), ClampMode::off});
    }
    return plan;
}

void check_run_config(const SamplerConfig& cfg, const AnalyticWorld& world,
                      const ScoreOracle& oracle, const Vec& c) {
    require_valid(cfg.batch >= 1, "sampler batch must be >= 1");
    require_valid(cfg.workers >= 1, "workers must be >= 1");
    validate_grid(cfg.sched, cfg.grid);
    require_dim(c, world.dim, "sampler condition");
    require_valid(oracle.dim() == world.dim, "oracle and world dimension mismatch");
    if (cfg.fixed_init) require_dim(*cfg.fixed_init, world.dim, "fixed initial state");
}

void check_finite_state(const Vec& x, int step, double t, std::size_t chain) {
    for (double v : x) {
        if (!std::isfinite(v)) {
            fail_numeric("non-finite state at step " + std::to_string(step) +
                         " (t = " + std::to_string(t) + ", chain " + std::to_string(chain) + ")");
        }
    }
}

// Runs fn(i) for every chain index on up to `workers` threads. Each chain
// writes only its own output slots, so scheduling cannot change results;
// the first exception wins and is rethrown on the calling thread.
void for_each_chain(std::size_t batch, int workers, const std::function<void(std::size_t)>& fn) {
    const std::size_t n_threads = std::min<std::size_t>(std::size_t(workers), batch);
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < batch; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto drain = [&]() {
        try {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= batch) break;
                fn(i);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t w = 0; w < n_threads; ++w) pool.emplace_back(drain);
    for (std::thread& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// Draws the initial x_T: either the forced deterministic state or a forward
// draw alpha_T * x0 + sigma_T * eps with x0 ~ q0(. | c).
Vec initial_state(const SamplerConfig& cfg, const AnalyticWorld& world, const Vec& c,
                  const Rng& root, std::size_t chain) {
    if (cfg.fixed_init) return *cfg.fixed_init;
    const std::size_t D = world.dim;
    const Rng stream = root.child(chain);
    const Rng x0s = stream.child(0);
    const Rng eps = stream.child(1);
    const double a = cfg.sched.alpha(cfg.grid.T);
    const double sig = cfg.sched.sigma(cfg.grid.T);
    Vec x(D);
    for (std::size_t d = 0; d < D; ++d) {
        const double x0 = c[d] + std::sqrt(world.cond_var[d]) * x0s.normal(d);
        x[d] = a * x0 + sig * eps.normal(d);
    }
    return x;
}

SampleBatch make_batch_shell(const SamplerConfig& cfg, const AnalyticWorld& world, const Vec& c) {
    SampleBatch out;
    out.c = c;
    out.cond_id = condition_id(c);
    out.x0.assign(cfg.batch, Vec(world.dim, 0.0));
    if (cfg.record_trajectory) {
        out.trajectory.assign(std::size_t(cfg.grid.nfe()) + 1,
                              std::vector<Vec>(cfg.batch, Vec(world.dim, 0.0)));
    }
    return out;
}

}  // namespace

Gamma0Source table_gamma0_source(const LookupTable& table, const Vec& gamma1,
                                 const TimeGrid& run_grid, ClampMode clamp_mode,
                                 bool allow_avg_fallback) {
    const int run_K = run_grid.nfe();
    const int table_K = table.nfe();
    require_valid(run_K >= 1 && table_K >= 1, "grids need at least one step");

    // Map each run step to a table step: by index when the evaluation times
    // coincide, by nearest time otherwise.
    std::vector<int> index_map(static_cast<std::size_t>(run_K), 0);
    Gamma0Source src;
    bool same = run_K == table_K;
    for (int k = 0; same && k < run_K; ++k) {
        same = run_grid.times[std::size_t(k)] == table.grid.times[std::size_t(k)];
    }
    if (same) {
        for (int k = 0; k < run_K; ++k) index_map[std::size_t(k)] = k;
    } else {
        for (int k = 0; k < run_K; ++k) {
            const double t = run_grid.times[std::size_t(k)];
            int best = 0;
            double best_gap = std::abs(table.grid.times[0] - t);
            for (int j = 1; j < table_K; ++j) {
                const double gap = std::abs(table.grid.times[std::size_t(j)] - t);
                if (gap < best_gap) {
                    best_gap = gap;
                    best = j;
                }
            }
            index_map[std::size_t(k)] = best;
        }
        src.warnings.push_back("run grid (" + std::to_string(run_K) +
                               " steps) differs from table grid (" + std::to_string(table_K) +
                               " steps); using nearest-time lookups");
    }

    src.resolve = [&table, gamma1, clamp_mode, allow_avg_fallback,
                   index_map = std::move(index_map)](const std::string& cond_id, int t_index,
                                                     double) {
        require_valid(t_index >= 0 && t_index < int(index_map.size()),
                      "t_index outside the run grid");
        return gamma0_for(table, gamma1, cond_id, index_map[std::size_t(t_index)], clamp_mode,
                          allow_avg_fallback);
    };
    return src;
}

SampleBatch ddim_run(const ScoreOracle& oracle, const AnalyticWorld& world, const Vec& c,
                     const GuidanceRule& rule, const SamplerConfig& cfg,
                     const Gamma0Source* gamma0_source) {
    check_run_config(cfg, world, oracle, c);
    const GuidancePlan plan = make_plan(rule, cfg, c, world.dim, gamma0_source);
    const int K = cfg.grid.nfe();

    // The affine step weights depend only on the grid, not the state.
    std::vector<std::pair<double, double>> ab(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        ab[std::size_t(k)] =
            ddim_step_coeffs(cfg.sched, cfg.grid.times[std::size_t(k)],
                             cfg.grid.times[std::size_t(k) + 1]);
    }

    SampleBatch out = make_batch_shell(cfg, world, c);
    const Rng root(cfg.seed);

    for_each_chain(cfg.batch, cfg.workers, [&](std::size_t i) {
        Vec x = initial_state(cfg, world, c, root, i);
        check_finite_state(x, 0, cfg.grid.T, i);
        if (cfg.record_trajectory) out.trajectory[0][i] = x;
        // Scratch buffers reused across steps keep the loop allocation-free.
        Vec ec;
        Vec eu;
        Vec eps_hat;
        for (int k = 0; k < K; ++k) {
            const double t = cfg.grid.times[std::size_t(k)];
            if (plan.kind == GuidanceRule::Kind::none) {
                eps_hat = oracle.eps_cond(x, c, t);
            } else {
                oracle.eps_pair_into(ec, eu, x, c, t);
                plan.combine_into(eps_hat, ec, eu, k);
            }
            const auto [a, b] = ab[std::size_t(k)];
            for (std::size_t d = 0; d < x.size(); ++d) x[d] = a * x[d] + b * eps_hat[d];
            check_finite_state(x, k + 1, cfg.grid.times[std::size_t(k) + 1], i);
            if (cfg.record_trajectory) out.trajectory[std::size_t(k) + 1][i] = x;
        }
        out.x0[i] = std::move(x);
    });
    return out;
}

SampleBatch ode_run(const ScoreOracle& oracle, const AnalyticWorld& world, const Vec& c,
                    const GuidanceRule& rule, const SamplerConfig& cfg,
                    const Gamma0Source* gamma0_source) {
    check_run_config(cfg, world, oracle, c);
    const GuidancePlan plan = make_plan(rule, cfg, c, world.dim, gamma0_source);
    const int K = cfg.grid.nfe();
    const bool euler = cfg.method == SamplerMethod::ODE_EULER;

    // Probability-flow right-hand side with the guided score of segment k.
    auto flow = [&](const Vec& x, double t, int k) {
        const Vec sc = oracle.score_cond_at(x, c, t);
        const Vec s_hat = plan.kind == GuidanceRule::Kind::none
                              ? sc
                              : plan.combine(sc, oracle.score_uncond_at(x, t), k);
        const double f = cfg.sched.f(t);
        const double half_g2 = 0.5 * cfg.sched.g2(t);
        Vec dx(x.size());
        for (std::size_t d = 0; d < x.size(); ++d) dx[d] = f * x[d] - half_g2 * s_hat[d];
        return dx;
    };

    SampleBatch out = make_batch_shell(cfg, world, c);
    const Rng root(cfg.seed);

    for_each_chain(cfg.batch, cfg.workers, [&](std::size_t i) {
        Vec x = initial_state(cfg, world, c, root, i);
        check_finite_state(x, 0, cfg.grid.T, i);
        if (cfg.record_trajectory) out.trajectory[0][i] = x;
        const std::size_t D = x.size();
        for (int k = 0; k < K; ++k) {
            const double t0 = cfg.grid.times[std::size_t(k)];
            const double t1 = cfg.grid.times[std::size_t(k) + 1];
            const double h = t1 - t0;
            if (euler) {
                const Vec k1 = flow(x, t0, k);
                for (std::size_t d = 0; d < D; ++d) x[d] += h * k1[d];
            } else {
                const double tm = t0 + 0.5 * h;
                const Vec k1 = flow(x, t0, k);
                Vec stage(D);
                for (std::size_t d = 0; d < D; ++d) stage[d] = x[d] + 0.5 * h * k1[d];
                const Vec k2 = flow(stage, tm, k);
                for (std::size_t d = 0; d < D; ++d) stage[d] = x[d] + 0.5 * h * k2[d];
                const Vec k3 = flow(stage, tm, k);
                for (std::size_t d = 0; d < D; ++d) stage[d] = x[d] + h * k3[d];
                const Vec k4 = flow(stage, t1, k);
                for (std::size_t d = 0; d < D; ++d) {
                    x[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
                }
            }
            check_finite_state(x, k + 1, t1, i);
            if (cfg.record_trajectory) out.trajectory[std::size_t(k) + 1][i] = x;
        }
        out.x0[i] = std::move(x);
    });
    return out;
}

std::string samples_to_csv(const SampleBatch& batch) {
    const std::size_t D = batch.c.size();
    std::string out = "chain,cond_id";
    for (std::size_t d = 0; d < D; ++d) out += ",x0_" + std::to_string(d);
    out += '\n';
    for (std::size_t i = 0; i < batch.x0.size(); ++i) {
        out += std::to_string(i);
        out += ',' + batch.cond_id;
        for (std::size_t d = 0; d < D; ++d) out += ',' + format_g17(batch.x0[i][d]);
        out += '\n';
    }
    return out;
}

}  // namespace recfg
