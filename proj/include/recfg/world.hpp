#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "recfg/rng.hpp"
#include "recfg/schedule.hpp"
#include "recfg/vec.hpp"

namespace recfg {

// Linear-Gaussian conditional data model with diagonal covariances:
// c ~ N(prior_mean, prior_var), x0 | c ~ N(c, cond_var), all per-dimension.
// Every per-time marginal is Gaussian, so scores and expectations have
// closed forms against which the Monte Carlo machinery can be checked.
struct AnalyticWorld {
    std::size_t dim = 1;
    Vec cond_var;    // v1
    Vec prior_mean;  // m_c
    Vec prior_var;   // v_c

    // The 1-d reference world: c ~ N(0,1), x0|c ~ N(c,1), so x0 ~ N(0,2).
    static AnalyticWorld toy();
    static AnalyticWorld make(Vec cond_var, Vec prior_mean, Vec prior_var);

    Vec marginal_var() const;  // v1 + v_c, the unconditional x0 variance
};

// Exact scores of the Gaussian marginals at time t.
Vec cond_score(const AnalyticWorld& w, const NoiseSchedule& s, const Vec& x, const Vec& c,
               double t);
Vec uncond_score(const AnalyticWorld& w, const NoiseSchedule& s, const Vec& x, double t);

// Closed-form mean of the unconditional noise prediction under the forward
// conditional marginal x_t ~ q_t(x_t | c) for the exact oracle:
// sigma_t * alpha_t * (c - m_c) / (alpha_t^2 (v1 + v_c) + sigma_t^2).
Vec mean_eps_uncond(const AnalyticWorld& w, const NoiseSchedule& s, const Vec& c, double t);

// Noise-prediction oracle: eps = -sigma_t * score for the exact variant;
// the perturbed variant emulates a learned model's bias on the conditional
// branch. Evaluation is pure, so instances are freely shared across threads.
class ScoreOracle {
public:
    virtual ~ScoreOracle() = default;
    virtual Vec eps_cond(const Vec& x, const Vec& c, double t) const = 0;
    virtual Vec eps_uncond(const Vec& x, double t) const = 0;
    virtual std::size_t dim() const = 0;
    // True when both branches are affine maps of x at fixed (c, t); lets the
    // shift analysis track expectations exactly through affine samplers.
    virtual bool affine_in_x() const = 0;

    // Score-space view, score = -eps / sigma_t, kept separate because the
    // probability-flow integrator evaluates it at t = 0 where the eps view
    // is singular; exact oracles supply forms regular there.
    virtual Vec score_cond_at(const Vec& x, const Vec& c, double t) const = 0;
    virtual Vec score_uncond_at(const Vec& x, double t) const = 0;

    // Writes both branch predictions into caller-owned buffers. The default
    // routes through the allocating virtuals; closed-form oracles override
    // it so the per-step sampler and table-build loops stay allocation-free.
    virtual void eps_pair_into(Vec& eps_c, Vec& eps_u, const Vec& x, const Vec& c,
                               double t) const {
        eps_c = eps_cond(x, c, t);
        eps_u = eps_uncond(x, t);
    }

    std::pair<Vec, Vec> eps_pair(const Vec& x, const Vec& c, double t) const {
        return {eps_cond(x, c, t), eps_uncond(x, t)};
    }
};

class ExactOracle final : public ScoreOracle {
public:
    ExactOracle(AnalyticWorld world, NoiseSchedule sched)
        : world_(std::move(world)), sched_(sched) {}

    Vec eps_cond(const Vec& x, const Vec& c, double t) const override;
    Vec eps_uncond(const Vec& x, double t) const override;
    void eps_pair_into(Vec& eps_c, Vec& eps_u, const Vec& x, const Vec& c,
                       double t) const override;
    std::size_t dim() const override { return world_.dim; }
    bool affine_in_x() const override { return true; }
    Vec score_cond_at(const Vec& x, const Vec& c, double t) const override;
    Vec score_uncond_at(const Vec& x, double t) const override;

    const AnalyticWorld& world() const { return world_; }
    const NoiseSchedule& sched() const { return sched_; }

private:
    AnalyticWorld world_;
    NoiseSchedule sched_;
};

// scale (x) eps_cond + bias on the conditional branch; unconditional branch
// passes through untouched. The minimal imperfection that makes the
// conditional expectation nonzero.
class PerturbedOracle final : public ScoreOracle {
public:
    PerturbedOracle(ExactOracle base, Vec bias, Vec scale);

    Vec eps_cond(const Vec& x, const Vec& c, double t) const override;
    Vec eps_uncond(const Vec& x, double t) const override;
    void eps_pair_into(Vec& eps_c, Vec& eps_u, const Vec& x, const Vec& c,
                       double t) const override;
    std::size_t dim() const override { return base_.dim(); }
    bool affine_in_x() const override { return true; }
    // scale (x) exact score - bias / sigma_t: the bias term keeps the
    // perturbed score singular at sigma = 0, so t = 0 is rejected there.
    Vec score_cond_at(const Vec& x, const Vec& c, double t) const override;
    Vec score_uncond_at(const Vec& x, double t) const override {
        return base_.score_uncond_at(x, t);
    }

private:
    ExactOracle base_;
    Vec bias_;
    Vec scale_;
};

// i.i.d. draws (x0, c) with c ~ q(c), x0 ~ q0(x0 | c). Deterministic pure
// function of the seed: pair i, dimension d uses counter i*D+d on the
// condition stream (child 0) and the data stream (child 1) of Rng(seed).
struct DataPair {
    Vec x0;
    Vec c;
};
std::vector<DataPair> sample_data(const AnalyticWorld& w, std::size_t n, std::uint64_t seed);

}  // namespace recfg
