#include "recfg/world.hpp"

#include <cmath>
#include <string>

namespace recfg {

AnalyticWorld AnalyticWorld::toy() { return make({1.0}, {0.0}, {1.0}); }

AnalyticWorld AnalyticWorld::make(Vec cond_var, Vec prior_mean, Vec prior_var) {
    AnalyticWorld w;
    w.dim = cond_var.size();
    require_valid(w.dim >= 1, "world needs at least one dimension");
    require_dim(prior_mean, w.dim, "world prior_mean");
    require_dim(prior_var, w.dim, "world prior_var");
    for (std::size_t d = 0; d < w.dim; ++d) {
        require_valid(cond_var[d] > 0.0 && prior_var[d] > 0.0,
                      "world variances must be positive");
    }
    w.cond_var = std::move(cond_var);
    w.prior_mean = std::move(prior_mean);
    w.prior_var = std::move(prior_var);
    return w;
}

Vec AnalyticWorld::marginal_var() const {
    Vec out(dim);
    for (std::size_t d = 0; d < dim; ++d) out[d] = cond_var[d] + prior_var[d];
    return out;
}

Vec cond_score(const AnalyticWorld& w, const NoiseSchedule& s, const Vec& x, const Vec& c,
               double t) {
    require_dim(x, w.dim, "cond_score x");
    require_dim(c, w.dim, "cond_score c");
    const double a = s.alpha(t);
    const double s2 = s.sigma2(t);
    Vec out(w.dim);
    for (std::size_t d = 0; d < w.dim; ++d) {
        // x_t | c ~ N(alpha c, alpha^2 v1 + sigma^2) per dimension.
        out[d] = -(x[d] - a * c[d]) / (a * a * w.cond_var[d] + s2);
    }
    return out;
}

Vec uncond_score(const AnalyticWorld& w, const NoiseSchedule& s, const Vec& x, double t) {
    require_dim(x, w.dim, "uncond_score x");
    const double a = s.alpha(t);
    const double s2 = s.sigma2(t);
    Vec out(w.dim);
    for (std::size_t d = 0; d < w.dim; ++d) {
        out[d] = -(x[d] - a * w.prior_mean[d]) /
                 (a * a * (w.cond_var[d] + w.prior_var[d]) + s2);
    }
    return out;
}

Vec mean_eps_uncond(const AnalyticWorld& w, const NoiseSchedule& s, const Vec& c, double t) {
    require_dim(c, w.dim, "mean_eps_uncond c");
    const double a = s.alpha(t);
    const double sig = s.sigma(t);
    Vec out(w.dim);
    for (std::size_t d = 0; d < w.dim; ++d) {
        out[d] = sig * a * (c[d] - w.prior_mean[d]) /
                 (a * a * (w.cond_var[d] + w.prior_var[d]) + s.sigma2(t));
    }
    return out;
}

namespace {

void require_positive_sigma(const NoiseSchedule& s, double t) {
    if (!(s.sigma(t) > 0.0)) {
        fail_numeric("noise prediction is singular at sigma = 0 (t = " + std::to_string(t) + ")");
    }
}

}  // namespace

Vec ExactOracle::score_cond_at(const Vec& x, const Vec& c, double t) const {
    return cond_score(world_, sched_, x, c, t);
}

Vec ExactOracle::score_uncond_at(const Vec& x, double t) const {
    return uncond_score(world_, sched_, x, t);
}

Vec ExactOracle::eps_cond(const Vec& x, const Vec& c, double t) const {
    require_positive_sigma(sched_, t);
    Vec out = cond_score(world_, sched_, x, c, t);
    const double sig = sched_.sigma(t);
    for (double& v : out) v *= -sig;
    return out;
}

Vec ExactOracle::eps_uncond(const Vec& x, double t) const {
    require_positive_sigma(sched_, t);
    Vec out = uncond_score(world_, sched_, x, t);
    const double sig = sched_.sigma(t);
    for (double& v : out) v *= -sig;
    return out;
}

void ExactOracle::eps_pair_into(Vec& eps_c, Vec& eps_u, const Vec& x, const Vec& c,
                                double t) const {
    require_positive_sigma(sched_, t);
    require_dim(x, world_.dim, "eps_pair x");
    require_dim(c, world_.dim, "eps_pair c");
    const double a = sched_.alpha(t);
    const double s2 = sched_.sigma2(t);
    const double sig = sched_.sigma(t);
    eps_c.resize(world_.dim);
    eps_u.resize(world_.dim);
    for (std::size_t d = 0; d < world_.dim; ++d) {
        // Same arithmetic as the allocating branch evaluations: closed-form
        // score per dimension, then eps = -sigma * score.
        const double sc = -(x[d] - a * c[d]) / (a * a * world_.cond_var[d] + s2);
        const double su = -(x[d] - a * world_.prior_mean[d]) /
                          (a * a * (world_.cond_var[d] + world_.prior_var[d]) + s2);
        eps_c[d] = sc * -sig;
        eps_u[d] = su * -sig;
    }
}

PerturbedOracle::PerturbedOracle(ExactOracle base, Vec bias, Vec scale)
    : base_(std::move(base)), bias_(std::move(bias)), scale_(std::move(scale)) {
    require_dim(bias_, base_.dim(), "perturbed oracle bias");
    require_dim(scale_, base_.dim(), "perturbed oracle scale");
    for (double sc : scale_) require_valid(sc > 0.0, "perturbed oracle scale must be positive");
}

Vec PerturbedOracle::eps_cond(const Vec& x, const Vec& c, double t) const {
    Vec out = base_.eps_cond(x, c, t);
    for (std::size_t d = 0; d < out.size(); ++d) out[d] = scale_[d] * out[d] + bias_[d];
    return out;
}

Vec PerturbedOracle::eps_uncond(const Vec& x, double t) const { return base_.eps_uncond(x, t); }

void PerturbedOracle::eps_pair_into(Vec& eps_c, Vec& eps_u, const Vec& x, const Vec& c,
                                    double t) const {
    base_.eps_pair_into(eps_c, eps_u, x, c, t);
    for (std::size_t d = 0; d < eps_c.size(); ++d) eps_c[d] = scale_[d] * eps_c[d] + bias_[d];
}

Vec PerturbedOracle::score_cond_at(const Vec& x, const Vec& c, double t) const {
    Vec out = base_.score_cond_at(x, c, t);
    bool has_bias = false;
    for (double b : bias_) has_bias = has_bias || b != 0.0;
    double inv_sigma = 0.0;
    if (has_bias) {
        const double sig = base_.sched().sigma(t);
        if (!(sig > 0.0)) {
            fail_numeric("biased score is singular at sigma = 0 (t = " + std::to_string(t) + ")");
        }
        inv_sigma = 1.0 / sig;
    }
    for (std::size_t d = 0; d < out.size(); ++d) {
        out[d] = scale_[d] * out[d] - bias_[d] * inv_sigma;
    }
    return out;
}

std::vector<DataPair> sample_data(const AnalyticWorld& w, std::size_t n, std::uint64_t seed) {
    require_valid(n >= 1, "sample_data needs n >= 1");
    const Rng root(seed);
    const Rng c_stream = root.child(0);
    const Rng x0_stream = root.child(1);
    std::vector<DataPair> out(n);
    const std::size_t D = w.dim;
    for (std::size_t i = 0; i < n; ++i) {
        out[i].c.resize(D);
        out[i].x0.resize(D);
        for (std::size_t d = 0; d < D; ++d) {
            const std::uint64_t ctr = i * D + d;
            const double c = w.prior_mean[d] + std::sqrt(w.prior_var[d]) * c_stream.normal(ctr);
            out[i].c[d] = c;
            out[i].x0[d] = c + std::sqrt(w.cond_var[d]) * x0_stream.normal(ctr);
        }
    }
    return out;
}

}  // namespace recfg
