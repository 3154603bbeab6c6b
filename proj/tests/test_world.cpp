#include <doctest.h>

#include <cmath>
#include <vector>

#include "recfg/errors.hpp"
#include "recfg/rng.hpp"
#include "recfg/world.hpp"

using recfg::AnalyticWorld;
using recfg::ExactOracle;
using recfg::NoiseSchedule;
using recfg::PerturbedOracle;
using recfg::Rng;
using recfg::Vec;

TEST_CASE("conditional score of the reference world") {
    const auto w = AnalyticWorld::toy();
    const auto ve = NoiseSchedule::ve();
    CHECK(recfg::cond_score(w, ve, {0.7}, {0.7}, 2.3)[0] == 0.0);
    CHECK(recfg::cond_score(w, ve, {1.5}, {0.5}, 0.0)[0] == -1.0);  // -(x-c)/(1+t)
    CHECK(recfg::cond_score(w, ve, {2.0}, {0.0}, 3.0)[0] == -0.5);
    CHECK_THROWS_AS(recfg::cond_score(w, ve, {1.0, 2.0}, {0.0}, 1.0), recfg::Error);
}

TEST_CASE("unconditional score of the reference world") {
    const auto w = AnalyticWorld::toy();
    const auto ve = NoiseSchedule::ve();
    CHECK(recfg::uncond_score(w, ve, {0.0}, 5.0)[0] == 0.0);
    CHECK(recfg::uncond_score(w, ve, {2.0}, 0.0)[0] == -1.0);  // -x/(2+t)
    CHECK(recfg::uncond_score(w, ve, {4.0}, 2.0)[0] == -1.0);
}

TEST_CASE("posterior-averaged conditional score reproduces the marginal score") {
    // For the Gaussian world the c-posterior at time t is available in
    // closed form, and averaging the conditional score under it must give
    // the unconditional score exactly.
    const auto w = AnalyticWorld::make({0.7, 2.0}, {0.3, -1.0}, {1.5, 0.25});
    const auto vp = NoiseSchedule::vp(0.1, 20.0);
    const Vec x{1.2, -0.4};
    const double t = 0.6;
    const auto [a, sig] = vp.eval(t);
    Vec posterior_mean(2);
    for (int d = 0; d < 2; ++d) {
        const double big = a * a * (w.cond_var[d] + w.prior_var[d]) + sig * sig;
        posterior_mean[d] =
            w.prior_mean[d] + w.prior_var[d] * a * (x[d] - a * w.prior_mean[d]) / big;
    }
    const Vec avg_cond = recfg::cond_score(w, vp, x, posterior_mean, t);
    const Vec uncond = recfg::uncond_score(w, vp, x, t);
    for (int d = 0; d < 2; ++d) CHECK(avg_cond[d] == doctest::Approx(uncond[d]).epsilon(1e-12));
}

TEST_CASE("noise-prediction pairs from the exact oracle") {
    const ExactOracle oracle(AnalyticWorld::toy(), NoiseSchedule::ve());
    const auto [ec0, eu0] = oracle.eps_pair({0.7}, {0.7}, 1.0);
    CHECK(ec0[0] == 0.0);
    CHECK(eu0[0] ==
          -1.0 * recfg::uncond_score(AnalyticWorld::toy(), NoiseSchedule::ve(), {0.7}, 1.0)[0]);
    const auto [ec, eu] = oracle.eps_pair({1.0}, {0.0}, 1.0);
    CHECK(ec[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(eu[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(oracle.eps_pair({1.0}, {0.0}, 0.0), recfg::Error);  // sigma = 0
}

TEST_CASE("perturbed oracle biases only the conditional branch") {
    const ExactOracle base(AnalyticWorld::toy(), NoiseSchedule::ve());
    const PerturbedOracle oracle(base, {0.1}, {1.0});
    const auto [ec, eu] = oracle.eps_pair({0.7}, {0.7}, 1.0);
    CHECK(ec[0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(eu[0] == base.eps_uncond({0.7}, 1.0)[0]);
    // A scale of 2 doubles the exact conditional prediction before biasing.
    const PerturbedOracle oracle2(base, {-0.05}, {2.0});
    CHECK(oracle2.eps_cond({1.0}, {0.0}, 1.0)[0] ==
          doctest::Approx(2.0 * 0.5 - 0.05).epsilon(1e-15));
}

TEST_CASE("data sampling is reproducible with converging moments") {
    const auto w = AnalyticWorld::toy();
    const std::size_t n = 1000000;
    const auto pairs = sample_data(w, n, 123);
    const auto pairs2 = sample_data(w, n, 123);
    CHECK(pairs[0].x0 == pairs2[0].x0);
    CHECK(pairs[n - 1].c == pairs2[n - 1].c);
    CHECK(sample_data(w, 2, 124)[0].c != pairs[0].c);

    double mean_c = 0.0, mean_x0 = 0.0;
    for (const auto& p : pairs) {
        mean_c += p.c[0];
        mean_x0 += p.x0[0];
    }
    mean_c /= double(n);
    mean_x0 /= double(n);
    double var_x0 = 0.0;
    for (const auto& p : pairs) var_x0 += (p.x0[0] - mean_x0) * (p.x0[0] - mean_x0);
    var_x0 /= double(n - 1);
    CHECK(std::abs(mean_c) < 4e-3);           // 3 sigma / sqrt(n) + margin
    CHECK(var_x0 == doctest::Approx(2.0).epsilon(0.02));  // x0 ~ N(0, 2)
}

TEST_CASE("conditional noise prediction averages to zero on forward draws") {
    const auto w = AnalyticWorld::toy();
    const auto ve = NoiseSchedule::ve();
    const ExactOracle oracle(w, ve);
    const Vec c{1.3};
    const double t = 2.0;
    const Rng noise = Rng(777).child(9);
    const std::size_t n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec x0{c[0] + noise.normal(2 * i)};  // x0 ~ N(c, 1)
        const Vec xt = recfg::forward_perturb(ve, x0, t, {noise.normal(2 * i + 1)});
        const double e = oracle.eps_cond(xt, c, t)[0];
        sum += e;
        sumsq += e * e;
    }
    const double mean = sum / double(n);
    const double se = std::sqrt((sumsq / double(n) - mean * mean) / double(n));
    CHECK(std::abs(mean) < 3.0 * se + 1e-12);
}

TEST_CASE("unconditional noise prediction obeys the expectation identity") {
    // E[eps_uncond(x_t)] = (1/sigma) E[x_t] - (alpha/sigma) E[x0] under the
    // joint forward draw; tested on the paired Monte Carlo difference.
    const auto w = AnalyticWorld::toy();
    const auto ve = NoiseSchedule::ve();
    const ExactOracle oracle(w, ve);
    const double t = 1.7;
    const auto [a, sig] = ve.eval(t);
    const auto pairs = sample_data(w, 200000, 991);
    const Rng noise = Rng(991).child(2);
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const Vec xt = recfg::forward_perturb(ve, pairs[i].x0, t, {noise.normal(i)});
        const double lhs = oracle.eps_uncond(xt, t)[0];
        const double rhs = xt[0] / sig - a * pairs[i].x0[0] / sig;
        const double diff = lhs - rhs;
        sum += diff;
        sumsq += diff * diff;
    }
    const double n = double(pairs.size());
    const double mean = sum / n;
    const double se = std::sqrt((sumsq / n - mean * mean) / n);
    CHECK(std::abs(mean) < 3.0 * se + 1e-12);
}

TEST_CASE("closed-form unconditional prediction mean matches Monte Carlo") {
    const auto w = AnalyticWorld::toy();
    const auto ve = NoiseSchedule::ve();
    const ExactOracle oracle(w, ve);
    const Vec c{1.0};
    const double t = 1.0;
    CHECK(recfg::mean_eps_uncond(w, ve, c, t)[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    const Rng noise = Rng(55).child(4);
    const std::size_t n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec x0{c[0] + noise.normal(2 * i)};
        const Vec xt = recfg::forward_perturb(ve, x0, t, {noise.normal(2 * i + 1)});
        const double e = oracle.eps_uncond(xt, t)[0];
        sum += e;
        sumsq += e * e;
    }
    const double mean = sum / double(n);
    const double se = std::sqrt((sumsq / double(n) - mean * mean) / double(n));
    CHECK(std::abs(mean - 1.0 / 3.0) < 3.0 * se);
}

TEST_CASE("world construction is validated") {
    CHECK_THROWS_AS(AnalyticWorld::make({1.0, -1.0}, {0.0, 0.0}, {1.0, 1.0}), recfg::Error);
    CHECK_THROWS_AS(AnalyticWorld::make({1.0}, {0.0, 0.0}, {1.0}), recfg::Error);
    const auto w = AnalyticWorld::make({1.0, 2.0}, {0.0, 1.0}, {0.5, 0.5});
    CHECK(w.marginal_var() == Vec{1.5, 2.5});
}
