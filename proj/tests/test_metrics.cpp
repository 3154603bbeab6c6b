#include <algorithm>
#include <cmath>
#include <numeric>

#include <doctest.h>

#include "recfg/metrics.hpp"
#include "recfg/rng.hpp"
#include "test_support.hpp"

using recfg::Vec;

namespace {

recfg::SampleBatch batch_of(std::vector<double> values) {
    recfg::SampleBatch b;
    b.c = {0.0};
    b.cond_id = "0";
    for (double v : values) b.x0.push_back({v});
    return b;
}

std::vector<double> gaussian_draws(std::size_t n, double mean, double sd, std::uint64_t seed) {
    const recfg::Rng rng(seed);
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) out[i] = mean + sd * rng.normal(i);
    return out;
}

double trapezoid(const recfg::DensityCurve& curve) {
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < curve.xs.size(); ++i) {
        area += 0.5 * (curve.pdf[i] + curve.pdf[i + 1]) * (curve.xs[i + 1] - curve.xs[i]);
    }
    return area;
}

double peak_location(const recfg::DensityCurve& curve) {
    const auto it = std::max_element(curve.pdf.begin(), curve.pdf.end());
    return curve.xs[std::size_t(it - curve.pdf.begin())];
}

}  // namespace

TEST_CASE("moments report unbiased statistics") {
    SUBCASE("constant batch has zero variance") {
        const auto m = recfg::moments(batch_of({2.5, 2.5, 2.5}));
        CHECK(m.mean[0] == 2.5);
        CHECK(m.var[0] == 0.0);
        CHECK(m.se_mean[0] == 0.0);
    }
    SUBCASE("two points use the n - 1 divisor") {
        const auto m = recfg::moments(batch_of({-1.0, 1.0}));
        CHECK(m.mean[0] == 0.0);
        CHECK(m.var[0] == 2.0);
        CHECK(m.se_mean[0] == doctest::Approx(1.0));
    }
    SUBCASE("a large standard normal batch concentrates") {
        const auto m = recfg::moments(batch_of(gaussian_draws(1000000, 0.0, 1.0, 7)));
        CHECK(std::abs(m.mean[0]) < 3e-3);
        CHECK(m.var[0] == doctest::Approx(1.0).epsilon(0.01));
    }
    SUBCASE("a single sample is rejected") {
        check_error_contains([] { recfg::moments(batch_of({1.0})); },
                             recfg::ErrorKind::validation, "at least 2");
    }
}

TEST_CASE("theory curves are normalized Gaussians in the right place") {
    SUBCASE("no guidance reduces to the data law") {
        const auto report = recfg::cfg_toy_distribution(1.0, 99.0);
        const auto curve = recfg::theory_density(report, 0.7, recfg::linspace(-8.0, 9.0, 2001));
        CHECK(curve.label == "ground-truth");
        CHECK(peak_location(curve) == doctest::Approx(0.7).epsilon(0.01));
        CHECK(trapezoid(curve) == doctest::Approx(1.0).epsilon(1e-3));
        // Spot-check against the hand-written N(0.7, 1) density.
        const double x = 1.3;
        const double expected = std::exp(-0.5 * (x - 0.7) * (x - 0.7)) / std::sqrt(2.0 * M_PI);
        const auto probe = recfg::theory_density(report, 0.7, {x});
        CHECK(probe.pdf[0] == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("strong guidance in the long-horizon limit peaks at twice c") {
        recfg::ShiftReport report;
        report.gamma1 = 3.0;
        report.gamma0 = -2.0;
        report.T = 1e6;
        report.mean_coeff = recfg::phi_limit(3.0);
        report.variance = 0.25;  // 2^{1-3} (T+1)^{-2} (T+2)^{2} -> 1/4
        report.source = recfg::ShiftSource::closed_form;
        CHECK(report.mean_coeff == doctest::Approx(2.0).epsilon(1e-9));
        const auto curve = recfg::theory_density(report, 1.0, recfg::linspace(-3.0, 7.0, 4001));
        CHECK(peak_location(curve) == doctest::Approx(2.0).epsilon(1e-3));
        CHECK(trapezoid(curve) == doctest::Approx(1.0).epsilon(1e-3));
    }
    SUBCASE("rectified coefficients concentrate hard around c") {
        recfg::ShiftReport report;
        report.gamma1 = 2.0;
        report.gamma0 = 0.0;
        report.T = 99.0;
        report.mean_coeff = 1.0;
        report.variance = recfg::recfg_variance(2.0, 0.0, 99.0);
        CHECK(report.variance == doctest::Approx(0.01).epsilon(1e-12));
        const auto curve = recfg::theory_density(report, 1.0, recfg::linspace(0.0, 2.0, 4001));
        CHECK(peak_location(curve) == doctest::Approx(1.0).epsilon(1e-3));
        CHECK(trapezoid(curve) == doctest::Approx(1.0).epsilon(1e-3));
        for (double p : curve.pdf) CHECK(p >= 0.0);
    }
    SUBCASE("non-positive variance is rejected") {
        check_error_contains(
            [] { recfg::gaussian_density(0.0, 0.0, {0.0, 1.0}, "x"); },
            recfg::ErrorKind::validation, "variance");
    }
}

TEST_CASE("the empirical-vs-Gaussian distance behaves like a goodness-of-fit score") {
    const auto draws = gaussian_draws(100000, 2.0, 3.0, 42);

    SUBCASE("samples from the reference pass at the 1% level") {
        const double ks = recfg::ks_distance(draws, 2.0, 9.0);
        CHECK(ks < recfg::ks_critical_1pct(draws.size()));
        const auto summary = recfg::ks_summary("self", draws, 2.0, 9.0);
        CHECK(summary.pass);
        CHECK(summary.n == draws.size());
    }
    SUBCASE("a five-sigma shift is essentially disjoint") {
        CHECK(recfg::ks_distance(draws, 2.0 + 15.0, 9.0) > 0.9);
    }
    SUBCASE("a batch against itself has zero distance") {
        CHECK(recfg::ks_distance(draws, draws) == 0.0);
    }
    SUBCASE("two independent batches from one law stay below the two-sample bound") {
        const auto other = gaussian_draws(100000, 2.0, 3.0, 43);
        // Two-sample critical value scales by sqrt((n+m)/(nm)).
        const double crit = std::sqrt(std::log(2.0 / 0.01) / 2.0) *
                            std::sqrt(2.0 / double(draws.size()));
        CHECK(recfg::ks_distance(draws, other) < crit);
    }
    SUBCASE("tiny batches are rejected") {
        check_error_contains([] { recfg::ks_distance({1.0, 2.0}, 0.0, 1.0); },
                             recfg::ErrorKind::validation, "at least 10");
    }
}

TEST_CASE("the unconditional expectation identity holds under the forward marginal") {
    const auto world = recfg::AnalyticWorld::toy();
    const auto sched = recfg::NoiseSchedule::ve();
    const recfg::ExactOracle exact(world, sched);

    SUBCASE("at t = 1") {
        const auto r = recfg::lemma2_residual(exact, world, sched, 1.0, 1000000, 11);
        CHECK(r.se[0] > 0.0);
        CHECK(std::abs(r.residual[0]) < 3.0 * r.se[0]);
    }
    SUBCASE("at the horizon t = 99") {
        const auto r = recfg::lemma2_residual(exact, world, sched, 99.0, 1000000, 12);
        CHECK(std::abs(r.residual[0]) < 3.0 * r.se[0]);
    }
    SUBCASE("a conditional-branch bias leaves the identity intact") {
        const recfg::PerturbedOracle biased(recfg::ExactOracle(world, sched), {0.4}, {1.2});
        const auto r = recfg::lemma2_residual(biased, world, sched, 1.0, 1000000, 13);
        CHECK(std::abs(r.residual[0]) < 3.0 * r.se[0]);
    }
    SUBCASE("sigma = 0 is rejected") {
        check_error_contains(
            [&] { recfg::lemma2_residual(exact, world, sched, 0.0, 100, 1); },
            recfg::ErrorKind::validation, "sigma");
    }
}

TEST_CASE("histograms cover the data and respect the bin override") {
    const auto draws = gaussian_draws(10000, 0.0, 1.0, 5);

    SUBCASE("automatic binning conserves the sample count") {
        const auto h = recfg::histogram(draws);
        CHECK(h.edges.size() == h.counts.size() + 1);
        CHECK(h.counts.size() > 10);  // Freedman-Diaconis at n = 10^4
        const auto total = std::accumulate(h.counts.begin(), h.counts.end(), std::int64_t(0));
        CHECK(total == std::int64_t(draws.size()));
        CHECK(h.edges.front() == *std::min_element(draws.begin(), draws.end()));
        CHECK(h.edges.back() == *std::max_element(draws.begin(), draws.end()));
    }
    SUBCASE("an explicit bin count wins") {
        const auto h = recfg::histogram(draws, 7);
        CHECK(h.counts.size() == 7);
    }
    SUBCASE("constant data degenerates to one unit-width bin") {
        const auto h = recfg::histogram({3.0, 3.0, 3.0}, 0);
        CHECK(h.counts == std::vector<std::int64_t>{3});
        CHECK(h.edges == std::vector<double>{2.5, 3.5});
    }
    SUBCASE("histogram shape matches the matching theory curve") {
        // Normalized bin heights track the Gaussian pdf: KS on the raw data
        // against the generating parameters passes at the 1% level.
        const auto summary = recfg::ks_summary("gauss", draws, 0.0, 1.0);
        CHECK(summary.pass);
    }
}

TEST_CASE("plot exports use the documented schemas") {
    SUBCASE("density rows are x,pdf,label") {
        const auto curve = recfg::gaussian_density(0.0, 1.0, {0.0, 0.5}, "demo");
        const std::string csv = recfg::density_csv(curve);
        CHECK(csv.rfind("x,pdf,label\n", 0) == 0);
        CHECK(csv.find(",demo\n") != std::string::npos);
        std::size_t rows = std::count(csv.begin(), csv.end(), '\n');
        CHECK(rows == 3);
    }
    SUBCASE("histogram rows are bin_left,bin_right,count") {
        const auto h = recfg::histogram({0.0, 1.0, 2.0, 3.0}, 2);
        const std::string csv = recfg::histogram_csv(h);
        CHECK(csv.rfind("bin_left,bin_right,count\n", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    }
    SUBCASE("summary rows carry the pass flag") {
        const auto s = recfg::ks_summary("demo", gaussian_draws(1000, 0.0, 1.0, 1), 0.0, 1.0);
        const std::string csv = recfg::ks_summary_csv({s});
        CHECK(csv.rfind("label,n,ks,critical_1pct,pass\n", 0) == 0);
        CHECK(csv.find("demo,1000,") != std::string::npos);
    }
    SUBCASE("the comparison file interleaves three curves and two histograms") {
        const auto plain = gaussian_draws(5000, 1.55, 0.7, 2);
        const auto rect = gaussian_draws(5000, 1.0, 0.1, 3);
        const std::string csv = recfg::comparison_csv(2.0, 99.0, 1.0, 0.0, plain, rect);
        CHECK(csv.rfind("label,kind,left,right,value\n", 0) == 0);
        for (const char* label : {"ground-truth", "plain-gamma-2", "rectified-g1-2-g0-0",
                                  "plain-empirical", "rectified-empirical"}) {
            CHECK(csv.find(label) != std::string::npos);
        }
    }
}
