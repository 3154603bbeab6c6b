// Acceptance suite: nine numbered checks covering the terminal-mean
// coefficient, the guided/rectified sampling laws at figure scale, the
// expectation-drift prediction, the unconditional-expectation identity, and
// the lookup-table estimator. One line per criterion; exit 0 only when all
// pass. Statistical checks run with frozen seeds and bands sized from the
// estimators' own standard errors, so outcomes are bit-reproducible.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "recfg/lookup.hpp"
#include "recfg/metrics.hpp"
#include "recfg/samplers.hpp"
#include "recfg/shift.hpp"
#include "recfg/verify.hpp"

using namespace recfg;

namespace {

double now_s() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

struct Runner {
    int failures = 0;

    // limit_s <= 0 means the criterion has no runtime budget.
    void run(int idx, const char* name, double limit_s,
             const std::function<std::pair<bool, std::string>()>& fn) {
        const double t0 = now_s();
        bool pass = false;
        std::string detail;
        try {
            auto [p, d] = fn();
            pass = p;
            detail = std::move(d);
        } catch (const std::exception& e) {
            pass = false;
            detail = std::string("exception: ") + e.what();
        }
        const double secs = now_s() - t0;
        if (limit_s > 0.0) {
            if (secs >= limit_s) pass = false;
            detail += " [" + num(secs) + "s < " + num(limit_s) + "s]";
        }
        if (!pass) ++failures;
        std::printf("%s %d %s -- %s\n", pass ? "PASS" : "FAIL", idx, name, detail.c_str());
        std::fflush(stdout);
    }
};

// Shared state between the figure-scale criterion and the drift criterion:
// the drift check reuses the same guided batches instead of regenerating
// identical Monte Carlo runs.
struct GuidedRunStats {
    double gamma = 0.0;
    double mean = 0.0;
    double se_mean = 0.0;
};

}  // namespace

int main() {
    Runner r;
    const auto world = AnalyticWorld::toy();
    const auto sched = NoiseSchedule::ve();
    const ExactOracle oracle(world, sched);

    r.run(1, "terminal mean coefficient special values", 1.0, [&] {
        const double g1 = std::abs(phi_limit(1.0) - 1.0);
        const double g3 = std::abs(phi_limit(3.0) - 2.0);
        const double g5 = std::abs(phi_limit(5.0) - 7.0 / 3.0);
        const double worst = std::max({g1, g3, g5});
        return std::pair{worst <= 1e-9, "max |phi - exact| = " + num(worst) +
                                            " at arguments 1, 3, 5 (tolerance 1e-9)"};
    });

    r.run(2, "mean-coefficient recurrence", 10.0, [&] {
        double worst = 0.0;
        for (int i = 0; i <= 16; ++i) {
            const double g = 1.0 + 0.25 * i;
            worst = std::max(worst, std::abs(phi_recurrence_residual(g)));
        }
        return std::pair{worst <= 1e-8,
                         "max residual " + num(worst) + " over [1, 5] step 0.25 (tolerance 1e-8)"};
    });

    r.run(3, "closed forms match the quadrature limit", 0.0, [&] {
        double worst_odd = 0.0;
        for (int n = 0; n <= 6; ++n) {
            worst_odd = std::max(worst_odd, std::abs(phi_closed_odd(n) - phi_limit(2.0 * n + 1.0)));
        }
        const double even_gap = std::abs(phi_closed_even(1) - phi_limit(2.0));
        const double pin_gap = std::abs(phi_closed_even(1) - 1.623225);
        const bool ok = worst_odd <= 1e-8 && even_gap <= 1e-9 && pin_gap <= 1e-6;
        return std::pair{ok, "odd gap " + num(worst_odd) + " (1e-8), even gap " + num(even_gap) +
                                 " (1e-9), pinned value gap " + num(pin_gap) + " (1e-6)"};
    });

    r.run(4, "mean-coefficient bounds on a fine grid", 0.0, [&] {
        int checked = 0;
        for (int i = 10; i <= 80; ++i) {
            if (!phi_bounds_check(0.1 * i)) {
                return std::pair{false, "bound violated at gamma = " + num(0.1 * i)};
            }
            ++checked;
        }
        return std::pair{true, num(checked) + " grid points over [1, 8] step 0.1"};
    });

    // ---- figure-scale sampling: shared configuration -----------------------
    const auto grid = TimeGrid::uniform_sigma(sched, 99.0, 4096, 1e-3);
    const Vec c{1.0};
    const double c0 = c[0];
    const double T = 99.0;
    const std::size_t batch = 100000;
    const std::uint64_t table_seed = 1000;
    const std::uint64_t run_base = 4000;
    const double gammas[3] = {1.5, 2.0, 2.5};
    std::vector<GuidedRunStats> guided_stats;

    r.run(5, "guided and rectified laws at figure scale", 300.0, [&] {
        const auto table =
            build_from_oracle(oracle, world, sched, grid, 250000, {c}, table_seed, 1);
        const std::string cid = table.cond_order[0];
        const auto& st = table.stats.at(cid);
        const double n_tab = double(table.counts.at(cid));
        const int nfe = grid.nfe();
        const std::size_t K = std::size_t(nfe);

        double worst_plain_mean = 0.0, worst_plain_var = 0.0, worst_plain_ks = 0.0;
        double worst_rect_mean = 0.0, worst_rect_var = 0.0, worst_rect_ks = 0.0;
        for (int gi = 0; gi < 3; ++gi) {
            const double g = gammas[gi];
            SamplerConfig sc;
            sc.sched = sched;
            sc.grid = grid;
            sc.batch = batch;
            sc.workers = 1;

            // Plain guidance against its closed-form law.
            sc.seed = run_base + std::uint64_t(gi);
            const auto plain = ddim_run(oracle, world, c, GuidanceRule::cfg_rule(g), sc);
            const auto pm = moments(plain);
            const auto law = cfg_toy_distribution(g, T);
            const double mean_tgt = c0 * law.mean_coeff;
            const double mean_rel = std::abs(pm.mean[0] - mean_tgt) / std::abs(mean_tgt);
            const double var_rel = std::abs(pm.var[0] - law.variance) / law.variance;
            const auto pks = ks_summary("plain", column(plain), mean_tgt, law.variance);
            guided_stats.push_back({g, pm.mean[0], pm.se_mean[0]});

            // Rectified run resolving gamma0 from the table at every step.
            const Vec g1{g};
            auto src = table_gamma0_source(table, g1, grid, ClampMode::off);
            sc.seed = run_base + 100 + std::uint64_t(gi);
            const auto rect =
                ddim_run(oracle, world, c, GuidanceRule::recfg_rule(g1), sc, &src);
            const auto rm = moments(rect);

            // Realized per-step gamma0 and its variance-integral average.
            std::vector<double> g0k(K);
            double wsum = 0.0, g0sum = 0.0;
            for (int k = 0; k < nfe; ++k) {
                const double tk = grid.times[std::size_t(k)];
                const double tk1 = grid.times[std::size_t(k) + 1];
                g0k[std::size_t(k)] = src.resolve(cid, k, tk)[0];
                const double w = std::log((2.0 + tk) / (2.0 + tk1));
                g0sum += w * g0k[std::size_t(k)];
                wsum += w;
            }
            const double g0_bar = g0sum / wsum;
            const double var_tgt = recfg_variance(g, g0_bar, T);

            // The oracle is affine in the state, so the drift recursion gives
            // the exact mean of the rectified law realized by this table.
            const std::function<GuidanceCoefficients(int)> coeffs_at = [&](int k) {
                GuidanceCoefficients cc;
                cc.gamma1 = Vec{g};
                cc.gamma0 = Vec{g0k[std::size_t(k)]};
                return cc;
            };
            const auto states = drift_propagate(oracle, sched, coeffs_at, grid, c, 1, 0, nullptr);
            const double m_pred = c0 - states.back().delta[0];

            // Sensitivity of the terminal mean to each step's gamma0 from one
            // pass over the affine recursion (eps_c(x) = p x + q and
            // eps_u(x) = r x + u give mean' = [a + b(g p + g0 r)] mean
            // + b (g q + g0 u)), then suffix products.
            std::vector<double> A(K), dmean(K);
            double mu = sched.alpha(grid.T) * c0;
            for (int k = 0; k < nfe; ++k) {
                const double tk = grid.times[std::size_t(k)];
                const double tk1 = grid.times[std::size_t(k) + 1];
                const auto [a, b] = ddim_step_coeffs(sched, tk, tk1);
                const double q = oracle.eps_cond(Vec{0.0}, c, tk)[0];
                const double p = oracle.eps_cond(Vec{1.0}, c, tk)[0] - q;
                const double u = oracle.eps_uncond(Vec{0.0}, tk)[0];
                const double rr = oracle.eps_uncond(Vec{1.0}, tk)[0] - u;
                A[std::size_t(k)] = a + b * (g * p + g0k[std::size_t(k)] * rr);
                dmean[std::size_t(k)] = b * (rr * mu + u);
                mu = A[std::size_t(k)] * mu + b * (g * q + g0k[std::size_t(k)] * u);
            }
            double suffix = 1.0, lin = 0.0, var_tab = 0.0;
            for (int k = nfe - 1; k >= 0; --k) {
                const double s_k = dmean[std::size_t(k)] * suffix;
                suffix *= A[std::size_t(k)];
                lin += s_k * g0k[std::size_t(k)];
                // Delta-method variance of this cell's ratio from the stored
                // branch moments; cells are built from disjoint draw streams
                // and are therefore independent.
                const double rat = table.ratios.at(cid)[std::size_t(k)][0];
                const double mc = st.mean_cond[std::size_t(k)][0];
                const double mu_u = st.mean_uncond[std::size_t(k)][0];
                const double var_c = st.m2_cond[std::size_t(k)][0] - mc * mc;
                const double var_u = st.m2_uncond[std::size_t(k)][0] - mu_u * mu_u;
                const double cov = st.m_cross[std::size_t(k)][0] - mc * mu_u;
                const double var_ratio =
                    std::max(0.0, var_c - 2.0 * rat * cov + rat * rat * var_u) /
                    (n_tab * mu_u * mu_u);
                var_tab += s_k * s_k * (1.0 - g) * (1.0 - g) * var_ratio;
            }
            // Internal consistency: the recursion is linear in each step's
            // gamma0, so the sensitivity reconstruction must match the drift
            // prediction to rounding.
            if (std::abs(m_pred - (c0 + lin)) > 1e-7 || std::abs(m_pred - mu) > 1e-12) {
                return std::pair{false, "sensitivity pass disagrees with drift recursion at "
                                        "gamma " + num(g)};
            }

            // The mean target is the ground-truth conditional mean; its error
            // budget combines the sampler's Monte Carlo noise with the
            // table-estimation noise propagated through the sensitivities.
            const double se_comb =
                std::sqrt(rm.se_mean[0] * rm.se_mean[0] + var_tab);
            const double rect_mean_sig = std::abs(rm.mean[0] - c0) / se_comb;
            const double rect_var_rel = std::abs(rm.var[0] - var_tgt) / var_tgt;
            // Shape check against the law the realized coefficients define.
            const auto rks = ks_summary("rect", column(rect), m_pred, var_tgt);

            worst_plain_mean = std::max(worst_plain_mean, mean_rel);
            worst_plain_var = std::max(worst_plain_var, var_rel);
            worst_plain_ks = std::max(worst_plain_ks, pks.ks / pks.critical_1pct);
            worst_rect_mean = std::max(worst_rect_mean, rect_mean_sig);
            worst_rect_var = std::max(worst_rect_var, rect_var_rel);
            worst_rect_ks = std::max(worst_rect_ks, rks.ks / rks.critical_1pct);
        }
        const bool ok = worst_plain_mean <= 0.01 && worst_plain_var <= 0.02 &&
                        worst_plain_ks < 1.0 && worst_rect_mean <= 3.0 &&
                        worst_rect_var <= 0.02 && worst_rect_ks < 1.0;
        return std::pair{
            ok, "plain worst: mean " + num(100 * worst_plain_mean) + "% (<1%), var " +
                    num(100 * worst_plain_var) + "% (<2%), ks " + num(worst_plain_ks) +
                    "x crit; rectified worst: mean " + num(worst_rect_mean) +
                    " combined se (<3), var " + num(100 * worst_rect_var) + "% (<2%), ks " +
                    num(worst_rect_ks) + "x crit"};
    });

    r.run(6, "expectation-drift prediction matches sampling", 120.0, [&] {
        if (guided_stats.size() != 3) {
            return std::pair{false, std::string("figure-scale batches unavailable")};
        }
        double worst = 0.0;
        for (const auto& gs : guided_stats) {
            GuidanceCoefficients cc;
            cc.gamma1 = Vec{gs.gamma};
            cc.gamma0 = Vec{1.0 - gs.gamma};
            const auto states = drift_propagate(oracle, sched, cc, grid, c);
            const double pred = states.back().delta[0];
            const double actual = c0 - gs.mean;
            worst = std::max(worst, std::abs(pred - actual) / gs.se_mean);
        }
        return std::pair{worst <= 3.0, "max |predicted - sampled| = " + num(worst) +
                                           " se (<3), reusing the figure-scale batches"};
    });

    r.run(7, "unconditional expectation identity across noise levels", 0.0, [&] {
        const double ts[4] = {0.1, 1.0, 10.0, 99.0};
        double worst = 0.0;
        for (int i = 0; i < 4; ++i) {
            const auto res = lemma2_residual(oracle, world, sched, ts[i], 1000000,
                                             700 + std::uint64_t(i));
            worst = std::max(worst, std::abs(res.residual[0]) / res.se[0]);
        }
        return std::pair{worst <= 3.0, "max |residual|/se = " + num(worst) +
                                           " (<3) at four noise levels, n = 1e6"};
    });

    r.run(8, "table ratio convergence, analytic pin, determinism, persistence", 0.0, [&] {
        // (a) Monte Carlo convergence of exact-oracle ratios: the root-mean
        // -square cell ratio must fall like n^{-1/2}.
        const auto small_grid = TimeGrid::uniform_sigma(sched, 3.0, 16, 1e-3);
        std::vector<double> log_n, log_rms;
        for (int i = 0; i < 4; ++i) {
            const std::size_t n = std::size_t(std::pow(10.0, 3 + i));
            const auto t =
                build_from_oracle(oracle, world, sched, small_grid, n, {c}, 900 + i, 1);
            double sq = 0.0;
            const auto& ratios = t.ratios.at(t.cond_order[0]);
            for (const auto& row : ratios) sq += row[0] * row[0];
            log_n.push_back(std::log(double(n)));
            log_rms.push_back(0.5 * std::log(sq / double(ratios.size())));
        }
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            sx += log_n[i];
            sy += log_rms[i];
            sxx += log_n[i] * log_n[i];
            sxy += log_n[i] * log_rms[i];
        }
        const double slope = (4.0 * sxy - sx * sy) / (4.0 * sxx - sx * sx);
        if (!(slope >= -0.65 && slope <= -0.35)) {
            return std::pair{false, "convergence slope " + num(slope) + " outside [-0.65, -0.35]"};
        }

        // (b) A biased oracle's ratio against its closed-form value at unit
        // time: bias 0.1 over an unconditional mean of 1/3 gives 0.3.
        const PerturbedOracle biased(ExactOracle(world, sched), {0.1}, {1.0});
        const auto pin_grid = TimeGrid::from_times(sched, {3.0, 1.0, 0.0});
        const auto pin =
            build_from_oracle(biased, world, sched, pin_grid, 1000000, {c}, 905, 1);
        const std::string cid = pin.cond_order[0];
        const double rat = pin.ratios.at(cid)[1][0];
        const auto& st = pin.stats.at(cid);
        const double mc = st.mean_cond[1][0], mu_u = st.mean_uncond[1][0];
        const double var_c = st.m2_cond[1][0] - mc * mc;
        const double var_u = st.m2_uncond[1][0] - mu_u * mu_u;
        const double cov = st.m_cross[1][0] - mc * mu_u;
        const double se = std::sqrt(
            std::max(0.0, var_c - 2.0 * rat * cov + rat * rat * var_u) /
            (double(pin.counts.at(cid)) * mu_u * mu_u));
        const double pin_sig = std::abs(rat - 0.3) / se;
        if (pin_sig > 3.0) {
            return std::pair{false, "biased-oracle ratio " + num(rat) + " is " + num(pin_sig) +
                                        " se from 0.3"};
        }

        // (c) Builds are byte-identical for any worker count.
        const auto t1 = build_from_oracle(oracle, world, sched, small_grid, 50000, {c}, 906, 1);
        const auto t8 = build_from_oracle(oracle, world, sched, small_grid, 50000, {c}, 906, 8);
        if (table_to_json(t1) != table_to_json(t8)) {
            return std::pair{false, std::string("1-worker and 8-worker builds differ")};
        }

        // (d) Exact persistence round-trip.
        if (table_from_json(table_to_json(t1)) != t1) {
            return std::pair{false, std::string("table round-trip changed the table")};
        }
        return std::pair{true, "slope " + num(slope) + " in [-0.65, -0.35]; pinned ratio " +
                                   num(rat) + " at " + num(pin_sig) +
                                   " se (<3); worker-count byte-identity and exact round-trip"};
    });

    r.run(9, "scope note and full verification suite", 0.0, [&] {
        std::printf(
            "note: benchmark-scale image-model results are out of scope for this analytic "
            "reference world; the closed-form and property checks above stand in for them.\n");
        const auto results = verify_suite(1);
        int passed = 0;
        for (const auto& cr : results) passed += cr.pass ? 1 : 0;
        return std::pair{all_passed(results),
                         num(passed) + "/" + num(double(results.size())) + " verification checks"};
    });

    if (r.failures == 0) {
        std::printf("acceptance: all 9 criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criteria FAILED\n", r.failures);
    return 1;
}
