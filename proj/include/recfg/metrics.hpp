#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recfg/samplers.hpp"
#include "recfg/shift.hpp"
#include "recfg/world.hpp"

namespace recfg {

// Tabulated probability density, ready for plotting next to a histogram.
struct DensityCurve {
    std::vector<double> xs;
    std::vector<double> pdf;
    std::string label;
};

// Equal-width binning of a scalar sample column; edges has counts.size() + 1
// entries, each bin is [edges[i], edges[i+1]) with the last bin closed.
struct Histogram {
    std::vector<double> edges;
    std::vector<std::int64_t> counts;
};

struct Moments {
    Vec mean;
    Vec var;      // unbiased (n - 1 divisor)
    Vec se_mean;  // sqrt(var / n)
};

struct KsSummary {
    std::string label;
    std::size_t n = 0;
    double ks = 0.0;
    double critical_1pct = 0.0;
    bool pass = false;
};

// Per-dimension mean, unbiased variance, and standard error of a batch.
Moments moments(const SampleBatch& batch);

// One scalar coordinate of a batch, for the 1-d plotting and test paths.
std::vector<double> column(const SampleBatch& batch, std::size_t d = 0);

// Gaussian density over the given abscissae.
DensityCurve gaussian_density(double mean, double var, std::vector<double> xs,
                              std::string label);

// Curve of the terminal law summarized by a shift report, centered at
// mean_coeff * c. The label is derived from the coefficients.
DensityCurve theory_density(const ShiftReport& report, double c, std::vector<double> xs);

// Human-readable legend name for a coefficient configuration.
std::string coeff_label(const ShiftReport& report);

// Evenly spaced abscissae covering [lo, hi].
std::vector<double> linspace(double lo, double hi, std::size_t count);

// Sup-norm distance between the empirical CDF of the samples and a Gaussian
// CDF (one-sample), or between two empirical CDFs (two-sample).
double ks_distance(std::vector<double> samples, double mean, double var);
double ks_distance(std::vector<double> a, std::vector<double> b);

// Asymptotic 1% critical value sqrt(ln(2/alpha)/2)/sqrt(n) for the
// one-sample statistic.
double ks_critical_1pct(std::size_t n);

KsSummary ks_summary(std::string label, std::vector<double> samples, double mean, double var);

// Monte Carlo check of the unconditional-branch expectation identity
//   E[eps_uncond(x_t)] = (1/sigma_t) E[x_t] - (alpha_t/sigma_t) E[x0]
// under the forward marginal (x0 from the unconditional data law, x_t from
// the forward transition). Returns the per-dimension paired residual and
// its standard error; the residual is zero in expectation for any oracle
// whose unconditional branch is the exact posterior mean.
struct Lemma2Result {
    Vec residual;
    Vec se;
};
Lemma2Result lemma2_residual(const ScoreOracle& oracle, const AnalyticWorld& world,
                             const NoiseSchedule& sched, double t, std::size_t mc_samples,
                             std::uint64_t seed);

// Equal-width histogram; bins <= 0 selects the Freedman-Diaconis width
// (falling back to a square-root rule when the IQR is zero).
Histogram histogram(const std::vector<double>& samples, int bins = 0);

// CSV exports. Curves: x,pdf,label. Histograms: bin_left,bin_right,count.
// KS summaries: label,n,ks,critical_1pct,pass.
std::string density_csv(const DensityCurve& curve);
std::string histogram_csv(const Histogram& hist);
std::string ks_summary_csv(const std::vector<KsSummary>& rows);

// One-file comparison data for a single guidance strength: ground-truth,
// plain-guidance, and rectified terminal curves plus the two empirical
// histograms, in a long format (label,kind,left,right,value) where curve
// rows carry x twice with the pdf as value and histogram rows carry the bin
// bounds with the count as value.
std::string comparison_csv(double gamma, double T, double c, double rect_gamma0,
                           const std::vector<double>& plain_samples,
                           const std::vector<double>& rect_samples);

}  // namespace recfg
