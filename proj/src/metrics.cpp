#include "recfg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "recfg/errors.hpp"
#include "recfg/io.hpp"
#include "recfg/rng.hpp"

namespace recfg {

namespace {

std::string fmt_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

double gaussian_cdf(double x, double mean, double sd) {
    return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2));
}

// Linear-interpolation quantile of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double p) {
    const double pos = p * double(sorted.size() - 1);
    const std::size_t lo = std::size_t(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - double(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

Moments moments(const SampleBatch& batch) {
    const std::size_t n = batch.x0.size();
    require_valid(n >= 2, "moments need a batch of at least 2 samples, got " + std::to_string(n));
    const std::size_t dim = batch.x0.front().size();
    Moments out;
    out.mean.assign(dim, 0.0);
    out.var.assign(dim, 0.0);
    out.se_mean.assign(dim, 0.0);
    for (std::size_t d = 0; d < dim; ++d) {
        Accumulator sum;
        for (const Vec& row : batch.x0) sum.add(row[d]);
        const double m = sum.value() / double(n);
        Accumulator dev2;
        for (const Vec& row : batch.x0) dev2.add((row[d] - m) * (row[d] - m));
        const double var = dev2.value() / double(n - 1);
        out.mean[d] = m;
        out.var[d] = var;
        out.se_mean[d] = std::sqrt(var / double(n));
    }
    return out;
}

std::vector<double> column(const SampleBatch& batch, std::size_t d) {
    require_valid(!batch.x0.empty(), "cannot take a column of an empty batch");
    require_valid(d < batch.x0.front().size(),
                  "column index " + std::to_string(d) + " out of range for dimension " +
                      std::to_string(batch.x0.front().size()));
    std::vector<double> out(batch.x0.size(), 0.0);
    for (std::size_t i = 0; i < batch.x0.size(); ++i) out[i] = batch.x0[i][d];
    return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
    require_valid(count >= 2, "linspace needs at least 2 points");
    require_valid(hi > lo, "linspace needs hi > lo");
    std::vector<double> xs(count, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
        xs[i] = lo + (hi - lo) * double(i) / double(count - 1);
    }
    return xs;
}

DensityCurve gaussian_density(double mean, double var, std::vector<double> xs,
                              std::string label) {
    require_valid(var > 0.0 && std::isfinite(var), "density needs a positive finite variance");
    require_valid(!xs.empty(), "density needs a non-empty grid");
    DensityCurve curve;
    curve.xs = std::move(xs);
    curve.pdf.assign(curve.xs.size(), 0.0);
    curve.label = std::move(label);
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * var);
    for (std::size_t i = 0; i < curve.xs.size(); ++i) {
        const double z = curve.xs[i] - mean;
        curve.pdf[i] = norm * std::exp(-0.5 * z * z / var);
    }
    return curve;
}

std::string coeff_label(const ShiftReport& report) {
    if (report.gamma1 == 1.0 && report.gamma0 == 0.0) return "ground-truth";
    if (report.gamma0 == 1.0 - report.gamma1) return "plain-gamma-" + fmt_short(report.gamma1);
    return "rectified-g1-" + fmt_short(report.gamma1) + "-g0-" + fmt_short(report.gamma0);
}

DensityCurve theory_density(const ShiftReport& report, double c, std::vector<double> xs) {
    return gaussian_density(report.mean_coeff * c, report.variance, std::move(xs),
                            coeff_label(report));
}

double ks_distance(std::vector<double> samples, double mean, double var) {
    require_valid(samples.size() >= 10, "the one-sample distance needs at least 10 samples");
    require_valid(var > 0.0 && std::isfinite(var),
                  "the reference needs a positive finite variance");
    std::sort(samples.begin(), samples.end());
    const double n = double(samples.size());
    const double sd = std::sqrt(var);
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = gaussian_cdf(samples[i], mean, sd);
        d = std::max(d, std::max(f - double(i) / n, double(i + 1) / n - f));
    }
    return d;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    require_valid(a.size() >= 10 && b.size() >= 10,
                  "the two-sample distance needs at least 10 samples on each side");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double n = double(a.size());
    const double m = double(b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(double(i) / n - double(j) / m));
    }
    return d;
}

double ks_critical_1pct(std::size_t n) {
    return std::sqrt(std::log(2.0 / 0.01) / 2.0) / std::sqrt(double(n));
}

KsSummary ks_summary(std::string label, std::vector<double> samples, double mean, double var) {
    KsSummary s;
    s.label = std::move(label);
    s.n = samples.size();
    s.ks = ks_distance(std::move(samples), mean, var);
    s.critical_1pct = ks_critical_1pct(s.n);
    s.pass = s.ks < s.critical_1pct;
    return s;
}

Lemma2Result lemma2_residual(const ScoreOracle& oracle, const AnalyticWorld& world,
                             const NoiseSchedule& sched, double t, std::size_t mc_samples,
                             std::uint64_t seed) {
    const double alpha = sched.alpha(t);
    const double sigma = sched.sigma(t);
    require_valid(sigma > 0.0, "the identity check needs sigma > 0 (t = " + fmt_short(t) + ")");
    require_valid(mc_samples >= 2, "the identity check needs at least 2 samples");
    const std::size_t dim = world.dim;
    require_valid(oracle.dim() == dim, "oracle and world dimensions differ");

    const Rng root(seed);
    const Rng c_stream = root.child(0);
    const Rng x0_stream = root.child(1);
    const Rng eps_stream = root.child(2);

    std::vector<Accumulator> sum(dim);
    std::vector<Accumulator> sum_sq(dim);
    Vec c(dim, 0.0);
    Vec x0(dim, 0.0);
    Vec xt(dim, 0.0);
    for (std::size_t i = 0; i < mc_samples; ++i) {
        for (std::size_t d = 0; d < dim; ++d) {
            const std::uint64_t ctr = std::uint64_t(i) * dim + d;
            c[d] = world.prior_mean[d] + std::sqrt(world.prior_var[d]) * c_stream.normal(ctr);
            x0[d] = c[d] + std::sqrt(world.cond_var[d]) * x0_stream.normal(ctr);
            xt[d] = alpha * x0[d] + sigma * eps_stream.normal(ctr);
        }
        const Vec eps_u = oracle.eps_uncond(xt, t);
        for (std::size_t d = 0; d < dim; ++d) {
            // Paired per-draw difference between the model's prediction and
            // the identity's right-hand side, so the correlation between the
            // two terms tightens the standard error.
            const double rhs = xt[d] / sigma - alpha * x0[d] / sigma;
            const double r = eps_u[d] - rhs;
            sum[d].add(r);
            sum_sq[d].add(r * r);
        }
    }

    Lemma2Result out;
    out.residual.assign(dim, 0.0);
    out.se.assign(dim, 0.0);
    const double n = double(mc_samples);
    for (std::size_t d = 0; d < dim; ++d) {
        const double mean = sum[d].value() / n;
        const double var = std::max(0.0, (sum_sq[d].value() - n * mean * mean) / (n - 1.0));
        out.residual[d] = mean;
        out.se[d] = std::sqrt(var / n);
    }
    return out;
}

Histogram histogram(const std::vector<double>& samples, int bins) {
    require_valid(samples.size() >= 2, "a histogram needs at least 2 samples");
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front();
    const double hi = sorted.back();
    Histogram h;
    if (lo == hi) {
        h.edges = {lo - 0.5, lo + 0.5};
        h.counts = {std::int64_t(samples.size())};
        return h;
    }

    std::size_t k = 0;
    if (bins > 0) {
        k = std::size_t(bins);
    } else {
        const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
        const double width = 2.0 * iqr / std::cbrt(double(samples.size()));
        if (width <= 0.0) {
            k = std::size_t(std::ceil(std::sqrt(double(samples.size()))));
        } else {
            k = std::size_t(std::clamp(std::ceil((hi - lo) / width), 1.0, 4096.0));
        }
    }

    h.edges.assign(k + 1, 0.0);
    for (std::size_t i = 0; i <= k; ++i) h.edges[i] = lo + (hi - lo) * double(i) / double(k);
    h.edges.front() = lo;
    h.edges.back() = hi;
    h.counts.assign(k, 0);
    for (double x : samples) {
        const double pos = (x - lo) / (hi - lo) * double(k);
        const std::size_t idx = std::min(k - 1, std::size_t(std::max(0.0, pos)));
        ++h.counts[idx];
    }
    return h;
}

std::string density_csv(const DensityCurve& curve) {
    std::string out = "x,pdf,label\n";
    for (std::size_t i = 0; i < curve.xs.size(); ++i) {
        out += format_g17(curve.xs[i]);
        out += ',';
        out += format_g17(curve.pdf[i]);
        out += ',';
        out += curve.label;
        out += '\n';
    }
    return out;
}

std::string histogram_csv(const Histogram& hist) {
    std::string out = "bin_left,bin_right,count\n";
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        out += format_g17(hist.edges[i]);
        out += ',';
        out += format_g17(hist.edges[i + 1]);
        out += ',';
        out += std::to_string(hist.counts[i]);
        out += '\n';
    }
    return out;
}

std::string ks_summary_csv(const std::vector<KsSummary>& rows) {
    std::string out = "label,n,ks,critical_1pct,pass\n";
    for (const KsSummary& s : rows) {
        out += s.label;
        out += ',';
        out += std::to_string(s.n);
        out += ',';
        out += format_g17(s.ks);
        out += ',';
        out += format_g17(s.critical_1pct);
        out += ',';
        out += s.pass ? '1' : '0';
        out += '\n';
    }
    return out;
}

namespace {

void append_curve(std::string& out, const DensityCurve& curve) {
    for (std::size_t i = 0; i < curve.xs.size(); ++i) {
        out += curve.label;
        out += ",curve,";
        out += format_g17(curve.xs[i]);
        out += ',';
        out += format_g17(curve.xs[i]);
        out += ',';
        out += format_g17(curve.pdf[i]);
        out += '\n';
    }
}

void append_hist(std::string& out, const std::string& label, const Histogram& hist) {
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        out += label;
        out += ",hist,";
        out += format_g17(hist.edges[i]);
        out += ',';
        out += format_g17(hist.edges[i + 1]);
        out += ',';
        out += std::to_string(hist.counts[i]);
        out += '\n';
    }
}

}  // namespace

std::string comparison_csv(double gamma, double T, double c, double rect_gamma0,
                           const std::vector<double>& plain_samples,
                           const std::vector<double>& rect_samples) {
    require_valid(plain_samples.size() >= 2 && rect_samples.size() >= 2,
                  "the comparison needs at least 2 samples per method");

    const ShiftReport plain_law = cfg_toy_distribution(gamma, T);
    ShiftReport rect_law;
    rect_law.gamma1 = gamma;
    rect_law.gamma0 = rect_gamma0;
    rect_law.T = T;
    rect_law.mean_coeff = 1.0;  // annihilating gamma0 keeps the conditional mean
    rect_law.variance = recfg_variance(gamma, rect_gamma0, T);
    rect_law.source = ShiftSource::closed_form;

    // Cover every curve's 5-sigma range and the full sample spread.
    double lo = c - 5.0;
    double hi = c + 5.0;
    auto widen = [&](double mean, double var) {
        lo = std::min(lo, mean - 5.0 * std::sqrt(var));
        hi = std::max(hi, mean + 5.0 * std::sqrt(var));
    };
    widen(plain_law.mean_coeff * c, plain_law.variance);
    widen(rect_law.mean_coeff * c, rect_law.variance);
    for (double x : plain_samples) lo = std::min(lo, x), hi = std::max(hi, x);
    for (double x : rect_samples) lo = std::min(lo, x), hi = std::max(hi, x);
    const std::vector<double> xs = linspace(lo, hi, 512);

    std::string out = "label,kind,left,right,value\n";
    append_curve(out, gaussian_density(c, 1.0, xs, "ground-truth"));
    append_curve(out, theory_density(plain_law, c, xs));
    append_curve(out, theory_density(rect_law, c, xs));
    append_hist(out, "plain-empirical", histogram(plain_samples));
    append_hist(out, "rectified-empirical", histogram(rect_samples));
    return out;
}

}  // namespace recfg
