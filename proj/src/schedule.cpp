#include "recfg/schedule.hpp"

#include <cmath>
#include <string>

namespace recfg {

NoiseSchedule NoiseSchedule::vp(double beta_min, double beta_max) {
    require_valid(beta_min > 0.0 && beta_max >= beta_min,
                  "VP schedule needs 0 < beta_min <= beta_max");
    return NoiseSchedule{Kind::VP, beta_min, beta_max};
}

namespace {

double vp_log_alpha(const NoiseSchedule& s, double t) {
    return -0.25 * t * t * (s.beta_max - s.beta_min) - 0.5 * t * s.beta_min;
}

double vp_beta(const NoiseSchedule& s, double t) {
    return s.beta_min + t * (s.beta_max - s.beta_min);
}

void require_time(double t) {
    if (!(t >= 0.0)) fail_validation("schedule time must be >= 0, got " + std::to_string(t));
}

}  // namespace

double NoiseSchedule::alpha(double t) const {
    require_time(t);
    if (kind == Kind::VE) return 1.0;
    return std::exp(vp_log_alpha(*this, t));
}

double NoiseSchedule::sigma(double t) const {
    require_time(t);
    if (kind == Kind::VE) return std::sqrt(t);
    // sqrt(1 - alpha^2) via expm1 keeps precision for small t.
    return std::sqrt(-std::expm1(2.0 * vp_log_alpha(*this, t)));
}

double NoiseSchedule::sigma2(double t) const {
    require_time(t);
    if (kind == Kind::VE) return t;
    return -std::expm1(2.0 * vp_log_alpha(*this, t));
}

double NoiseSchedule::f(double t) const {
    require_time(t);
    if (kind == Kind::VE) return 0.0;
    return -0.5 * vp_beta(*this, t);
}

double NoiseSchedule::g2(double t) const {
    require_time(t);
    if (kind == Kind::VE) return 1.0;  // sigma^2 = t, alpha constant
    return vp_beta(*this, t);
}

std::pair<double, double> ddim_step_coeffs(const NoiseSchedule& sched, double t, double t_prev) {
    require_valid(t_prev >= 0.0 && t > t_prev,
                  "denoising step needs t > t_prev >= 0, got t=" + std::to_string(t) +
                      " t_prev=" + std::to_string(t_prev));
    const double a = sched.alpha(t_prev) / sched.alpha(t);
    const double b = sched.sigma(t_prev) - a * sched.sigma(t);
    return {a, b};
}

Vec forward_perturb(const NoiseSchedule& sched, const Vec& x0, double t, const Vec& noise) {
    require_same_dim(x0, noise, "forward_perturb");
    const auto [a, s] = sched.eval(t);
    Vec out(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + s * noise[i];
    return out;
}

namespace {

// Solves sigma(t) = target on [lo, hi] by bisection (sigma is strictly
// increasing for both schedule flavors over their usable range).
double invert_sigma(const NoiseSchedule& sched, double target, double lo, double hi) {
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (sched.sigma(mid) < target)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-15 * hi) break;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

void validate_grid(const NoiseSchedule& sched, const TimeGrid& grid) {
    const std::vector<double>& times = grid.times;
    require_valid(times.size() >= 2, "time grid needs at least one step");
    require_valid(times.front() == grid.T, "time grid must start at the horizon T");
    require_valid(times.back() == 0.0, "time grid must end at t = 0");
    double prev_snr = -1.0;
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
        require_valid(times[i] > times[i + 1], "time grid must be strictly decreasing");
        const auto [a, s] = sched.eval(times[i]);
        const double snr = a * a / (s * s);
        require_valid(prev_snr < 0.0 || snr > prev_snr,
                      "signal-to-noise ratio must decrease strictly along the grid");
        prev_snr = snr;
    }
}

TimeGrid TimeGrid::uniform_sigma(const NoiseSchedule& sched, double T, int nfe, double t_min) {
    require_valid(nfe >= 1, "grid needs nfe >= 1");
    require_valid(t_min > 0.0 && T > t_min, "grid needs T > t_min > 0");
    const double sig_hi = sched.sigma(T);
    const double sig_lo = sched.sigma(t_min);
    std::vector<double> times(static_cast<std::size_t>(nfe) + 1);
    times[0] = T;
    // nfe evaluation points inclusive of both ends: k = 0 -> sigma(T),
    // k = nfe-1 -> sigma(t_min); the interior ones are inverted back to t.
    for (int k = 1; k + 1 < nfe; ++k) {
        const double s = sig_hi + (sig_lo - sig_hi) * double(k) / double(nfe - 1);
        if (sched.kind == NoiseSchedule::Kind::VE) {
            times[static_cast<std::size_t>(k)] = s * s;
        } else {
            times[static_cast<std::size_t>(k)] = invert_sigma(sched, s, 0.0, T);
        }
    }
    if (nfe >= 2) times[static_cast<std::size_t>(nfe) - 1] = t_min;
    times[static_cast<std::size_t>(nfe)] = 0.0;
    TimeGrid g{T, std::move(times)};
    validate_grid(sched, g);
    return g;
}

TimeGrid TimeGrid::uniform_t(const NoiseSchedule& sched, double T, int nfe, double t_min) {
    require_valid(nfe >= 1, "grid needs nfe >= 1");
    require_valid(t_min > 0.0 && T > t_min, "grid needs T > t_min > 0");
    std::vector<double> times(static_cast<std::size_t>(nfe) + 1);
    for (int k = 0; k < nfe; ++k) {
        times[static_cast<std::size_t>(k)] =
            nfe == 1 ? T : T + (t_min - T) * double(k) / double(nfe - 1);
    }
    times[static_cast<std::size_t>(nfe) - 1] = nfe == 1 ? T : t_min;
    times[static_cast<std::size_t>(nfe)] = 0.0;
    TimeGrid g{T, std::move(times)};
    validate_grid(sched, g);
    return g;
}

TimeGrid TimeGrid::from_times(const NoiseSchedule& sched, std::vector<double> times) {
    require_valid(!times.empty(), "time grid must be nonempty");
    TimeGrid g{times.front(), std::move(times)};
    validate_grid(sched, g);
    return g;
}

}  // namespace recfg
