#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scaleup/simulate.hpp"

namespace scaleup {

enum class TauMode { Log, Const };

// Gain, probe width and segment length sequences of the stochastic
// approximation. Fixed functional forms: gamma_n = gamma0 / n,
// delta_n = n^(-delta_exponent), tau_n = max(1, floor(tau * log(n+1)))
// or constant tau.
struct Schedules {
    double gamma0 = 10.0;
    double delta_exponent = 2.0 / 3.0;
    double tau = 1e6;
    TauMode tau_mode = TauMode::Log;
    int K = 2;
    std::int64_t T = 100'000'000;

    double gamma(std::int64_t n) const { return gamma0 / static_cast<double>(n); }
    double delta(std::int64_t n) const { return std::pow(static_cast<double>(n), -delta_exponent); }
    std::int64_t tau_n(std::int64_t n) const {
        if (tau_mode == TauMode::Const) return std::max<std::int64_t>(1, static_cast<std::int64_t>(tau));
        return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(tau * std::log(static_cast<double>(n) + 1.0))));
    }

    // gamma_n, delta_n and gamma_n/delta_n must all decrease; checked by
    // direct evaluation across the supported episode range.
    void validate() const {
        if (!(gamma0 > 0.0)) throw std::invalid_argument("Schedules: gamma0 must be positive");
        if (!(delta_exponent > 0.0)) throw std::invalid_argument("Schedules: delta exponent must be positive");
        if (!(tau >= 1.0)) throw std::invalid_argument("Schedules: tau must be >= 1");
        if (K < 1) throw std::invalid_argument("Schedules: K must be >= 1");
        if (T < 0) throw std::invalid_argument("Schedules: T must be >= 0");
        double g_prev = gamma(1), d_prev = delta(1), r_prev = g_prev / d_prev;
        for (std::int64_t n = 2; n <= 1'000'000; ++n) {
            const double g = gamma(n), d = delta(n), r = g / d;
            if (!(g < g_prev) || !(d < d_prev) || !(r < r_prev))
                throw std::invalid_argument("Schedules: gamma, delta, gamma/delta must decrease (violated at n=" + std::to_string(n) + ")");
            g_prev = g;
            d_prev = d;
            r_prev = r;
        }
    }

    // Series behaviour of the power-law forms, reported analytically:
    // sum gamma_n diverges iff the gain exponent is <= 1 (it is 1 here), and
    // sum gamma_n^2 / delta_n^2 = sum n^(2*delta_exponent - 2) converges iff
    // delta_exponent < 1/2. The classic diminishing-gain guarantees want
    // both; the faster probe decay used in practice gives up the second.
    struct Summability {
        bool gamma_sum_diverges;
        bool gamma2_over_delta2_sum_converges;
    };
    Summability summability() const {
        return Summability{true, 2.0 * delta_exponent - 2.0 < -1.0};
    }
};

// One stochastic-approximation update from the two-sided estimate.
inline double kw_step(double theta, double gamma_n, double delta_n, double fhat_plus,
                      double fhat_minus) {
    return theta - gamma_n * (fhat_plus - fhat_minus) / (2.0 * delta_n);
}

struct KwConfig {
    ModelParams params;
    CostWeights weights;
    PolicyKind kind = PolicyKind::Simplified;
    SmoothingSpec smoothing;
    Schedules schedules;
    double theta0 = 1.0;
    SystemState x_start;

    void validate() const {
        params.validate();
        weights.validate();
        smoothing.validate();
        schedules.validate();
        if (!(smoothing.M < params.N)) throw std::invalid_argument("KwConfig: need M < N");
        if (!valid_state(x_start, params.N)) throw std::invalid_argument("KwConfig: invalid start state");
    }
};

struct TrajectoryPoint {
    std::int64_t n = 0;      // episodes completed
    std::int64_t t = 0;      // simulation steps consumed so far
    double theta = 0.0;      // parameter after episode n (raw, unclamped)
};

struct Trajectory {
    std::vector<TrajectoryPoint> points;  // first point is (0, 0, theta0)
    bool hit_reporting_bounds = false;    // clamped theta touched -N or 2N
    double theta_final() const { return points.back().theta; }
    std::int64_t episodes() const { return points.back().n; }
};

// Reporting clamp for runaway iterates; the raw value is what the recursion
// keeps using.
inline double clamp_for_reporting(double theta, int n_capacity) {
    return std::clamp(theta, -static_cast<double>(n_capacity), 2.0 * static_cast<double>(n_capacity));
}

using EpisodeSink = std::function<void(const EpisodeRecord&)>;

namespace detail {

inline Trajectory run_recursion(const KwConfig& cfg, std::uint64_t seed,
                                const std::function<double(std::int64_t)>& gain,
                                const std::function<std::int64_t(std::int64_t)>& segment_len,
                                const EpisodeSink& sink, VisitCounts* visits) {
    cfg.validate();
    EpisodeContext ctx{cfg.params, cfg.weights, cfg.kind, cfg.smoothing, cfg.x_start};
    Trajectory traj;
    traj.points.push_back({0, 0, cfg.theta0});
    double theta = cfg.theta0;
    std::int64_t t = 0;
    std::int64_t n = 1;
    while (t <= cfg.schedules.T) {
        const double delta_n = cfg.schedules.delta(n);
        const std::int64_t tau_n = segment_len(n);
        const EpisodeRecord rec = run_episode(n, theta, delta_n, tau_n, cfg.schedules.K, ctx, seed, visits);
        if (sink) sink(rec);
        theta = kw_step(theta, gain(n), delta_n, rec.fhat_plus, rec.fhat_minus);
        if (!std::isfinite(theta))
            throw std::runtime_error("optimizer diverged to a non-finite parameter at episode " + std::to_string(n));
        t += rec.steps;
        traj.points.push_back({n, t, theta});
        if (clamp_for_reporting(theta, cfg.params.N) != theta) traj.hit_reporting_bounds = true;
        ++n;
    }
    return traj;
}

}  // namespace detail

// Non-stationary two-sided stochastic approximation: episode n probes
// theta_n +/- delta_n with 2K restarted segments of tau_n steps and updates
// along the estimated gradient until the step budget T is spent.
inline Trajectory run_kw(const KwConfig& cfg, std::uint64_t seed, const EpisodeSink& sink = {},
                         VisitCounts* visits = nullptr) {
    return detail::run_recursion(
        cfg, seed, [&](std::int64_t n) { return cfg.schedules.gamma(n); },
        [&](std::int64_t n) { return cfg.schedules.tau_n(n); }, sink, visits);
}

// Fast-update baseline: same estimator, but the parameter moves every
// 2*K*update_every steps (segments of fixed length update_every) and the
// gain is rescaled by gamma_scale. Mimics updating "every few transitions"
// instead of waiting out the growing-segment schedule.
inline Trajectory run_fast_update(const KwConfig& cfg, std::int64_t update_every,
                                  double gamma_scale, std::uint64_t seed,
                                  const EpisodeSink& sink = {}, VisitCounts* visits = nullptr) {
    if (update_every < 1) throw std::invalid_argument("run_fast_update: update_every must be >= 1");
    if (!(gamma_scale >= 0.0)) throw std::invalid_argument("run_fast_update: gamma_scale must be >= 0");
    return detail::run_recursion(
        cfg, seed, [&](std::int64_t n) { return gamma_scale * cfg.schedules.gamma(n); },
        [=](std::int64_t) { return update_every; }, sink, visits);
}

}  // namespace scaleup
