#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "scaleup/rng.hpp"
#include "scaleup/state.hpp"

namespace scaleup {

enum class PolicyKind { Simplified, BinomialSmoothed };

// Smoothing window used by the binomial rule and by the optimizer's penalty:
// parameters are mapped into (0, M) and penalized outside [epsilon, M-epsilon].
struct SmoothingSpec {
    double epsilon = 0.5;
    double M = 25.0;

    void validate() const {
        if (!(epsilon > 0.0) || !(epsilon < M / 2.0))
            throw std::invalid_argument("SmoothingSpec: need 0 < epsilon < M/2");
    }
};

// C^inf step: 0 below a, 1 above b, strictly increasing in between.
inline double smooth_step(double x, double a, double b) {
    if (!(a < b)) throw std::invalid_argument("smooth_step: need a < b");
    if (x <= a) return 0.0;
    if (x >= b) return 1.0;
    const double d = b - x;
    return std::exp(-d * d / (x - a));
}

// Maps any real theta into (0, M); identity on [epsilon, M-epsilon],
// saturating smoothly at the ends.
inline double smooth_param(double theta, const SmoothingSpec& s) {
    s.validate();
    const double e = s.epsilon, M = s.M;
    const auto h_lo = [&](double t) { return (e / 3.0) * std::exp(t / e); };
    const auto h_hi = [&](double t) { return M - (e / 3.0) * std::exp(-(t - M) / e); };
    if (theta < 0.0) return h_lo(theta);
    if (theta <= e) {
        const double w = smooth_step(theta, 0.0, e);
        return h_lo(theta) * (1.0 - w) + theta * w;
    }
    if (theta < M - e) return theta;
    if (theta <= M) {
        const double w = smooth_step(theta, M - e, M);
        return theta * (1.0 - w) + h_hi(theta) * w;
    }
    return h_hi(theta);
}

// Optimizer penalty: zero exactly on [epsilon, M-epsilon], quadratic growth
// outside, smooth everywhere.
inline double penalty(double theta, const SmoothingSpec& s) {
    s.validate();
    const double e = s.epsilon, M = s.M;
    const double lo = (1.0 - smooth_step(theta, 0.0, e)) * (theta - e) * (theta - e);
    const double hi = smooth_step(theta, M - e, M) * (theta - M + e) * (theta - M + e);
    return lo + hi;
}

// Most init0 servers an arrival may spawn on top of the one init1: the new
// job and the init1 must fit next to the busy and initializing ones.
constexpr int scale_up_cap(const SystemState& x, int n) {
    return n - x.x2 - x.x3 - 1;
}

// Randomized-rounding rule: aims for floor(theta) or floor(theta)+1 total
// initializing servers beyond the bound ones, clamped to what fits.
// v is a uniform [0,1) draw resolving the rounding.
inline int simplified_rule(double theta, const SystemState& x, int n, double v) {
    const int cap = std::max(0, scale_up_cap(x, n));
    const double fl = std::floor(theta);
    const int want = static_cast<int>(fl) + (v < theta - fl ? 1 : 0) - (x.x3 - x.x4);
    return std::clamp(want, 0, cap);
}

inline int smoothing_trials(const SmoothingSpec& s) {
    return static_cast<int>(std::ceil(s.M));
}

// Binomial rule: pi ~ Binomial(ceil(M), smooth_param(theta)/ceil(M)), so the
// mean equals smooth_param(theta). State caps are applied where the rule is
// used, not here.
inline int binomial_rule(double theta, const SmoothingSpec& s, std::mt19937_64& rng) {
    const int trials = smoothing_trials(s);
    const double p = smooth_param(theta, s) / trials;
    return binomial_sample(rng, trials, p);
}

struct PolicySpec {
    PolicyKind kind = PolicyKind::Simplified;
    double theta = 0.0;
    std::optional<SmoothingSpec> smoothing;  // required by BinomialSmoothed only

    void validate() const {
        if (kind == PolicyKind::BinomialSmoothed) {
            if (!smoothing) throw std::invalid_argument("PolicySpec: binomial rule needs a smoothing spec");
            smoothing->validate();
        }
    }

    int sample(const SystemState& x, int n, std::mt19937_64& rng) const {
        if (kind == PolicyKind::Simplified) return simplified_rule(theta, x, n, uniform01(rng));
        return std::min(binomial_rule(theta, *smoothing, rng), std::max(0, scale_up_cap(x, n)));
    }
};

// Exact law of the randomized pi in state x: pairs (k, P(pi = k)) with
// positive mass, ascending in k. State caps truncate the support; the
// clipped mass lands on the boundary value.
inline std::vector<std::pair<int, double>> pi_distribution(const SystemState& x,
                                                           const PolicySpec& policy, int n) {
    policy.validate();
    const int cap = std::max(0, scale_up_cap(x, n));
    std::vector<std::pair<int, double>> pmf;
    if (policy.kind == PolicyKind::Simplified) {
        const double fl = std::floor(policy.theta);
        const double frac = policy.theta - fl;
        const int debt = x.x3 - x.x4;
        const int k0 = std::clamp(static_cast<int>(fl) - debt, 0, cap);
        const int k1 = std::clamp(static_cast<int>(fl) + 1 - debt, 0, cap);
        if (k0 == k1) {
            pmf.emplace_back(k0, 1.0);
        } else {
            if (1.0 - frac > 0.0) pmf.emplace_back(k0, 1.0 - frac);
            if (frac > 0.0) pmf.emplace_back(k1, frac);
        }
        return pmf;
    }
    const int trials = smoothing_trials(*policy.smoothing);
    const double p = smooth_param(policy.theta, *policy.smoothing) / trials;
    // Binomial pmf by the multiplicative recurrence, tail mass lumped on cap.
    double mass = std::pow(1.0 - p, trials);
    double below_cap = 0.0;
    for (int k = 0; k < cap && k <= trials; ++k) {
        if (mass > 0.0) pmf.emplace_back(k, mass);
        below_cap += mass;
        mass *= (static_cast<double>(trials - k) / (k + 1)) * (p / (1.0 - p));
    }
    const double at_cap = 1.0 - below_cap;
    if (at_cap > 0.0) pmf.emplace_back(cap, at_cap);
    return pmf;
}

}  // namespace scaleup
