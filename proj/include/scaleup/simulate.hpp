#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "scaleup/cost.hpp"
#include "scaleup/policy.hpp"
#include "scaleup/rng.hpp"
#include "scaleup/state.hpp"
#include "scaleup/transitions.hpp"

namespace scaleup {

// Stream ids under the run seed; episode streams are further keyed by the
// episode index and segment number so segments are independent and may be
// replayed in any order.
inline constexpr std::uint64_t kStreamSegment = 0x5e61;

// Optional per-state visit tally (one slot per state, indexed by ordinal).
// Keeps a pointer to the caller's state space, so temporaries are rejected.
struct VisitCounts {
    explicit VisitCounts(const StateSpace& space) : space(&space), counts(space.size(), 0) {}
    explicit VisitCounts(StateSpace&&) = delete;
    const StateSpace* space;
    std::vector<std::int64_t> counts;
    std::int64_t total = 0;

    void tally(const SystemState& x) {
        ++counts[static_cast<std::size_t>(space->index_of(x))];
        ++total;
    }
};

// One uniformized jump-chain step: with probability rate/Lambda the matching
// event fires, otherwise the state is unchanged. Event probe order is fixed
// (arrival, service, expiration, initialization) so runs are reproducible.
inline SystemState step_once(const SystemState& x, const PolicySpec& policy,
                             const ModelParams& p, double big_lambda, std::mt19937_64& rng) {
    double u = uniform01(rng) * big_lambda;

    if (u < p.lambda) {
        if (x.x1 > 0) return SystemState{x.x1 - 1, x.x2 + 1, x.x3, x.x4};
        if (rejecting(x, p.N)) return x;
        if (cold_servers(x, p.N) > 0) {
            const int pi = policy.sample(x, p.N, rng);
            return SystemState{x.x1, x.x2, x.x3 + pi + 1, x.x4 + 1};
        }
        return SystemState{x.x1, x.x2, x.x3, x.x4 + 1};
    }
    u -= p.lambda;

    const double service = p.mu * x.x2;
    if (u < service) return SystemState{x.x1 + 1, x.x2 - 1, x.x3, x.x4};
    u -= service;

    const double expire = p.gamma * x.x1;
    if (u < expire) return SystemState{x.x1 - 1, x.x2, x.x3, x.x4};
    u -= expire;

    const double init = p.beta * x.x3;
    if (u < init) {
        if (x.x4 > 0) return SystemState{x.x1, x.x2 + 1, x.x3 - 1, x.x4 - 1};
        return SystemState{x.x1 + 1, x.x2, x.x3 - 1, x.x4};
    }
    return x;
}

// Runs `steps` uniformized steps from x_start and returns the terminal
// state. When visits is given, every post-step state is tallied.
inline SystemState simulate_segment(SystemState x, const PolicySpec& policy, const ModelParams& p,
                                    std::int64_t steps, std::mt19937_64& rng,
                                    VisitCounts* visits = nullptr) {
    policy.validate();
    p.validate();
    const double big_lambda = uniformization_rate(p);
    for (std::int64_t s = 0; s < steps; ++s) {
        x = step_once(x, policy, p, big_lambda, rng);
        if (visits) visits->tally(x);
    }
    return x;
}

// As above, and additionally reports the average instantaneous cost over the
// `steps` visited states (the empirical average reward of the segment).
inline SystemState simulate_segment(SystemState x, const PolicySpec& policy, const ModelParams& p,
                                    std::int64_t steps, std::mt19937_64& rng, const CostWeights& w,
                                    double& mean_cost, VisitCounts* visits = nullptr) {
    policy.validate();
    p.validate();
    const double big_lambda = uniformization_rate(p);
    double acc = 0.0;
    for (std::int64_t s = 0; s < steps; ++s) {
        x = step_once(x, policy, p, big_lambda, rng);
        acc += instant_cost(x, w, p.N);
        if (visits) visits->tally(x);
    }
    mean_cost = steps > 0 ? acc / static_cast<double>(steps) : instant_cost(x, w, p.N);
    return x;
}

// Mean and standard error of a long-run average estimated by the method of
// batch means: the run is cut into `batches` equal stretches whose averages
// are treated as near-independent replicates.
struct BatchStats {
    double mean = 0.0;
    double se = 0.0;
    int batches = 0;
};

inline BatchStats batch_means_cost(const PolicySpec& policy, const ModelParams& p,
                                   const CostWeights& w, SystemState x, std::int64_t steps,
                                   int batches, std::mt19937_64& rng) {
    if (batches < 2) throw std::invalid_argument("batch_means_cost: need at least 2 batches");
    if (steps < batches) throw std::invalid_argument("batch_means_cost: need steps >= batches");
    policy.validate();
    p.validate();
    const double big_lambda = uniformization_rate(p);
    const std::int64_t per = steps / batches;
    std::vector<double> avg(static_cast<std::size_t>(batches), 0.0);
    for (int b = 0; b < batches; ++b) {
        double acc = 0.0;
        for (std::int64_t s = 0; s < per; ++s) {
            x = step_once(x, policy, p, big_lambda, rng);
            acc += instant_cost(x, w, p.N);
        }
        avg[static_cast<std::size_t>(b)] = acc / static_cast<double>(per);
    }
    BatchStats out;
    out.batches = batches;
    for (double a : avg) out.mean += a;
    out.mean /= batches;
    double ss = 0.0;
    for (double a : avg) ss += (a - out.mean) * (a - out.mean);
    out.se = std::sqrt(ss / (batches - 1) / batches);
    return out;
}

struct EpisodeRecord {
    std::int64_t n = 0;
    double theta = 0.0;
    double delta = 0.0;
    std::int64_t tau = 0;
    double fhat_plus = 0.0;
    double fhat_minus = 0.0;
    std::int64_t steps = 0;  // simulation steps consumed: 2 * K * tau
};

struct EpisodeContext {
    ModelParams params;
    CostWeights weights;
    PolicyKind kind = PolicyKind::Simplified;
    SmoothingSpec smoothing;  // penalty shape; also the binomial rule map
    SystemState x_start;
};

// One two-sided probe around theta: K segments at theta+delta, then K at
// theta-delta, each tau steps from x_start. Each segment contributes its
// empirical average cost (mean instantaneous cost over the tau visited
// states, plus the window penalty of the probed theta); f-hat on each side
// is the mean of its K segment averages.
inline EpisodeRecord run_episode(std::int64_t n, double theta, double delta, std::int64_t tau,
                                 int K, const EpisodeContext& ctx, std::uint64_t seed,
                                 VisitCounts* visits = nullptr) {
    EpisodeRecord rec;
    rec.n = n;
    rec.theta = theta;
    rec.delta = delta;
    rec.tau = tau;
    rec.steps = 2 * static_cast<std::int64_t>(K) * tau;
    for (int side = 0; side < 2; ++side) {
        const double probe = side == 0 ? theta + delta : theta - delta;
        PolicySpec policy;
        policy.kind = ctx.kind;
        policy.theta = probe;
        if (ctx.kind == PolicyKind::BinomialSmoothed) policy.smoothing = ctx.smoothing;
        double acc = 0.0;
        for (int k = 0; k < K; ++k) {
            auto rng = make_stream(seed, {kStreamSegment, static_cast<std::uint64_t>(n),
                                          static_cast<std::uint64_t>(side * K + k)});
            double seg_mean = 0.0;
            simulate_segment(ctx.x_start, policy, ctx.params, tau, rng, ctx.weights, seg_mean,
                             visits);
            acc += seg_mean + penalty(probe, ctx.smoothing);
        }
        (side == 0 ? rec.fhat_plus : rec.fhat_minus) = acc / K;
    }
    return rec;
}

}  // namespace scaleup
