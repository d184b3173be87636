#pragma once

#include <Eigen/SparseCore>
#include <cassert>
#include <stdexcept>
#include <utility>
#include <vector>

#include "scaleup/policy.hpp"
#include "scaleup/state.hpp"

namespace scaleup {

struct Transition {
    double rate;
    SystemState to;
};

// Whether an arriving job finds every server busy or already promised to a
// blocked job; such arrivals are rejected.
constexpr bool rejecting(const SystemState& x, int n) {
    return x.x2 + x.x4 == n;
}

// Outgoing rates from x under the given scale-up policy, with the randomized
// spawn count marginalized into a sub-distribution over arrival targets.
// The rejected-arrival self-loop is kept as an explicit entry.
inline std::vector<Transition> out_transitions(const SystemState& x, const PolicySpec& policy,
                                               const ModelParams& p) {
    p.validate();
    if (!valid_state(x, p.N)) throw std::invalid_argument("out_transitions: invalid state " + to_string(x));
    std::vector<Transition> out;
    out.reserve(8);

    // Arrival.
    if (x.x1 > 0) {
        out.push_back({p.lambda, SystemState{x.x1 - 1, x.x2 + 1, x.x3, x.x4}});
    } else if (rejecting(x, p.N)) {
        out.push_back({p.lambda, x});
    } else if (cold_servers(x, p.N) > 0) {
        // Spawn pi init0 plus the init1 bound to the new job.
        for (const auto& [k, prob] : pi_distribution(x, policy, p.N))
            out.push_back({p.lambda * prob, SystemState{x.x1, x.x2, x.x3 + k + 1, x.x4 + 1}});
    } else {
        // No cold server left but a spare init0 exists: bind the job to it.
        out.push_back({p.lambda, SystemState{x.x1, x.x2, x.x3, x.x4 + 1}});
    }

    // Service completion frees the server to idle-on; blocked jobs keep
    // waiting for their own designated initializing servers. This strict
    // binding is what makes the zero-reserve chain collapse onto the
    // {x3 = x4} subspace.
    if (x.x2 > 0)
        out.push_back({p.mu * x.x2, SystemState{x.x1 + 1, x.x2 - 1, x.x3, x.x4}});

    // Idle-on expiration.
    if (x.x1 > 0)
        out.push_back({p.gamma * x.x1, SystemState{x.x1 - 1, x.x2, x.x3, x.x4}});

    // Initialization completion; with jobs blocked, the completed server
    // serves the queue head, otherwise it turns idle-on.
    if (x.x3 > 0) {
        if (x.x4 > 0)
            out.push_back({p.beta * x.x3, SystemState{x.x1, x.x2 + 1, x.x3 - 1, x.x4 - 1}});
        else
            out.push_back({p.beta * x.x3, SystemState{x.x1 + 1, x.x2, x.x3 - 1, x.x4}});
    }

    for (const auto& t : out) {
        assert(t.rate >= 0.0);
        assert(valid_state(t.to, p.N));
    }
    return out;
}

// Uniform bound on the total outgoing rate over the whole space.
inline double uniformization_rate(const ModelParams& p) {
    p.validate();
    return p.lambda + p.N * (p.mu + p.beta + p.gamma);
}

// One row of the uniformized jump kernel: probabilities over successor
// states, self-loop mass included, summing to one.
inline std::vector<std::pair<SystemState, double>> dtmc_row(const SystemState& x,
                                                            const PolicySpec& policy,
                                                            const ModelParams& p) {
    const double big_lambda = uniformization_rate(p);
    std::vector<std::pair<SystemState, double>> row;
    double moved = 0.0;
    for (const auto& t : out_transitions(x, policy, p)) {
        if (t.to == x) continue;
        row.emplace_back(t.to, t.rate / big_lambda);
        moved += t.rate / big_lambda;
    }
    const double stay = 1.0 - moved;
    if (stay < 0.0) throw std::logic_error("dtmc_row: uniformization bound violated at " + to_string(x));
    row.emplace_back(x, stay);
    return row;
}

// Generator Q over the full state space, row i = rates out of states[i],
// diagonal set so rows sum to zero. Row-major so row sums and transposed
// products are both cheap.
inline Eigen::SparseMatrix<double, Eigen::RowMajor> build_generator(const StateSpace& space,
                                                                    const PolicySpec& policy,
                                                                    const ModelParams& p) {
    if (space.capacity() != p.N) throw std::invalid_argument("build_generator: state space does not match params");
    using T = Eigen::Triplet<double>;
    std::vector<T> trips;
    trips.reserve(space.size() * 7);
    for (std::size_t i = 0; i < space.size(); ++i) {
        const SystemState& x = space[i];
        double total = 0.0;
        for (const auto& t : out_transitions(x, policy, p)) {
            if (t.to == x) continue;
            trips.emplace_back(static_cast<int>(i), static_cast<int>(space.index_of(t.to)), t.rate);
            total += t.rate;
        }
        trips.emplace_back(static_cast<int>(i), static_cast<int>(i), -total);
    }
    Eigen::SparseMatrix<double, Eigen::RowMajor> q(static_cast<Eigen::Index>(space.size()),
                                                   static_cast<Eigen::Index>(space.size()));
    q.setFromTriplets(trips.begin(), trips.end());
    return q;
}

}  // namespace scaleup
