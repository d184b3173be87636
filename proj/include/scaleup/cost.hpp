#pragma once

#include <stdexcept>

#include "scaleup/policy.hpp"
#include "scaleup/state.hpp"
#include "scaleup/transitions.hpp"

namespace scaleup {

struct CostWeights {
    double w1 = 1.0;      // idle-on
    double w2 = 1.0;      // busy
    double w3 = 5.0;      // initializing
    double w4 = 100.0;    // blocked job / init1
    double w_rej = 1e3;   // rejection state

    void validate() const {
        if (w1 < 0.0 || w2 < 0.0 || w3 < 0.0 || w4 < 0.0 || w_rej < 0.0)
            throw std::invalid_argument("CostWeights: weights must be nonnegative");
    }
};

// Instantaneous state cost: weighted pool occupancies plus a lump charge
// while arrivals are being rejected.
inline double instant_cost(const SystemState& x, const CostWeights& w, int n) {
    w.validate();
    if (!valid_state(x, n)) throw std::invalid_argument("instant_cost: invalid state " + to_string(x));
    return w.w1 * x.x1 + w.w2 * x.x2 + w.w3 * x.x3 + w.w4 * x.x4 +
           (rejecting(x, n) ? w.w_rej : 0.0);
}

// Cost observed by the optimizer: state cost plus the out-of-range penalty
// on the parameter. The penalty keeps iterates near [epsilon, M-epsilon]
// and vanishes there, so it never distorts interior comparisons.
inline double sample_cost(double theta, const SystemState& x, const CostWeights& w,
                          const SmoothingSpec& s, int n) {
    return instant_cost(x, w, n) + penalty(theta, s);
}

}  // namespace scaleup
