#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace scaleup {

// Server pools of the autoscaling chain. Cold (off) servers are the
// remainder N - x1 - x2 - x3; init1 servers (x4) are initializing servers
// already bound to a job blocked in the queue, so x4 <= x3 always.
struct SystemState {
    int x1 = 0;  // idle-on
    int x2 = 0;  // busy
    int x3 = 0;  // initializing, init0 + init1
    int x4 = 0;  // init1

    friend constexpr auto operator<=>(const SystemState&, const SystemState&) = default;
};

constexpr int cold_servers(const SystemState& x, int n) {
    return n - x.x1 - x.x2 - x.x3;
}

constexpr bool valid_state(const SystemState& x, int n) {
    return x.x1 >= 0 && x.x2 >= 0 && x.x3 >= 0 && x.x4 >= 0 &&
           x.x1 + x.x2 + x.x3 <= n && x.x4 <= x.x3;
}

inline std::string to_string(const SystemState& x) {
    return "(" + std::to_string(x.x1) + "," + std::to_string(x.x2) + "," +
           std::to_string(x.x3) + "," + std::to_string(x.x4) + ")";
}

struct ModelParams {
    int N = 50;           // server capacity
    double lambda = 0.3;  // arrival rate
    double mu = 1.0;      // service rate per busy server
    double beta = 0.1;    // initialization completion rate per initializing server
    double gamma = 0.01;  // expiration rate per idle-on server

    void validate() const {
        if (N < 0) throw std::invalid_argument("ModelParams: N must be >= 0");
        if (!(lambda > 0.0) || !(mu > 0.0) || !(beta > 0.0) || !(gamma > 0.0))
            throw std::invalid_argument("ModelParams: rates must be strictly positive");
    }
};

// All valid states in lexicographic order of (x1, x2, x3, x4), with O(1)
// state -> ordinal lookup via an offset table over (x1, x2, x3).
class StateSpace {
public:
    explicit StateSpace(int n) : n_(n) {
        if (n < 0) throw std::invalid_argument("StateSpace: capacity must be >= 0");
        const int s = n + 1;
        base_.assign(static_cast<std::size_t>(s) * s * s, -1);
        for (int x1 = 0; x1 <= n; ++x1)
            for (int x2 = 0; x2 + x1 <= n; ++x2)
                for (int x3 = 0; x3 + x1 + x2 <= n; ++x3) {
                    base_[cell(x1, x2, x3)] = static_cast<std::int64_t>(states_.size());
                    for (int x4 = 0; x4 <= x3; ++x4)
                        states_.push_back(SystemState{x1, x2, x3, x4});
                }
    }

    int capacity() const { return n_; }
    std::size_t size() const { return states_.size(); }
    const std::vector<SystemState>& states() const { return states_; }
    const SystemState& operator[](std::size_t i) const { return states_[i]; }

    std::int64_t index_of(const SystemState& x) const {
        if (!valid_state(x, n_)) throw std::out_of_range("StateSpace::index_of: invalid state " + to_string(x));
        return base_[cell(x.x1, x.x2, x.x3)] + x.x4;
    }

private:
    std::size_t cell(int x1, int x2, int x3) const {
        const std::size_t s = static_cast<std::size_t>(n_) + 1;
        return (static_cast<std::size_t>(x1) * s + static_cast<std::size_t>(x2)) * s +
               static_cast<std::size_t>(x3);
    }

    int n_;
    std::vector<SystemState> states_;
    std::vector<std::int64_t> base_;
};

}  // namespace scaleup
