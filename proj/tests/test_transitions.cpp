#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "scaleup/policy.hpp"
#include "scaleup/state.hpp"
#include "scaleup/transitions.hpp"

using namespace scaleup;

namespace {

PolicySpec simplified(double theta) { return PolicySpec{PolicyKind::Simplified, theta, std::nullopt}; }

PolicySpec binomial(double theta, double m) {
    return PolicySpec{PolicyKind::BinomialSmoothed, theta, SmoothingSpec{0.5, m}};
}

// Collapses a transition list into a map target -> total rate, dropping
// numerically empty entries.
std::map<SystemState, double> rate_map(const std::vector<Transition>& ts) {
    std::map<SystemState, double> m;
    for (const auto& t : ts)
        if (t.rate > 1e-12) m[t.to] += t.rate;
    return m;
}

}  // namespace

TEST_CASE("single idle-on server: arrival starts service, or the server expires") {
    ModelParams p;  // N=50, lambda=0.3, mu=1, beta=0.1, gamma=0.01
    const auto m = rate_map(out_transitions(SystemState{1, 0, 0, 0}, simplified(0.0), p));
    REQUIRE(m.size() == 2);
    CHECK(m.at(SystemState{0, 1, 0, 0}) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(m.at(SystemState{0, 0, 0, 0}) == doctest::Approx(0.01).epsilon(1e-15));
}

TEST_CASE("saturated system rejects arrivals via an explicit self-loop") {
    ModelParams p;
    const SystemState x{0, 49, 1, 1};  // x2 + x4 = N = 50
    const auto ts = out_transitions(x, simplified(0.0), p);
    const auto m = rate_map(ts);
    REQUIRE(m.size() == 3);
    CHECK(m.at(x) == doctest::Approx(0.3).epsilon(1e-15));                       // rejected arrival
    CHECK(m.at(SystemState{1, 48, 1, 1}) == doctest::Approx(49.0).epsilon(1e-15));  // service
    CHECK(m.at(SystemState{0, 50, 0, 0}) == doctest::Approx(0.1).epsilon(1e-15));   // init serves queue head
}

TEST_CASE("service completion always idles the server, even with jobs blocked") {
    // The blocked job stays bound to its own initializing server; the freed
    // server does not take it over.
    ModelParams p;
    p.N = 6;
    const auto m = rate_map(out_transitions(SystemState{0, 2, 2, 1}, simplified(0.0), p));
    REQUIRE(m.size() == 3);
    CHECK(m.at(SystemState{0, 2, 3, 2}) == doctest::Approx(0.3).epsilon(1e-15));  // arrival spawns 0 + init1
    CHECK(m.at(SystemState{1, 1, 2, 1}) == doctest::Approx(2.0).epsilon(1e-15));  // service -> idle-on
    CHECK(m.at(SystemState{0, 3, 1, 0}) == doctest::Approx(0.2).epsilon(1e-15));  // init completion serves head

    // Pin the rule across every state with busy servers: one service entry,
    // rate mu*x2, target x + e1 - e2.
    StateSpace space(6);
    for (const auto& x : space.states()) {
        if (x.x2 == 0) continue;
        const auto ts = out_transitions(x, simplified(2.0), p);
        int hits = 0;
        for (const auto& t : ts) {
            if (t.to == SystemState{x.x1 + 1, x.x2 - 1, x.x3, x.x4}) {
                ++hits;
                CHECK(t.rate == doctest::Approx(p.mu * x.x2).epsilon(1e-15));
            }
            if (x.x4 > 0) {
                // The freed server neither adopts the queued job directly...
                CHECK(t.to != SystemState{x.x1, x.x2, x.x3, x.x4 - 1});
                // ...nor cancels the initializing server bound to it.
                CHECK(t.to != SystemState{x.x1, x.x2, x.x3 - 1, x.x4 - 1});
            }
        }
        CHECK(hits == 1);
    }
}

TEST_CASE("arrival with cold servers spawns the requested reserve plus one bound server") {
    ModelParams p;
    p.N = 6;

    SUBCASE("deterministic count when theta is integral") {
        const auto m = rate_map(out_transitions(SystemState{0, 0, 0, 0}, simplified(3.0), p));
        REQUIRE(m.size() == 1);
        CHECK(m.at(SystemState{0, 0, 4, 1}) == doctest::Approx(0.3).epsilon(1e-15));
    }

    SUBCASE("fractional theta splits mass between adjacent counts") {
        const auto m = rate_map(out_transitions(SystemState{0, 0, 0, 0}, simplified(2.25), p));
        REQUIRE(m.size() == 2);
        CHECK(m.at(SystemState{0, 0, 3, 1}) == doctest::Approx(0.3 * 0.75).epsilon(1e-12));
        CHECK(m.at(SystemState{0, 0, 4, 1}) == doctest::Approx(0.3 * 0.25).epsilon(1e-12));
    }

    SUBCASE("existing unbound reserve is counted against the target") {
        // x3 - x4 = 2 already initializing beyond the bound ones, theta = 3:
        // spawn only 1 extra.
        const auto m = rate_map(out_transitions(SystemState{0, 1, 2, 0}, simplified(3.0), p));
        CHECK(m.at(SystemState{0, 1, 4, 1}) == doctest::Approx(0.3).epsilon(1e-15));
    }

    SUBCASE("binomial rule spreads arrival mass with the exact pmf") {
        const auto m = rate_map(out_transitions(SystemState{0, 0, 0, 0}, binomial(2.0, 3.0), p));
        // pi ~ Binomial(3, 2/3): masses {1, 6, 12, 8}/27 on k = 0..3.
        CHECK(m.at(SystemState{0, 0, 1, 1}) == doctest::Approx(0.3 * 1.0 / 27).epsilon(1e-12));
        CHECK(m.at(SystemState{0, 0, 2, 1}) == doctest::Approx(0.3 * 6.0 / 27).epsilon(1e-12));
        CHECK(m.at(SystemState{0, 0, 3, 1}) == doctest::Approx(0.3 * 12.0 / 27).epsilon(1e-12));
        CHECK(m.at(SystemState{0, 0, 4, 1}) == doctest::Approx(0.3 * 8.0 / 27).epsilon(1e-12));
        double arrival = 0.0;
        for (const auto& [to, r] : m) arrival += r;
        CHECK(arrival == doctest::Approx(0.3).epsilon(1e-12));  // spawn randomization conserves lambda
    }

    SUBCASE("capacity clipping piles mass on the largest feasible count") {
        // Only one cold server beyond the arrival's own: cap = 1.
        const auto m = rate_map(out_transitions(SystemState{0, 0, 4, 2}, binomial(2.0, 3.0), p));
        double arrival = 0.0;
        for (const auto& [to, r] : m)
            if (to != SystemState{1, 0, 3, 1} && to != SystemState{0, 1, 3, 1}) arrival += r;
        CHECK(arrival == doctest::Approx(0.3).epsilon(1e-12));
        // k in {1, 2, 3} all collapse onto cap = 1.
        CHECK(m.at(SystemState{0, 0, 6, 3}) ==
              doctest::Approx(0.3 * (6.0 + 12.0 + 8.0) / 27).epsilon(1e-12));
    }
}

TEST_CASE("arrival with no cold server binds to a spare initializing one") {
    ModelParams p;
    p.N = 3;
    const auto m = rate_map(out_transitions(SystemState{0, 0, 3, 1}, simplified(5.0), p));
    CHECK(m.at(SystemState{0, 0, 3, 2}) == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("rejection self-loop appears exactly on the saturation face") {
    ModelParams p;
    p.N = 6;
    StateSpace space(6);
    for (const auto& x : space.states()) {
        const auto ts = out_transitions(x, simplified(1.5), p);
        int self = 0;
        for (const auto& t : ts)
            if (t.to == x) {
                ++self;
                CHECK(t.rate == doctest::Approx(p.lambda).epsilon(1e-15));
            }
        const bool saturated = (x.x1 == 0 && x.x2 + x.x4 == p.N);
        CHECK(self == (saturated ? 1 : 0));
    }
}

TEST_CASE("zero-reserve policy keeps the bound-only subspace closed") {
    // Starting from any state with x3 == x4, every transition lands back in
    // {x3 == x4}: this is the reduction the baseline-cost checks rely on.
    ModelParams p;
    p.N = 6;
    StateSpace space(6);
    for (const auto& x : space.states()) {
        if (x.x3 != x.x4) continue;
        for (const auto& t : out_transitions(x, simplified(0.0), p)) CHECK(t.to.x3 == t.to.x4);
    }
}

TEST_CASE("all transition targets stay inside the state space") {
    for (int n = 1; n <= 6; ++n) {
        ModelParams p;
        p.N = n;
        StateSpace space(n);
        std::vector<PolicySpec> policies = {simplified(0.0), simplified(2.7), simplified(5.0)};
        if (n >= 3) policies.push_back(binomial(1.3, n / 2.0));
        for (const auto& policy : policies)
            for (const auto& x : space.states())
                for (const auto& t : out_transitions(x, policy, p)) {
                    CHECK(t.rate >= 0.0);
                    CHECK(valid_state(t.to, n));
                }
    }
}

TEST_CASE("uniformization rate bounds every state's total outflow") {
    ModelParams p;
    p.N = 6;
    const double big = uniformization_rate(p);
    StateSpace space(6);
    for (const auto& x : space.states()) {
        double total = 0.0;
        for (const auto& t : out_transitions(x, simplified(3.3), p)) total += t.rate;
        CHECK(total <= big + 1e-12);
    }
}

TEST_CASE("uniformization rate formula") {
    ModelParams p;  // N=50, lambda=0.3
    CHECK(uniformization_rate(p) == doctest::Approx(55.8).epsilon(1e-15));
    p.lambda = 0.15;
    CHECK(uniformization_rate(p) == doctest::Approx(55.65).epsilon(1e-15));
    p.N = 0;
    CHECK(uniformization_rate(p) == 0.15);
}

TEST_CASE("uniformized jump rows are probability distributions") {
    ModelParams p;
    p.N = 5;
    StateSpace space(5);
    for (const auto& policy : {simplified(1.7), binomial(2.0, 2.5)})
        for (const auto& x : space.states()) {
            const auto row = dtmc_row(x, policy, p);
            double sum = 0.0;
            for (const auto& [to, prob] : row) {
                CHECK(prob >= 0.0);
                CHECK(prob <= 1.0 + 1e-15);
                CHECK(valid_state(to, 5));
                sum += prob;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
}

TEST_CASE("jump-chain stay probability folds self-loops into the lazy mass") {
    ModelParams p;  // N=50
    const double big = uniformization_rate(p);

    // Empty system: only the arrival leaves.
    const auto row0 = dtmc_row(SystemState{0, 0, 0, 0}, simplified(0.0), p);
    double stay0 = 0.0;
    for (const auto& [to, prob] : row0)
        if (to == SystemState{0, 0, 0, 0}) stay0 += prob;
    CHECK(stay0 == doctest::Approx(1.0 - 0.3 / big).epsilon(1e-12));

    // Saturated state: the rejected arrival is a real self-loop, so only
    // service and init completion count as movement.
    const auto row1 = dtmc_row(SystemState{0, 49, 1, 1}, simplified(0.0), p);
    double stay1 = 0.0;
    for (const auto& [to, prob] : row1)
        if (to == SystemState{0, 49, 1, 1}) stay1 += prob;
    CHECK(stay1 == doctest::Approx(1.0 - (49.0 + 0.1) / big).epsilon(1e-12));
}

TEST_CASE("frozen one-server generator matches the hand-derived matrix") {
    ModelParams p;
    p.N = 1;
    StateSpace space(1);
    REQUIRE(space.size() == 5);
    // Lexicographic order:
    REQUIRE(space[0] == SystemState{0, 0, 0, 0});
    REQUIRE(space[1] == SystemState{0, 0, 1, 0});
    REQUIRE(space[2] == SystemState{0, 0, 1, 1});
    REQUIRE(space[3] == SystemState{0, 1, 0, 0});
    REQUIRE(space[4] == SystemState{1, 0, 0, 0});

    const auto q = build_generator(space, simplified(0.0), p);
    Eigen::MatrixXd dense = Eigen::MatrixXd(q);

    Eigen::MatrixXd expect(5, 5);
    // From (0,0,0,0): arrival spawns the bound server -> (0,0,1,1).
    // From (0,0,1,0): arrival binds -> (0,0,1,1); init completes idle -> (1,0,0,0).
    // From (0,0,1,1): arrival rejected (self-loop, net zero); init serves head -> (0,1,0,0).
    // From (0,1,0,0): arrival rejected; service -> (1,0,0,0).
    // From (1,0,0,0): arrival served -> (0,1,0,0); idle-on expires -> (0,0,0,0).
    expect << -0.3, 0.0, 0.3, 0.0, 0.0,
              0.0, -(0.3 + 0.1), 0.3, 0.0, 0.1,
              0.0, 0.0, -0.1, 0.1, 0.0,
              0.0, 0.0, 0.0, -1.0, 1.0,
              0.01, 0.0, 0.0, 0.3, -(0.3 + 0.01);
    CHECK((dense - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("generator rows sum to zero with nonnegative off-diagonals") {
    for (int n : {1, 3, 6}) {
        ModelParams p;
        p.N = n;
        StateSpace space(n);
        std::vector<PolicySpec> policies = {simplified(0.0), simplified(2.5)};
        if (n >= 3) policies.push_back(binomial(1.0, n / 2.0));
        for (const auto& policy : policies) {
            const auto q = build_generator(space, policy, p);
            for (int i = 0; i < q.rows(); ++i) {
                double sum = 0.0;
                for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(q, i); it; ++it) {
                    if (it.col() != i) CHECK(it.value() >= 0.0);
                    sum += it.value();
                }
                CHECK(std::abs(sum) < 1e-12);
            }
        }
    }
}

TEST_CASE("invalid inputs are rejected") {
    ModelParams p;
    p.N = 3;
    CHECK_THROWS_AS(out_transitions(SystemState{2, 2, 0, 0}, simplified(0.0), p), std::invalid_argument);
    CHECK_THROWS_AS(out_transitions(SystemState{0, 0, 1, 2}, simplified(0.0), p), std::invalid_argument);
    StateSpace wrong(4);
    CHECK_THROWS_AS(build_generator(wrong, simplified(0.0), p), std::invalid_argument);
}
