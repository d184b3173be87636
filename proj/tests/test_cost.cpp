#include <doctest.h>

#include "scaleup/cost.hpp"
#include "scaleup/policy.hpp"
#include "scaleup/state.hpp"

using namespace scaleup;

TEST_CASE("instant cost: weighted components plus rejection indicator") {
    CostWeights w;  // (1, 1, 5, 100), w_rej = 1e3

    CHECK(instant_cost({1, 2, 3, 1}, w, 50) == 118.0);
    CHECK(instant_cost({0, 49, 1, 1}, w, 50) == 1154.0);
    CHECK(instant_cost({0, 0, 0, 0}, w, 50) == 0.0);

    // Rejection triggers exactly when x2 + x4 = N.
    CHECK(instant_cost({0, 1, 1, 1}, w, 2) == doctest::Approx(1106.0));
    CHECK(instant_cost({0, 1, 1, 1}, w, 3) == doctest::Approx(106.0));
}

TEST_CASE("instant cost: bounded by full-capacity worst case for N <= 10") {
    CostWeights w;
    for (int N : {1, 2, 5, 10}) {
        const double bound = (w.w1 + w.w2 + w.w3 + w.w4) * N + w.w_rej;
        StateSpace space(N);
        for (std::size_t i = 0; i < space.size(); ++i) {
            const double c = instant_cost(space[i], w, N);
            CHECK(c >= 0.0);
            CHECK(c <= bound);
        }
    }
}

TEST_CASE("sample cost: instant cost plus boundary penalty") {
    CostWeights w;
    SmoothingSpec s;  // epsilon = 0.5, M = 25
    const SystemState x{1, 2, 3, 1};

    SUBCASE("penalty vanishes on the identity window") {
        for (double theta : {0.5, 1.0, 5.0, 12.0, 24.5})
            CHECK(sample_cost(theta, x, w, s, 50) == instant_cost(x, w, 50));
    }

    SUBCASE("penalty adds the documented boundary values") {
        SmoothingSpec tight{0.5, 10.0};
        CHECK(sample_cost(-2.0, x, w, tight, 50) ==
              doctest::Approx(instant_cost(x, w, 50) + 6.25).epsilon(1e-12));
        CHECK(sample_cost(12.0, x, w, tight, 50) ==
              doctest::Approx(instant_cost(x, w, 50) + 6.25).epsilon(1e-12));
    }

    SUBCASE("difference across theta is state independent") {
        const SystemState y{0, 0, 4, 2};
        for (double a : {-3.0, 0.1, 7.0, 26.0})
            for (double b : {-1.0, 2.0, 30.0}) {
                const double dx = sample_cost(a, x, w, s, 50) - sample_cost(b, x, w, s, 50);
                const double dy = sample_cost(a, y, w, s, 50) - sample_cost(b, y, w, s, 50);
                CHECK(dx == doctest::Approx(dy).epsilon(1e-12));
            }
    }

    SUBCASE("sample cost dominates instant cost") {
        for (double theta = -5.0; theta <= 30.0; theta += 0.25)
            CHECK(sample_cost(theta, x, w, s, 50) >= instant_cost(x, w, 50));
    }
}

TEST_CASE("cost weights validate nonnegativity") {
    CostWeights w;
    CHECK_NOTHROW(w.validate());
    w.w3 = -1.0;
    CHECK_THROWS_AS(w.validate(), std::invalid_argument);
    w.w3 = 5.0;
    w.w_rej = -0.5;
    CHECK_THROWS_AS(w.validate(), std::invalid_argument);
}
