#include <doctest.h>

#include <json.hpp>

#include "scaleup/config.hpp"

using namespace scaleup;
using nlohmann::json;

namespace {

json minimal() {
    return json::parse(R"({
        "model": {"N": 10, "lambda": 0.3, "mu": 1.0, "beta": 0.1, "gamma": 0.01},
        "cost": {"w1": 1, "w2": 1, "w3": 5, "w4": 100, "w_rej": 1000},
        "policy": {"kind": "simplified", "epsilon": 0.5},
        "schedules": {"gamma0": 10, "delta_exponent": 0.6666666666666666,
                       "tau": 1000, "tau_mode": "log", "K": 2, "T": 100000, "theta0": 1.0},
        "run": {"seeds": [1, 2], "out": "out", "threads": 1}
    })");
}

}  // namespace

TEST_CASE("config: defaults fill unspecified sections") {
    const ExperimentConfig cfg = parse_config(json::object());
    CHECK(cfg.model.N == 50);
    CHECK(cfg.lambdas == std::vector<double>{0.3});
    CHECK(cfg.cost.w4 == 100.0);
    CHECK(cfg.kind == PolicyKind::Simplified);
    CHECK(cfg.smoothing.M == doctest::Approx(25.0));  // N/2 when absent
    CHECK(cfg.smoothing_m_defaulted);
    CHECK(cfg.schedules.K == 2);
    CHECK(cfg.run.seeds == std::vector<std::uint64_t>{1});
    CHECK(cfg.sweep.grid_step == 1.0);
    CHECK(cfg.fast.update_every == std::vector<std::int64_t>{100, 1000});
}

TEST_CASE("config: explicit values land in the right fields") {
    const ExperimentConfig cfg = parse_config(minimal());
    CHECK(cfg.model.N == 10);
    CHECK(cfg.model.lambda == 0.3);
    CHECK(cfg.smoothing.M == doctest::Approx(5.0));  // N/2 default follows model.N
    CHECK(cfg.schedules.tau == 1000.0);
    CHECK(cfg.schedules.T == 100000);
    CHECK(cfg.run.seeds == std::vector<std::uint64_t>{1, 2});

    const KwConfig kw = cfg.kw_config(0.3, 1.0);
    CHECK(kw.params.N == 10);
    CHECK(kw.theta0 == 1.0);
    CHECK(kw.schedules.K == 2);
}

TEST_CASE("config: scalar-or-array fan-out fields") {
    json j = minimal();
    j["model"]["lambda"] = {0.15, 0.3};
    j["schedules"]["theta0"] = {1.0, 10.0};
    j["fast"]["update_every"] = 250;
    const ExperimentConfig cfg = parse_config(j);
    CHECK(cfg.lambdas == std::vector<double>{0.15, 0.3});
    CHECK(cfg.model.lambda == 0.15);
    CHECK(cfg.theta0s == std::vector<double>{1.0, 10.0});
    CHECK(cfg.fast.update_every == std::vector<std::int64_t>{250});
}

TEST_CASE("config: unknown keys are rejected") {
    json j = minimal();
    j["model"]["lamda"] = 0.2;
    CHECK_THROWS_AS(parse_config(j), ConfigError);

    json k = minimal();
    k["extra_section"] = json::object();
    CHECK_THROWS_AS(parse_config(k), ConfigError);
}

TEST_CASE("config: invalid values are rejected with context") {
    SUBCASE("negative weight") {
        json j = minimal();
        j["cost"]["w3"] = -5;
        CHECK_THROWS_AS(parse_config(j), std::invalid_argument);
    }
    SUBCASE("bad policy kind") {
        json j = minimal();
        j["policy"]["kind"] = "other";
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SUBCASE("M must stay below N") {
        json j = minimal();
        j["policy"]["M"] = 10.0;  // equals N
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SUBCASE("empty sweep grid") {
        json j = minimal();
        j["sweep"] = {{"grid_min", 5.0}, {"grid_max", 1.0}, {"grid_step", 1.0}};
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SUBCASE("bad scenario") {
        json j = minimal();
        j["fast"] = {{"scenario", 3}};
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SUBCASE("non-integer update_every") {
        json j = minimal();
        j["fast"] = {{"update_every", 10.5}};
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SUBCASE("invalid start state") {
        json j = minimal();
        j["run"]["x_start"] = {0, 0, 1, 2};  // x4 > x3
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
}

TEST_CASE("config: dump then parse round-trips") {
    json j = minimal();
    j["model"]["lambda"] = {0.15, 0.3};
    j["run"]["theta_star"] = 5.5;
    j["fast"]["gamma_scale"] = 0.25;
    const ExperimentConfig a = parse_config(j);
    const ExperimentConfig b = parse_config(dump_config(a));
    CHECK(dump_config(a) == dump_config(b));
    CHECK(b.lambdas == a.lambdas);
    CHECK(b.run.theta_star == a.run.theta_star);
    CHECK(b.fast.gamma_scale == a.fast.gamma_scale);
    CHECK(b.smoothing.M == a.smoothing.M);
}

TEST_CASE("config: scenario 2 scales step sizes by update cadence") {
    FastConfig f;
    f.scenario = 2;
    CHECK(f.effective_gamma_scale(100, 1e6) == doctest::Approx(1e-4));
    CHECK(f.effective_gamma_scale(1000, 1e6) == doctest::Approx(1e-3));
    f.scenario = 1;
    CHECK(f.effective_gamma_scale(100, 1e6) == 1.0);
    f.gamma_scale = 0.5;
    CHECK(f.effective_gamma_scale(100, 1e6) == 0.5);
}

TEST_CASE("config: load_config reports missing files and parse errors") {
    CHECK_THROWS_AS(load_config("/nonexistent/path.json"), ConfigError);
}
