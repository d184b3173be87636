#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scaleup/kw.hpp"

namespace scaleup {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SweepConfig {
    double grid_min = 0.0;
    double grid_max = 15.0;
    double grid_step = 1.0;
    bool refine = true;

    std::vector<double> grid() const {
        std::vector<double> g;
        for (double v = grid_min; v <= grid_max + 1e-9; v += grid_step) g.push_back(v);
        return g;
    }
};

struct FastConfig {
    std::vector<std::int64_t> update_every{100, 1000};
    int scenario = 1;
    std::optional<double> gamma_scale;  // explicit override of the scenario rule

    double effective_gamma_scale(std::int64_t ue, double tau_ref) const {
        if (gamma_scale) return *gamma_scale;
        return scenario == 1 ? 1.0 : static_cast<double>(ue) / tau_ref;
    }
};

struct RunConfig {
    std::vector<std::uint64_t> seeds{1};
    std::string out = "out";
    int threads = 1;
    bool trace = false;
    SystemState x_start;
    std::optional<double> theta_star;  // reference minimizer for summaries
};

// One experiment file: key-value sections mirroring the module boundaries.
// lambda and theta0 may be lists; commands fan out over their product.
struct ExperimentConfig {
    ModelParams model;                  // model.lambda holds the first entry
    std::vector<double> lambdas{0.3};
    CostWeights cost;
    PolicyKind kind = PolicyKind::Simplified;
    SmoothingSpec smoothing;
    bool smoothing_m_defaulted = true;  // M defaults to N/2 when absent
    Schedules schedules;
    std::vector<double> theta0s{1.0};
    RunConfig run;
    SweepConfig sweep;
    FastConfig fast;

    KwConfig kw_config(double lambda, double theta0) const {
        KwConfig cfg;
        cfg.params = model;
        cfg.params.lambda = lambda;
        cfg.weights = cost;
        cfg.kind = kind;
        cfg.smoothing = smoothing;
        cfg.schedules = schedules;
        cfg.theta0 = theta0;
        cfg.x_start = run.x_start;
        return cfg;
    }

    void validate() const {
        model.validate();
        if (model.N < 1) throw ConfigError("config: model.N must be >= 1");
        cost.validate();
        smoothing.validate();
        if (!(smoothing.M < model.N)) throw ConfigError("config: policy.M must be < model.N");
        schedules.validate();
        if (lambdas.empty()) throw ConfigError("config: model.lambda must not be empty");
        for (double l : lambdas)
            if (!(l > 0.0)) throw ConfigError("config: model.lambda entries must be positive");
        if (theta0s.empty()) throw ConfigError("config: schedules.theta0 must not be empty");
        if (run.seeds.empty()) throw ConfigError("config: run.seeds must not be empty");
        if (run.threads < 1) throw ConfigError("config: run.threads must be >= 1");
        if (!valid_state(run.x_start, model.N)) throw ConfigError("config: run.x_start is not a valid state");
        if (!(sweep.grid_step > 0.0)) throw ConfigError("config: sweep.grid_step must be positive");
        if (sweep.grid().empty()) throw ConfigError("config: sweep grid is empty");
        if (fast.update_every.empty()) throw ConfigError("config: fast.update_every must not be empty");
        for (std::int64_t u : fast.update_every)
            if (u < 1) throw ConfigError("config: fast.update_every entries must be >= 1");
        if (fast.scenario != 1 && fast.scenario != 2) throw ConfigError("config: fast.scenario must be 1 or 2");
    }
};

namespace detail {

using nlohmann::json;

inline void expect_keys(const json& obj, const std::string& section,
                        std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ConfigError("config: unknown key '" + (section.empty() ? key : section + "." + key) + "'");
    }
}

inline double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError("config: " + where + " must be a number");
    return v.get<double>();
}

inline std::int64_t as_integer(const json& v, const std::string& where) {
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::floor(d) != d) throw ConfigError("config: " + where + " must be an integer");
        return static_cast<std::int64_t>(d);
    }
    throw ConfigError("config: " + where + " must be an integer");
}

inline bool as_bool(const json& v, const std::string& where) {
    if (!v.is_boolean()) throw ConfigError("config: " + where + " must be a boolean");
    return v.get<bool>();
}

inline std::vector<double> as_number_list(const json& v, const std::string& where) {
    std::vector<double> out;
    if (v.is_array()) {
        for (const auto& e : v) out.push_back(as_number(e, where));
        if (out.empty()) throw ConfigError("config: " + where + " must not be empty");
    } else {
        out.push_back(as_number(v, where));
    }
    return out;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& root) {
    using detail::as_bool;
    using detail::as_integer;
    using detail::as_number;
    using detail::as_number_list;
    using detail::expect_keys;

    if (!root.is_object()) throw ConfigError("config: top level must be an object");
    expect_keys(root, "", {"model", "cost", "policy", "schedules", "run", "sweep", "fast"});
    ExperimentConfig cfg;

    if (root.contains("model")) {
        const auto& m = root["model"];
        expect_keys(m, "model", {"N", "lambda", "mu", "beta", "gamma"});
        if (m.contains("N")) cfg.model.N = static_cast<int>(as_integer(m["N"], "model.N"));
        if (m.contains("lambda")) cfg.lambdas = as_number_list(m["lambda"], "model.lambda");
        if (m.contains("mu")) cfg.model.mu = as_number(m["mu"], "model.mu");
        if (m.contains("beta")) cfg.model.beta = as_number(m["beta"], "model.beta");
        if (m.contains("gamma")) cfg.model.gamma = as_number(m["gamma"], "model.gamma");
    }
    cfg.model.lambda = cfg.lambdas.empty() ? 0.0 : cfg.lambdas.front();

    if (root.contains("cost")) {
        const auto& c = root["cost"];
        expect_keys(c, "cost", {"w1", "w2", "w3", "w4", "w_rej"});
        if (c.contains("w1")) cfg.cost.w1 = as_number(c["w1"], "cost.w1");
        if (c.contains("w2")) cfg.cost.w2 = as_number(c["w2"], "cost.w2");
        if (c.contains("w3")) cfg.cost.w3 = as_number(c["w3"], "cost.w3");
        if (c.contains("w4")) cfg.cost.w4 = as_number(c["w4"], "cost.w4");
        if (c.contains("w_rej")) cfg.cost.w_rej = as_number(c["w_rej"], "cost.w_rej");
    }

    cfg.smoothing.M = cfg.model.N / 2.0;
    if (root.contains("policy")) {
        const auto& p = root["policy"];
        expect_keys(p, "policy", {"kind", "epsilon", "M"});
        if (p.contains("kind")) {
            const std::string k = p["kind"].is_string() ? p["kind"].get<std::string>() : "";
            if (k == "simplified")
                cfg.kind = PolicyKind::Simplified;
            else if (k == "binomial")
                cfg.kind = PolicyKind::BinomialSmoothed;
            else
                throw ConfigError("config: policy.kind must be 'simplified' or 'binomial'");
        }
        if (p.contains("epsilon")) cfg.smoothing.epsilon = as_number(p["epsilon"], "policy.epsilon");
        if (p.contains("M")) {
            cfg.smoothing.M = as_number(p["M"], "policy.M");
            cfg.smoothing_m_defaulted = false;
        }
    }

    if (root.contains("schedules")) {
        const auto& s = root["schedules"];
        expect_keys(s, "schedules", {"gamma0", "delta_exponent", "tau", "tau_mode", "K", "T", "theta0"});
        if (s.contains("gamma0")) cfg.schedules.gamma0 = as_number(s["gamma0"], "schedules.gamma0");
        if (s.contains("delta_exponent")) cfg.schedules.delta_exponent = as_number(s["delta_exponent"], "schedules.delta_exponent");
        if (s.contains("tau")) cfg.schedules.tau = as_number(s["tau"], "schedules.tau");
        if (s.contains("tau_mode")) {
            const std::string m = s["tau_mode"].is_string() ? s["tau_mode"].get<std::string>() : "";
            if (m == "log")
                cfg.schedules.tau_mode = TauMode::Log;
            else if (m == "const")
                cfg.schedules.tau_mode = TauMode::Const;
            else
                throw ConfigError("config: schedules.tau_mode must be 'log' or 'const'");
        }
        if (s.contains("K")) cfg.schedules.K = static_cast<int>(as_integer(s["K"], "schedules.K"));
        if (s.contains("T")) cfg.schedules.T = as_integer(s["T"], "schedules.T");
        if (s.contains("theta0")) cfg.theta0s = as_number_list(s["theta0"], "schedules.theta0");
    }

    if (root.contains("run")) {
        const auto& r = root["run"];
        expect_keys(r, "run", {"seeds", "out", "threads", "trace", "x_start", "theta_star"});
        if (r.contains("seeds")) {
            cfg.run.seeds.clear();
            if (r["seeds"].is_array())
                for (const auto& e : r["seeds"]) cfg.run.seeds.push_back(static_cast<std::uint64_t>(detail::as_integer(e, "run.seeds")));
            else
                cfg.run.seeds.push_back(static_cast<std::uint64_t>(detail::as_integer(r["seeds"], "run.seeds")));
        }
        if (r.contains("out")) {
            if (!r["out"].is_string()) throw ConfigError("config: run.out must be a string");
            cfg.run.out = r["out"].get<std::string>();
        }
        if (r.contains("threads")) cfg.run.threads = static_cast<int>(as_integer(r["threads"], "run.threads"));
        if (r.contains("trace")) cfg.run.trace = as_bool(r["trace"], "run.trace");
        if (r.contains("x_start")) {
            const auto& x = r["x_start"];
            if (!x.is_array() || x.size() != 4) throw ConfigError("config: run.x_start must be [x1,x2,x3,x4]");
            cfg.run.x_start = SystemState{static_cast<int>(as_integer(x[0], "run.x_start")),
                                          static_cast<int>(as_integer(x[1], "run.x_start")),
                                          static_cast<int>(as_integer(x[2], "run.x_start")),
                                          static_cast<int>(as_integer(x[3], "run.x_start"))};
        }
        if (r.contains("theta_star")) cfg.run.theta_star = as_number(r["theta_star"], "run.theta_star");
    }

    if (root.contains("sweep")) {
        const auto& s = root["sweep"];
        expect_keys(s, "sweep", {"grid_min", "grid_max", "grid_step", "refine"});
        if (s.contains("grid_min")) cfg.sweep.grid_min = as_number(s["grid_min"], "sweep.grid_min");
        if (s.contains("grid_max")) cfg.sweep.grid_max = as_number(s["grid_max"], "sweep.grid_max");
        if (s.contains("grid_step")) cfg.sweep.grid_step = as_number(s["grid_step"], "sweep.grid_step");
        if (s.contains("refine")) cfg.sweep.refine = as_bool(s["refine"], "sweep.refine");
    }

    if (root.contains("fast")) {
        const auto& f = root["fast"];
        expect_keys(f, "fast", {"update_every", "scenario", "gamma_scale"});
        if (f.contains("update_every")) {
            cfg.fast.update_every.clear();
            if (f["update_every"].is_array())
                for (const auto& e : f["update_every"]) cfg.fast.update_every.push_back(detail::as_integer(e, "fast.update_every"));
            else
                cfg.fast.update_every.push_back(detail::as_integer(f["update_every"], "fast.update_every"));
        }
        if (f.contains("scenario")) cfg.fast.scenario = static_cast<int>(as_integer(f["scenario"], "fast.scenario"));
        if (f.contains("gamma_scale")) cfg.fast.gamma_scale = as_number(f["gamma_scale"], "fast.gamma_scale");
    }

    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: parse error in '" + path + "': " + e.what());
    }
    return parse_config(root);
}

inline nlohmann::json dump_config(const ExperimentConfig& cfg) {
    nlohmann::json root;
    root["model"] = {{"N", cfg.model.N}, {"lambda", cfg.lambdas}, {"mu", cfg.model.mu},
                     {"beta", cfg.model.beta}, {"gamma", cfg.model.gamma}};
    root["cost"] = {{"w1", cfg.cost.w1}, {"w2", cfg.cost.w2}, {"w3", cfg.cost.w3},
                    {"w4", cfg.cost.w4}, {"w_rej", cfg.cost.w_rej}};
    root["policy"] = {{"kind", cfg.kind == PolicyKind::Simplified ? "simplified" : "binomial"},
                      {"epsilon", cfg.smoothing.epsilon}, {"M", cfg.smoothing.M}};
    root["schedules"] = {{"gamma0", cfg.schedules.gamma0}, {"delta_exponent", cfg.schedules.delta_exponent},
                         {"tau", cfg.schedules.tau}, {"tau_mode", cfg.schedules.tau_mode == TauMode::Log ? "log" : "const"},
                         {"K", cfg.schedules.K}, {"T", cfg.schedules.T}, {"theta0", cfg.theta0s}};
    root["run"] = {{"seeds", cfg.run.seeds}, {"out", cfg.run.out}, {"threads", cfg.run.threads},
                   {"trace", cfg.run.trace},
                   {"x_start", {cfg.run.x_start.x1, cfg.run.x_start.x2, cfg.run.x_start.x3, cfg.run.x_start.x4}}};
    if (cfg.run.theta_star) root["run"]["theta_star"] = *cfg.run.theta_star;
    root["sweep"] = {{"grid_min", cfg.sweep.grid_min}, {"grid_max", cfg.sweep.grid_max},
                     {"grid_step", cfg.sweep.grid_step}, {"refine", cfg.sweep.refine}};
    root["fast"] = {{"update_every", cfg.fast.update_every}, {"scenario", cfg.fast.scenario}};
    if (cfg.fast.gamma_scale) root["fast"]["gamma_scale"] = *cfg.fast.gamma_scale;
    return root;
}

}  // namespace scaleup
