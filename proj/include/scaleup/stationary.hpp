#pragma once

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "scaleup/cost.hpp"
#include "scaleup/policy.hpp"
#include "scaleup/state.hpp"
#include "scaleup/transitions.hpp"

namespace scaleup {

struct SolverFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolveOptions {
    enum class Method { Auto, Dense, Power, Krylov, SparseDirect };
    Method method = Method::Auto;
    double tol = 1e-10;                      // target on ||m Q||_inf
    std::int64_t max_iterations = 1'000'000;  // power-iteration cap
    const std::vector<double>* warm_start = nullptr;  // full-space measure
};

struct StationarySolution {
    std::vector<double> m;        // full space; zero off the reachable class
    double residual = 0.0;        // ||m Q||_inf at return
    std::int64_t iterations = 0;  // matrix-vector products spent
    std::int64_t reachable = 0;
    std::string method;
};

// States reachable from the empty system under the policy, ascending order.
inline std::vector<std::int64_t> reachable_from_empty(const StateSpace& space,
                                                      const PolicySpec& policy,
                                                      const ModelParams& p) {
    std::vector<char> seen(space.size(), 0);
    std::deque<std::int64_t> queue;
    const std::int64_t start = space.index_of(SystemState{});
    seen[static_cast<std::size_t>(start)] = 1;
    queue.push_back(start);
    while (!queue.empty()) {
        const std::int64_t i = queue.front();
        queue.pop_front();
        for (const auto& t : out_transitions(space[static_cast<std::size_t>(i)], policy, p)) {
            const std::int64_t j = space.index_of(t.to);
            if (!seen[static_cast<std::size_t>(j)]) {
                seen[static_cast<std::size_t>(j)] = 1;
                queue.push_back(j);
            }
        }
    }
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (seen[i]) out.push_back(static_cast<std::int64_t>(i));
    return out;
}

// True when every reachable state can also return to the empty state, i.e.
// the reachable set is one closed communicating class.
inline bool reachable_class_is_irreducible(const StateSpace& space, const PolicySpec& policy,
                                           const ModelParams& p) {
    const auto reach = reachable_from_empty(space, policy, p);
    std::vector<std::int64_t> red(space.size(), -1);
    for (std::size_t r = 0; r < reach.size(); ++r) red[static_cast<std::size_t>(reach[r])] = static_cast<std::int64_t>(r);
    std::vector<std::vector<std::int32_t>> rev(reach.size());
    for (std::size_t r = 0; r < reach.size(); ++r)
        for (const auto& t : out_transitions(space[static_cast<std::size_t>(reach[r])], policy, p)) {
            const std::int64_t j = red[static_cast<std::size_t>(space.index_of(t.to))];
            if (j >= 0 && static_cast<std::size_t>(j) != r) rev[static_cast<std::size_t>(j)].push_back(static_cast<std::int32_t>(r));
        }
    std::vector<char> seen(reach.size(), 0);
    std::deque<std::int32_t> queue;
    const std::int64_t start = red[static_cast<std::size_t>(space.index_of(SystemState{}))];
    seen[static_cast<std::size_t>(start)] = 1;
    queue.push_back(static_cast<std::int32_t>(start));
    std::size_t visited = 1;
    while (!queue.empty()) {
        const std::int32_t i = queue.front();
        queue.pop_front();
        for (std::int32_t j : rev[static_cast<std::size_t>(i)])
            if (!seen[static_cast<std::size_t>(j)]) {
                seen[static_cast<std::size_t>(j)] = 1;
                ++visited;
                queue.push_back(j);
            }
    }
    return visited == reach.size();
}

namespace detail {

// Transposed generator restricted to the reachable class.
inline Eigen::SparseMatrix<double> reachable_qt(const StateSpace& space, const PolicySpec& policy,
                                                const ModelParams& p,
                                                const std::vector<std::int64_t>& reach) {
    std::vector<std::int64_t> red(space.size(), -1);
    for (std::size_t r = 0; r < reach.size(); ++r) red[static_cast<std::size_t>(reach[r])] = static_cast<std::int64_t>(r);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(reach.size() * 7);
    for (std::size_t r = 0; r < reach.size(); ++r) {
        const SystemState& x = space[static_cast<std::size_t>(reach[r])];
        double total = 0.0;
        for (const auto& t : out_transitions(x, policy, p)) {
            if (t.to == x) continue;
            const std::int64_t j = red[static_cast<std::size_t>(space.index_of(t.to))];
            if (j < 0) throw std::logic_error("reachable_qt: reachable set is not closed");
            trips.emplace_back(static_cast<int>(j), static_cast<int>(r), t.rate);
            total += t.rate;
        }
        trips.emplace_back(static_cast<int>(r), static_cast<int>(r), -total);
    }
    Eigen::SparseMatrix<double> qt(static_cast<Eigen::Index>(reach.size()),
                                   static_cast<Eigen::Index>(reach.size()));
    qt.setFromTriplets(trips.begin(), trips.end());
    return qt;
}

inline double cleanup_measure(Eigen::VectorXd& v) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (v[i] < 0.0) {
            worst = std::min(worst, v[i]);
            v[i] = 0.0;
        }
    const double s = v.sum();
    if (!(s > 0.0)) throw SolverFailure("stationary solve produced a degenerate measure");
    v /= s;
    return worst;
}

inline double residual_inf(const Eigen::SparseMatrix<double>& qt, const Eigen::VectorXd& v) {
    return (qt * v).lpNorm<Eigen::Infinity>();
}

// qt / big_lambda with the last balance row replaced by the normalization
// row; the balance equations are rank-deficient by one, so dropping one of
// them keeps the solution and pinning the total mass makes it unique.
inline Eigen::SparseMatrix<double> normalized_system(const Eigen::SparseMatrix<double>& qt,
                                                     double big_lambda) {
    const Eigen::Index n = qt.rows();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(qt.nonZeros()) + static_cast<std::size_t>(n));
    for (Eigen::Index c = 0; c < qt.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(qt, c); it; ++it)
            if (it.row() != n - 1) trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value() / big_lambda);
    for (Eigen::Index c = 0; c < n; ++c) trips.emplace_back(static_cast<int>(n - 1), static_cast<int>(c), 1.0);
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(trips.begin(), trips.end());
    return a;
}

struct ReducedSolve {
    Eigen::VectorXd v;
    double residual = 0.0;
    std::int64_t iterations = 0;
    std::string method;
};

inline Eigen::VectorXd initial_guess(Eigen::Index n, const std::vector<double>* warm,
                                     const std::vector<std::int64_t>& reach) {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    if (warm && !warm->empty()) {
        double s = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) s += std::max(0.0, (*warm)[static_cast<std::size_t>(reach[static_cast<std::size_t>(r)])]);
        if (s > 0.0)
            for (Eigen::Index r = 0; r < n; ++r)
                v[r] = std::max(0.0, (*warm)[static_cast<std::size_t>(reach[static_cast<std::size_t>(r)])]) / s;
    }
    return v;
}

// Power iteration on the uniformized kernel: v <- v + (Q^T v) / Lambda.
// Allocation-light and certifiably convergent, but slow when the chain has
// slow modes; used directly on small spaces and as polish elsewhere.
inline ReducedSolve power_solve(const Eigen::SparseMatrix<double>& qt, double big_lambda,
                                Eigen::VectorXd v, double tol, std::int64_t max_iters) {
    ReducedSolve out;
    out.method = "power";
    Eigen::VectorXd r(v.size());
    double res = std::numeric_limits<double>::infinity();
    std::int64_t k = 0;
    while (k < max_iters) {
        r.noalias() = qt * v;
        res = r.lpNorm<Eigen::Infinity>();
        if (res <= tol) break;
        v += r / big_lambda;
        ++k;
        if ((k & 63) == 0) v /= v.sum();
    }
    cleanup_measure(v);
    out.v = std::move(v);
    out.iterations = k;
    out.residual = residual_inf(qt, out.v);
    return out;
}

inline ReducedSolve dense_solve(const Eigen::SparseMatrix<double>& qt, double big_lambda) {
    const Eigen::Index n = qt.rows();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index c = 0; c < qt.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(qt, c); it; ++it)
            if (it.row() != n - 1) a(it.row(), it.col()) = it.value() / big_lambda;
    a.row(n - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b[n - 1] = 1.0;
    ReducedSolve out;
    out.method = "dense";
    out.v = Eigen::PartialPivLU<Eigen::MatrixXd>(a).solve(b);
    cleanup_measure(out.v);
    out.residual = residual_inf(qt, out.v);
    return out;
}

inline ReducedSolve krylov_solve(const Eigen::SparseMatrix<double>& qt, double big_lambda,
                                 const Eigen::VectorXd& guess) {
    const Eigen::Index n = qt.rows();
    const Eigen::SparseMatrix<double> a = normalized_system(qt, big_lambda);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b[n - 1] = 1.0;
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> solver;
    solver.preconditioner().setDroptol(1e-7);
    solver.preconditioner().setFillfactor(40);
    solver.setTolerance(1e-13);
    solver.setMaxIterations(2000);
    solver.compute(a);
    if (solver.info() == Eigen::NumericalIssue)
        throw SolverFailure("krylov_solve: preconditioner factorization failed");
    ReducedSolve out;
    out.method = "bicgstab";
    out.v = solver.solveWithGuess(b, guess);
    out.iterations = solver.iterations();
    cleanup_measure(out.v);
    out.residual = residual_inf(qt, out.v);
    return out;
}

inline ReducedSolve sparse_direct_solve(const Eigen::SparseMatrix<double>& qt, double big_lambda) {
    Eigen::SparseMatrix<double> a = normalized_system(qt, big_lambda);
    a.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw SolverFailure("sparse_direct_solve: factorization failed");
    Eigen::VectorXd b = Eigen::VectorXd::Zero(qt.rows());
    b[qt.rows() - 1] = 1.0;
    ReducedSolve out;
    out.method = "sparse-lu";
    out.v = lu.solve(b);
    cleanup_measure(out.v);
    out.residual = residual_inf(qt, out.v);
    return out;
}

}  // namespace detail

inline StationarySolution solve_stationary(const StateSpace& space, const PolicySpec& policy,
                                           const ModelParams& p, const SolveOptions& opts = {}) {
    policy.validate();
    const auto reach = reachable_from_empty(space, policy, p);
    StationarySolution sol;
    sol.reachable = static_cast<std::int64_t>(reach.size());
    sol.m.assign(space.size(), 0.0);
    if (reach.size() == 1) {
        sol.m[static_cast<std::size_t>(reach[0])] = 1.0;
        sol.method = "closed-form";
        return sol;
    }

    const double big_lambda = uniformization_rate(p);
    const Eigen::SparseMatrix<double> qt = detail::reachable_qt(space, policy, p, reach);
    const Eigen::Index n = qt.rows();
    const Eigen::VectorXd guess = detail::initial_guess(n, opts.warm_start, reach);

    using Method = SolveOptions::Method;
    detail::ReducedSolve red;
    auto attempt_chain = [&]() {
        // Krylov first, power polish if it lands close, then the heavier
        // fallbacks; every step is certified by the generator residual.
        detail::ReducedSolve best;
        best.residual = std::numeric_limits<double>::infinity();
        try {
            best = detail::krylov_solve(qt, big_lambda, guess);
        } catch (const SolverFailure&) {
        }
        if (best.residual <= opts.tol) return best;
        {
            Eigen::VectorXd start = best.v.size() == n ? best.v : guess;
            auto polished = detail::power_solve(qt, big_lambda, start, opts.tol, opts.max_iterations);
            polished.iterations += best.iterations;
            polished.method = best.v.size() == n ? "bicgstab+power" : "power";
            if (polished.residual <= opts.tol) return polished;
            best = polished;
        }
        if (n <= 30000) {
            auto direct = detail::sparse_direct_solve(qt, big_lambda);
            if (direct.residual <= opts.tol) return direct;
            if (direct.residual < best.residual) best = direct;
        }
        throw SolverFailure("stationary solve missed tolerance: best residual " +
                            std::to_string(best.residual) + " by " + best.method);
        return best;
    };

    switch (opts.method) {
        case Method::Dense:
            red = detail::dense_solve(qt, big_lambda);
            break;
        case Method::Power:
            red = detail::power_solve(qt, big_lambda, guess, opts.tol, opts.max_iterations);
            break;
        case Method::Krylov:
            red = detail::krylov_solve(qt, big_lambda, guess);
            break;
        case Method::SparseDirect:
            red = detail::sparse_direct_solve(qt, big_lambda);
            break;
        case Method::Auto:
            if (n <= 1200)
                red = detail::dense_solve(qt, big_lambda);
            else
                red = attempt_chain();
            break;
    }
    if (red.residual > opts.tol)
        throw SolverFailure("stationary solve (" + red.method + ") missed tolerance: residual " +
                            std::to_string(red.residual));
    for (Eigen::Index r = 0; r < n; ++r)
        sol.m[static_cast<std::size_t>(reach[static_cast<std::size_t>(r)])] = red.v[r];
    sol.residual = red.residual;
    sol.iterations = red.iterations;
    sol.method = red.method;
    return sol;
}

inline double expected_cost(const StationarySolution& sol, const StateSpace& space,
                            const CostWeights& w) {
    double c = 0.0;
    for (std::size_t i = 0; i < space.size(); ++i)
        if (sol.m[i] > 0.0) c += sol.m[i] * instant_cost(space[i], w, space.capacity());
    return c;
}

struct OracleEval {
    StationarySolution solution;
    double cost = 0.0;
};

inline OracleEval eval_stationary_cost(const StateSpace& space, const PolicySpec& policy,
                                       const ModelParams& p, const CostWeights& w,
                                       const SolveOptions& opts = {}) {
    OracleEval out;
    out.solution = solve_stationary(space, policy, p, opts);
    out.cost = expected_cost(out.solution, space, w);
    return out;
}

inline PolicySpec make_policy(PolicyKind kind, double theta, const SmoothingSpec& s) {
    PolicySpec policy;
    policy.kind = kind;
    policy.theta = theta;
    if (kind == PolicyKind::BinomialSmoothed) policy.smoothing = s;
    return policy;
}

// Central difference of the stationary cost in theta.
inline double fd_derivative(const StateSpace& space, PolicyKind kind, const SmoothingSpec& s,
                            const ModelParams& p, const CostWeights& w, double theta, double h,
                            const SolveOptions& opts = {}) {
    if (!(h > 0.0)) throw std::invalid_argument("fd_derivative: need h > 0");
    const double hi = eval_stationary_cost(space, make_policy(kind, theta + h, s), p, w, opts).cost;
    const double lo = eval_stationary_cost(space, make_policy(kind, theta - h, s), p, w, opts).cost;
    return (hi - lo) / (2.0 * h);
}

struct MinimumResult {
    double theta = 0.0;
    double value = 0.0;
    int evaluations = 0;
};

// Golden-section search on [lo, hi]; the bracket must come from a region the
// sweep showed to be unimodal. Evaluation patterns impossible under
// unimodality abort with the offending triple.
inline MinimumResult locate_minimum(const std::function<double(double)>& f, double lo, double hi,
                                    double tol = 1e-3) {
    if (!(lo < hi)) throw std::invalid_argument("locate_minimum: need lo < hi");
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo, b = hi;
    double fa = f(a), fb = f(b);
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    int evals = 4;
    auto check = [&]() {
        const double slack = 1e-12 * (1.0 + std::abs(f1) + std::abs(f2));
        const bool bad = (f1 > fa + slack && f2 > fb + slack) ||
                         (f1 > fa + slack && f2 + slack < f1) ||
                         (f2 > fb + slack && f1 + slack < f2);
        if (bad)
            throw std::runtime_error(
                "locate_minimum: non-unimodal bracket at theta = {" + std::to_string(x1) + ", " +
                std::to_string(x2) + ", " + std::to_string(b) + "}, f = {" + std::to_string(f1) +
                ", " + std::to_string(f2) + ", " + std::to_string(fb) + "}");
    };
    check();
    while (b - a > tol) {
        if (f1 <= f2) {
            b = x2;
            fb = f2;
            x2 = x1;
            f2 = f1;
            x1 = b - kInvPhi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            fa = f1;
            x1 = x2;
            f1 = f2;
            x2 = a + kInvPhi * (b - a);
            f2 = f(x2);
        }
        ++evals;
        check();
    }
    MinimumResult out;
    out.theta = 0.5 * (a + b);
    out.value = f(out.theta);
    out.evaluations = evals + 1;
    return out;
}

struct SweepRow {
    double theta = 0.0;
    double cost = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();
    std::int64_t states = 0;
    std::int64_t iterations = 0;
    bool ok = false;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    int failures = 0;
};

// Stationary cost along a parameter grid; per-point failures are recorded
// and the remaining points still run. Each solve warm-starts from the
// previous point's measure, which cuts iteration counts on fine grids.
inline SweepResult sweep_cost(const StateSpace& space, PolicyKind kind, const SmoothingSpec& s,
                              const ModelParams& p, const CostWeights& w,
                              const std::vector<double>& grid, const SolveOptions& opts = {}) {
    SweepResult out;
    out.rows.resize(grid.size());
    std::vector<double> warm;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        SweepRow& row = out.rows[g];
        row.theta = grid[g];
        SolveOptions local = opts;
        if (!warm.empty()) local.warm_start = &warm;
        try {
            OracleEval eval = eval_stationary_cost(space, make_policy(kind, grid[g], s), p, w, local);
            row.cost = eval.cost;
            row.residual = eval.solution.residual;
            row.states = eval.solution.reachable;
            row.iterations = eval.solution.iterations;
            row.ok = true;
            warm = std::move(eval.solution.m);
        } catch (const SolverFailure&) {
            ++out.failures;
        }
    }
    return out;
}

}  // namespace scaleup
