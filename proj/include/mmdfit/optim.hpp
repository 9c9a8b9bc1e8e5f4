#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace mmdfit {

/// One recorded optimizer iterate.
struct TracePoint {
    std::vector<double> theta;
    double objective = 0.0;
};

/// f(theta, grad): returns the objective and, when grad is non-null, fills it.
using SmoothObjective = std::function<double(std::span<const double>, std::vector<double>*)>;

struct GdOptions {
    std::size_t maxit = 50'000;
    double tol = 1e-6;
    std::size_t window = 50;
    double initial_step = 0.1;
    double armijo_c = 1e-4;
    int max_backtracks = 50;
    double grad_tol = 1e-10;
    /// Constant step without line search.
    std::optional<double> fixed_step;
    /// Coordinates held at their starting value.
    std::vector<std::size_t> frozen;
};

struct GdResult {
    std::vector<double> theta;
    double objective = 0.0;
    std::size_t iterations = 0;
    bool hit_maxit = false;
    bool line_search_failed = false;
    std::vector<TracePoint> trace;
};

/// Gradient descent with Barzilai-Borwein trial steps and Armijo backtracking.
/// Stops when the objective decreased by less than tol (relative) over the last
/// `window` iterations, when the gradient vanishes, or when backtracking finds no
/// descent. Throws InitializationError on a non-finite starting objective.
GdResult gradient_descent(const SmoothObjective& f, std::vector<double> theta0, const GdOptions& opts);

using Rng = std::mt19937_64;

/// Unbiased gradient estimate at theta written to grad; returns a noisy objective estimate.
using StochasticObjective = std::function<double(std::span<const double>, std::vector<double>&, Rng&)>;

struct AdagradOptions {
    std::size_t maxit = 50'000;
    double step0 = 0.1;
    double eps = 1e-8;
    /// Iterates before this index are excluded from the average. 0 means maxit / 2.
    std::size_t burnin = 0;
    /// Stop early once window-averaged objectives change by less than tol.
    bool window_stop = false;
    double tol = 1e-6;
    std::size_t window = 50;
    std::vector<std::size_t> frozen;
    std::uint64_t seed = 1;
};

struct AdagradResult {
    /// Average of the post-burn-in iterates (the last iterate if none qualified).
    std::vector<double> theta;
    std::size_t iterations = 0;
    bool hit_maxit = false;
    std::vector<TracePoint> trace;
};

AdagradResult adagrad(const StochasticObjective& f, std::vector<double> theta0, const AdagradOptions& opts);

} // namespace mmdfit
