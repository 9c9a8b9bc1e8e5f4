#pragma once

#include "mmdfit/fit_est.hpp"
#include "mmdfit/kernel.hpp"
#include "mmdfit/regression_models.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mmdfit {

struct RegressionProblem {
    std::vector<double> y;
    /// n x q covariates, row-major.
    Sample x{1, {0.0}};
    /// Prepend a column of ones unless a constant column is already present.
    bool intercept = true;
    RegressionModelSpec model;
    KernelSpec kernel_y{KernelFamily::Gaussian, 1.0};
    KernelFamily kernel_x = KernelFamily::Laplace;
    /// 0 selects the O(n) criterion (theta tilde); positive selects theta hat.
    double bdwth_x = 0.0;
};

enum class EstimatorKind { ThetaTilde, ThetaHat };
std::string_view to_string(EstimatorKind k);

/// Automatic response bandwidth: median pairwise |y_i - y_j| divided by sqrt(2).
double auto_bdwth_y(std::span<const double> y);
/// Default response kernel: Gaussian for the linear models, Laplace otherwise.
KernelFamily default_kernel_y(RegressionModelId id);

/// Number of coefficients after intercept augmentation.
std::size_t coefficient_count(const RegressionProblem& p);
/// True when an intercept column will be prepended.
bool adds_intercept(const RegressionProblem& p);

/// Coordinates: coefficients, then log(aux) when aux is free.
std::size_t coordinate_count(const RegressionProblem& p);

/// theta tilde criterion: mean of the per-observation squared discrepancies
/// D_i^2 = E k(Y_i, Y_i') - 2 E k(Y_i, y_i) + k(y_i, y_i), or of their smoothed
/// square roots. Terms without closed forms use 1000 Monte-Carlo draws.
double objective_tilde(const RegressionProblem& p, std::span<const double> theta,
                       TildeObjective kind = TildeObjective::Squared, std::uint64_t seed = 1);

/// theta hat criterion D^2 = (1/n^2) sum_ij k_X(x_i, x_j) [E k(Y_i, Y_j') - 2 E k(Y_i, y_j) + k(y_i, y_j)].
/// Requires bdwth_x > 0; throws BudgetError when n exceeds max_n.
double objective_hat2(const RegressionProblem& p, std::span<const double> theta, std::size_t max_n = 5000,
                      std::uint64_t seed = 1);
/// sqrt(max(D^2, 0)).
double objective_hat(const RegressionProblem& p, std::span<const double> theta, std::size_t max_n = 5000,
                     std::uint64_t seed = 1);

/// Exact gradient of objective_tilde; CapabilityError without closed-form terms.
std::vector<double> grad_tilde(const RegressionProblem& p, std::span<const double> theta,
                               TildeObjective kind = TildeObjective::Squared);

/// Unbiased estimate of the gradient of objective_hat2 from `batch` sampled index
/// pairs, stratified between the diagonal and off-diagonal parts of the double sum.
std::vector<double> grad_hat_stochastic(const RegressionProblem& p, std::span<const double> theta,
                                        std::size_t batch, std::uint64_t seed);

/// Exact gradient of objective_hat2 (O(n^2)); requires closed-form terms.
std::vector<double> grad_hat_exact(const RegressionProblem& p, std::span<const double> theta);

struct RegFitResult {
    RegressionModelId model{};
    EstimatorKind estimator = EstimatorKind::ThetaTilde;
    Method method_used = Method::GD;
    bool intercept_added = false;
    std::vector<double> coefficients;
    std::vector<double> initial_coefficients;
    /// Noise std or precision; empty for models without one.
    std::optional<double> aux;
    std::optional<double> initial_aux;
    bool aux_fixed = false;
    KernelSpec kernel_y{KernelFamily::Gaussian, 1.0};
    KernelFamily kernel_x = KernelFamily::Laplace;
    double bdwth_x = 0.0;
    std::vector<double> theta;
    double objective = 0.0;
    std::vector<TracePoint> trace;
    std::size_t iterations = 0;
    std::vector<std::string> warnings;
};

/// Default starting point in optimizer coordinates.
std::vector<double> default_regression_start(const RegressionProblem& p);

RegFitResult fit_regression(const RegressionProblem& p, const OptimizerConfig& cfg = {});

} // namespace mmdfit
