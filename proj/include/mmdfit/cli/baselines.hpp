#pragma once

#include <vector>

namespace mmdfit::cli {

/// Least-squares coefficients of y on the rows of x (no implicit intercept).
std::vector<double> ols(const std::vector<double>& y, const std::vector<std::vector<double>>& x);

/// Poisson log-linear GLM by iteratively reweighted least squares.
/// Throws InputError if the iterations do not converge.
std::vector<double> poisson_glm(const std::vector<double>& y, const std::vector<std::vector<double>>& x,
                                int max_iter = 100, double tol = 1e-10);

/// Rows of x with a leading 1.
std::vector<std::vector<double>> with_intercept(const std::vector<std::vector<double>>& x);

} // namespace mmdfit::cli
