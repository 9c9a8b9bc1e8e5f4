#pragma once

#include "mmdfit/kernel.hpp"

#include <optional>

namespace mmdfit {

/// exp(x^2) erfc(x), accurate for large positive x.
double erfcx(double x);
/// log of the standard normal CDF, accurate in the lower tail.
double log_normal_cdf(double t);

/// E[K(|Z| / bandwidth)] for Z ~ N(mu, s^2), with its partial derivatives.
struct NormalKernelMean {
    double value = 0.0;
    double d_mu = 0.0;
    double d_s = 0.0;
};

/// Closed form for the Gaussian and Laplace kernels; empty for the Cauchy kernel.
/// Requires s > 0.
///   Gaussian: g / sqrt(g^2 + 2 s^2) * exp(-mu^2 / (g^2 + 2 s^2))
///   Laplace:  e^{a^2/2} [e^{-mu/g} Phi(mu/s - a) + e^{mu/g} Phi(-mu/s - a)],  a = s / g
std::optional<NormalKernelMean> normal_kernel_mean(const KernelSpec& spec, double mu, double s);

inline bool has_normal_kernel_mean(KernelFamily family)
{
    return family == KernelFamily::Gaussian || family == KernelFamily::Laplace;
}

} // namespace mmdfit
