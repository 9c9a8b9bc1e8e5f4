#include "mmdfit/normal_expectation.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace mmdfit {

double erfcx(double x)
{
    if (x < 0.0) {
        if (x < -26.0) return std::numeric_limits<double>::infinity();
        return 2.0 * std::exp(x * x) - erfcx(-x);
    }
    if (x < 25.0) return std::exp(x * x) * std::erfc(x);
    // Asymptotic series 1/(x sqrt(pi)) sum_k (-1)^k (2k-1)!! / (2x^2)^k.
    const double inv2x2 = 1.0 / (2.0 * x * x);
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k <= 8; ++k) {
        term *= -(2.0 * k - 1.0) * inv2x2;
        sum += term;
    }
    return sum / (x * std::sqrt(std::numbers::pi));
}

double log_normal_cdf(double t)
{
    if (t > -5.0) return std::log(0.5 * std::erfc(-t / std::numbers::sqrt2));
    return -0.5 * t * t + std::log(0.5 * erfcx(-t / std::numbers::sqrt2));
}

std::optional<NormalKernelMean> normal_kernel_mean(const KernelSpec& spec, double mu, double s)
{
    const double g = spec.bandwidth();
    NormalKernelMean out;
    switch (spec.family()) {
    case KernelFamily::Gaussian: {
        const double a = g * g + 2.0 * s * s;
        out.value = g / std::sqrt(a) * std::exp(-mu * mu / a);
        out.d_mu = out.value * (-2.0 * mu / a);
        out.d_s = 4.0 * s * out.value * (mu * mu / (a * a) - 0.5 / a);
        return out;
    }
    case KernelFamily::Laplace: {
        const double a = s / g;
        const double t1 = mu / s - a;
        const double t2 = -mu / s - a;
        const double f1 = std::exp(0.5 * a * a - mu / g + log_normal_cdf(t1));
        const double f2 = std::exp(0.5 * a * a + mu / g + log_normal_cdf(t2));
        const double z = mu / s;
        const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
        out.value = f1 + f2;
        out.d_mu = (f2 - f1) / g;
        out.d_s = (s / (g * g)) * out.value - 2.0 * phi / g;
        return out;
    }
    case KernelFamily::Cauchy: return std::nullopt;
    }
    return std::nullopt;
}

} // namespace mmdfit
