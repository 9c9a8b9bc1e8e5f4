// Check suites run by both the unit tests and the acceptance binary.
#pragma once

#include "oracles.hpp"

#include "mmdfit/fit_est.hpp"
#include "mmdfit/fit_reg.hpp"

#include <string>
#include <vector>

namespace suites {

using namespace mmdfit;

struct Outcome {
    std::string label;
    /// Relative error for gradient checks, z-score for Monte-Carlo checks.
    double score = 0.0;
    bool ok = false;
};

/// Analytic gradient of D^2 against central differences of the closed-form objective.
inline std::vector<Outcome> closed_form_gradient_checks(int points = 20, double rel_tol = 1e-5,
                                                        std::uint64_t seed = 2024)
{
    std::vector<Outcome> out;
    Rng rng(seed);
    for (const auto& pair : oracle::closed_form_gradient_pairs()) {
        const auto m = make_model(oracle::test_spec(pair.id), oracle::test_dim(pair.id));
        const KernelSpec spec(pair.kernel, 1.1);
        const Sample data = sample(*m, m->coords(oracle::base_params(pair.id)), 15, seed + 1);
        double worst = 0.0;
        for (int p = 0; p < points; ++p) {
            const auto theta = oracle::random_theta(*m, rng);
            const auto g = grad_mmd2_exact(*m, theta, data, spec);
            const auto fd = oracle::central_difference(
                [&](std::span<const double> t) { return objective_mmd2(*m, t, data, spec).value; }, theta, 1e-5,
                m->integer_coords());
            double diff = 0.0;
            for (std::size_t k = 0; k < g.size(); ++k) {
                const auto ints = m->integer_coords();
                if (std::find(ints.begin(), ints.end(), k) != ints.end()) continue;
                diff = std::max(diff, std::abs(g[k] - fd[k]));
            }
            worst = std::max(worst, diff / std::max(oracle::max_abs(g), 1e-8));
        }
        out.push_back({std::string(to_string(pair.id)) + "/" + std::string(to_string(pair.kernel)), worst,
                       worst <= rel_tol});
    }
    return out;
}

/// Reference gradient of D^2: analytic where available, else central differences of
/// a quadrature (or exact summation) evaluation of D^2.
inline std::vector<double> reference_gradient(const Model& m, std::span<const double> theta, const Sample& data,
                                              const KernelSpec& spec)
{
    if (m.has_closed_form(spec)) return grad_mmd2_exact(m, theta, data, spec);
    std::vector<double> x;
    for (std::size_t i = 0; i < data.size(); ++i) x.push_back(data[i][0]);
    return oracle::central_difference(
        [&](std::span<const double> t) {
            return oracle::mmd2_reference(*oracle::law_of(m.id(), m.natural(t)), x, spec.family(), spec.bandwidth());
        },
        std::vector<double>(theta.begin(), theta.end()), 1e-4, m.integer_coords());
}

/// Mean of many Monte-Carlo gradients against the reference, in standard errors.
inline std::vector<Outcome> mc_gradient_checks(std::size_t total_draws = 100'000, std::size_t per_call = 50,
                                               int points = 3, double z_max = 4.0, std::uint64_t seed = 77)
{
    std::vector<Outcome> out;
    Rng rng(seed);
    for (ModelId id : all_model_ids()) {
        const auto m = make_model(oracle::test_spec(id), oracle::test_dim(id));
        if (!sgd_available(*m)) continue;
        const KernelSpec spec(KernelFamily::Gaussian, 1.0);
        const Sample data = sample(*m, m->coords(oracle::base_params(id)), 15, seed + 3);
        double worst = 0.0;
        for (int p = 0; p < points; ++p) {
            const auto theta = oracle::random_theta(*m, rng);
            const auto ref = reference_gradient(*m, theta, data, spec);
            const std::size_t reps = total_draws / per_call;
            std::vector<double> sum(ref.size(), 0.0), sum2(ref.size(), 0.0);
            for (std::size_t r = 0; r < reps; ++r) {
                const auto g = grad_mmd2_mc(*m, theta, data, spec, per_call, seed * 1000003 + p * 100000 + r);
                for (std::size_t k = 0; k < g.size(); ++k) {
                    sum[k] += g[k];
                    sum2[k] += g[k] * g[k];
                }
            }
            const double R = static_cast<double>(reps);
            for (std::size_t k = 0; k < ref.size(); ++k) {
                const double mean = sum[k] / R;
                const double var = std::max(sum2[k] / R - mean * mean, 0.0) * R / (R - 1.0);
                const double se = std::sqrt(var / R);
                // Small floor for the numerical error of the quadrature reference.
                const double z = std::max(std::abs(mean - ref[k]) - 1e-7, 0.0) / std::max(se, 1e-12);
                worst = std::max(worst, z);
            }
        }
        out.push_back({std::string(to_string(id)), worst, worst <= z_max});
    }
    return out;
}

/// argmin over N of D^2(U{1..N}, data) by direct summation over the support.
inline long brute_force_discrete_uniform(const std::vector<double>& x, const KernelSpec& spec, std::size_t window)
{
    const double mx = *std::max_element(x.begin(), x.end());
    const long lo = std::max(1L, static_cast<long>(std::ceil(mx)));
    long best = lo;
    double best_val = INFINITY;
    for (long n = lo; n <= lo + static_cast<long>(window); ++n) {
        double e_kk = 0.0, e_kx = 0.0;
        for (long a = 1; a <= n; ++a)
            for (long b = 1; b <= n; ++b) e_kk += spec.of_distance(std::abs(static_cast<double>(a - b)));
        e_kk /= static_cast<double>(n) * static_cast<double>(n);
        for (double v : x) {
            for (long a = 1; a <= n; ++a) e_kx += spec.of_distance(std::abs(static_cast<double>(a) - v));
        }
        e_kx /= static_cast<double>(n) * static_cast<double>(x.size());
        const double val = e_kk - 2.0 * e_kx;
        if (val < best_val) {
            best_val = val;
            best = n;
        }
    }
    return best;
}

/// Regression D^2 for the logistic model by explicit loops over pairs of
/// observations and pairs of outcomes.
inline double hat2_logistic_reference(const std::vector<double>& y, const std::vector<std::vector<double>>& x,
                                      const std::vector<double>& beta, const KernelSpec& ky, KernelFamily kx_family,
                                      double bw_x)
{
    const std::size_t n = y.size();
    std::vector<double> prob(n);
    for (std::size_t i = 0; i < n; ++i) {
        double eta = 0.0;
        for (std::size_t c = 0; c < beta.size(); ++c) eta += beta[c] * x[i][c];
        prob[i] = 1.0 / (1.0 + std::exp(-eta));
    }
    auto mass = [&](std::size_t i, int v) { return v == 1 ? prob[i] : 1.0 - prob[i]; };
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double kxx = oracle::kernel(kx_family, bw_x, x[i], x[j]);
            double pair = 0.0, cross = 0.0;
            for (int a = 0; a <= 1; ++a)
                for (int b = 0; b <= 1; ++b) pair += mass(i, a) * mass(j, b) * ky.of_distance(std::abs(a - b));
            for (int a = 0; a <= 1; ++a) cross += mass(i, a) * ky.of_distance(std::abs(a - y[j]));
            total += kxx * (pair - 2.0 * cross + ky.of_distance(std::abs(y[i] - y[j])));
        }
    return total / static_cast<double>(n * n);
}

/// Same criterion for the Gaussian linear model using the Gaussian-kernel identity
/// E exp(-(Z)^2 / g^2) = g / sqrt(g^2 + 2 v) exp(-m^2 / (g^2 + 2 v)) for Z ~ N(m, v).
inline double hat2_linear_gaussian_reference(const std::vector<double>& y, const std::vector<std::vector<double>>& x,
                                             const std::vector<double>& beta, double sigma, double bw_y,
                                             KernelFamily kx_family, double bw_x)
{
    const std::size_t n = y.size();
    std::vector<double> mu(n);
    for (std::size_t i = 0; i < n; ++i) {
        mu[i] = 0.0;
        for (std::size_t c = 0; c < beta.size(); ++c) mu[i] += beta[c] * x[i][c];
    }
    auto gauss_mean = [&](double m, double v) {
        const double d = bw_y * bw_y + 2.0 * v;
        return bw_y / std::sqrt(d) * std::exp(-m * m / d);
    };
    const double s2 = sigma * sigma;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double kxx = oracle::kernel(kx_family, bw_x, x[i], x[j]);
            const double pair = gauss_mean(mu[i] - mu[j], 2.0 * s2);
            const double cross = gauss_mean(mu[i] - y[j], s2);
            const double kyy = std::exp(-(y[i] - y[j]) * (y[i] - y[j]) / (bw_y * bw_y));
            total += kxx * (pair - 2.0 * cross + kyy);
        }
    return total / static_cast<double>(n * n);
}

/// Expected automatic method under the ranking exact > GD > SGD, derived from
/// which closed forms, scores and reparameterizations each model family has.
inline Method expected_method(ModelId id, KernelFamily k)
{
    const bool gaussian_family =
        id == ModelId::Gaussian || id == ModelId::GaussianLoc || id == ModelId::GaussianScale;
    const bool multi_gaussian =
        id == ModelId::MultiGaussian || id == ModelId::MultiGaussianLoc || id == ModelId::MultiGaussianScale;
    switch (id) {
    case ModelId::DiscreteUniform:
    case ModelId::BinomialSize: return Method::Exact;
    case ModelId::Dirac:
    case ModelId::MultiDirac:
    case ModelId::Binomial:
    case ModelId::BinomialProb: return Method::GD;
    default: break;
    }
    if (gaussian_family && k != KernelFamily::Cauchy) return Method::GD;
    if (multi_gaussian && k == KernelFamily::Gaussian) return Method::GD;
    return Method::SGD;
}

} // namespace suites
