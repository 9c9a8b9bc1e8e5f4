#pragma once

#include "mmdfit/kernel.hpp"
#include "mmdfit/models.hpp"
#include "mmdfit/optim.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmdfit {

enum class Method { Auto, Exact, GD, SGD };

std::string_view to_string(Method m);
/// Accepts "auto", "exact", "GD", "SGD" (case-insensitive).
Method parse_method(std::string_view name);

/// How the regression criterion with bdwth.x = 0 aggregates per-observation discrepancies.
enum class TildeObjective {
    Squared,  // (1/n) sum_i D_i^2
    Root,     // (1/n) sum_i sqrt(D_i^2 + eps^2)
};

struct OptimizerConfig {
    Method method = Method::Auto;
    std::size_t maxit = 50'000;
    std::size_t mc_samples = 64;
    double step0 = 0.1;
    double adagrad_eps = 1e-8;
    double tol = 1e-6;
    std::size_t window = 50;
    std::uint64_t seed = 1;
    /// 0 means maxit / 2.
    std::size_t burnin = 0;
    /// Plain gradient steps of this size instead of backtracking.
    std::optional<double> fixed_step;
    /// Width of the integer enumeration window above max(data).
    std::size_t exact_window = 100;
    /// Index pairs per stochastic gradient of the O(n^2) regression criterion.
    std::size_t hat_batch = 64;
    /// Largest n accepted by the O(n^2) regression criterion.
    std::size_t hat_max_n = 5000;
    TildeObjective tilde_objective = TildeObjective::Squared;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

inline constexpr std::string_view kMaxitWarning = "The maximum number of iterations has been reached";

struct FitResult {
    ModelId model{};
    Params initial;
    Params estimates;
    std::vector<double> theta;
    Method method_used = Method::Auto;
    KernelSpec kernel{KernelFamily::Gaussian, 1.0};
    /// Full D^2 at the estimate; objective_exact is false when it was estimated by Monte Carlo.
    double objective = 0.0;
    bool objective_exact = true;
    std::vector<TracePoint> trace;
    std::size_t iterations = 0;
    std::vector<std::string> warnings;
};

struct Objective {
    double value = 0.0;
    bool exact = true;
};

/// Number of model draws used when D^2 has no closed form.
inline constexpr std::size_t kObjectiveMcDraws = 10'000;

/// D^2(P_theta, empirical data), data-data term included.
Objective objective_mmd2(const Model& model, std::span<const double> theta, const Sample& data,
                         const KernelSpec& spec, std::uint64_t seed = 1);

/// Analytic gradient of D^2 in optimizer coordinates; CapabilityError without closed forms.
std::vector<double> grad_mmd2_exact(const Model& model, std::span<const double> theta, const Sample& data,
                                    const KernelSpec& spec);

/// Unbiased Monte-Carlo gradient from m draws taken in pairs (m even, m >= 2).
/// Uses the score identity, or reparameterized draws for models that have them.
std::vector<double> grad_mmd2_mc(const Model& model, std::span<const double> theta, const Sample& data,
                                 const KernelSpec& spec, std::size_t m, std::uint64_t seed);
std::vector<double> grad_mmd2_mc(const Model& model, std::span<const double> theta, const Sample& data,
                                 const KernelSpec& spec, std::size_t m, Rng& rng);

/// Which methods exist for this (model, kernel) pair.
bool exact_available(const Model& model, const KernelSpec& spec);
bool gd_available(const Model& model, const KernelSpec& spec);
bool sgd_available(const Model& model);
/// The method chosen under the ranking exact > GD > SGD, or the forced one if available.
Method resolve_method(const Model& model, const KernelSpec& spec, Method requested);

/// Global minimizer of D^2 over the integer window [max(1, ceil(max data)), + cfg.exact_window].
FitResult fit_exact(const Model& model, const Sample& data, const KernelSpec& spec,
                    const OptimizerConfig& cfg = {});

FitResult fit(const Model& model, const Sample& data, const KernelSpec& spec, const OptimizerConfig& cfg = {});

} // namespace mmdfit
