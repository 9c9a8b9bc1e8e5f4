#pragma once

#include "mmdfit/kernel.hpp"
#include "mmdfit/models.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace mmdfit {

enum class RegressionModelId {
    LinearGaussian,
    LinearGaussianLoc,
    Exponential,
    Gamma,
    GammaLoc,
    Beta,
    BetaLoc,
    Logistic,
    Poisson,
};

std::string_view to_string(RegressionModelId id);
/// Throws ConfigError listing the valid identifiers.
RegressionModelId parse_regression_model_id(std::string_view name);
std::span<const RegressionModelId> all_regression_model_ids();

/// What par2 means for a regression model.
enum class AuxKind { None, NoiseStd, Precision };
AuxKind aux_kind(RegressionModelId id);
/// Absent, Free or Fixed (the ".loc" variants need a user value).
SlotRole aux_role(RegressionModelId id);
/// Label used in summaries, e.g. "Std. dev. of Gaussian noise".
std::string_view aux_label(RegressionModelId id);

struct RegressionModelSpec {
    RegressionModelId id{};
    /// Coefficients: always free; a value only sets the starting point.
    ParamSlot par1;
    ParamSlot par2;

    /// Throws ConfigError when a fixed aux value is missing, out of range, or given
    /// for a model without one.
    static RegressionModelSpec make(RegressionModelId id, std::optional<std::vector<double>> par1 = std::nullopt,
                                    std::optional<double> par2 = std::nullopt);

    /// Optimizer coordinates carry log(aux) after the coefficients.
    bool aux_is_free() const { return aux_role(id) == SlotRole::Free; }
};

/// Largest exponent fed to exp() by log links; larger linear predictors saturate.
inline constexpr double kExpLinkCap = 700.0;

enum class LawFamily { Normal, Exponential, Gamma, Beta, Bernoulli, Poisson };

/// The conditional law of Y given the linear predictor eta.
///   Normal(eta, aux^2); Exponential with mean e^eta; Gamma with mean e^eta and
///   shape aux (rate aux / mean); Beta with mean logistic(eta) and precision aux,
///   i.e. Beta(mean aux, (1 - mean) aux); Bernoulli(logistic(eta)); Poisson(e^eta).
struct ConditionalLaw {
    LawFamily family = LawFamily::Normal;
    double eta = 0.0;
    double mean = 0.0;
    double aux = 1.0;
    bool capped = false;

    double sample(Rng& rng) const;
    double log_pdf(double y) const;
    bool in_support(double y) const;
    /// d log p(y) / d eta.
    double score_eta(double y) const;
    /// d log p(y) / d log(aux); zero for families without aux.
    double score_log_aux(double y) const;
};

ConditionalLaw conditional_law(RegressionModelId id, double eta, double aux);

/// Law of Y at covariates x_row; theta holds the coefficients followed by log(aux)
/// when aux is free. Throws InputError on a length mismatch.
ConditionalLaw regression_distribution(const RegressionModelSpec& model, std::span<const double> x_row,
                                       std::span<const double> theta);

/// A kernel expectation and its derivatives in the linear predictors and log(aux).
struct PairExpectation {
    double value = 0.0;
    double d_eta_a = 0.0;
    double d_eta_b = 0.0;
    double d_log_aux = 0.0;
};

struct PointExpectation {
    double value = 0.0;
    double d_eta = 0.0;
    double d_log_aux = 0.0;
};

/// Closed forms exist for the Normal law with Gaussian or Laplace kernels and
/// for Bernoulli outcomes with any kernel.
bool has_closed_form(LawFamily family, KernelFamily kernel);

/// E k(Y, Y') with Y ~ a, Y' ~ b independent; requires has_closed_form.
PairExpectation pair_expectation(const ConditionalLaw& a, const ConditionalLaw& b, const KernelSpec& spec);
/// E k(Y, y) with Y ~ a; requires has_closed_form.
PointExpectation point_expectation(const ConditionalLaw& a, double y, const KernelSpec& spec);

/// Throws InputError naming the first observation outside the model's support.
void check_response(RegressionModelId id, std::span<const double> y);

} // namespace mmdfit
