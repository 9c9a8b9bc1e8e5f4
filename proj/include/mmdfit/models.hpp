#pragma once

#include "mmdfit/kernel.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mmdfit {

using Rng = std::mt19937_64;

enum class ModelId {
    Gaussian,
    GaussianLoc,
    GaussianScale,
    Cauchy,
    Pareto,
    Exponential,
    Gamma,
    GammaShape,
    GammaRate,
    UniformLoc,
    UniformUpper,
    UniformLowerUpper,
    Dirac,
    DiscreteUniform,
    Binomial,
    BinomialSize,
    BinomialProb,
    Geometric,
    Poisson,
    MultiGaussian,
    MultiGaussianLoc,
    MultiGaussianScale,
    MultiDirac,
};

/// Package model identifiers, e.g. "Gaussian.loc", "multidim.Gaussian.scale".
std::string_view to_string(ModelId id);
/// Throws ConfigError listing every valid identifier.
ModelId parse_model_id(std::string_view name);
std::span<const ModelId> all_model_ids();
bool is_multivariate(ModelId id);

/// How a parameter slot of a model may be used.
enum class SlotRole {
    Absent,          // one-parameter model
    Free,            // estimated; a user value only initializes the optimizer
    Fixed,           // must be supplied by the user
    FixedOrDefault,  // supplied by the user or taken from a documented default
};

enum class ParamStatus { FreeDefault, FreeUserInit, Fixed };

struct ParamSlot {
    ParamStatus status = ParamStatus::FreeDefault;
    std::vector<double> value;

    bool is_free() const { return status != ParamStatus::Fixed; }
};

struct SlotLayout {
    SlotRole par1;
    SlotRole par2;
    std::string_view par1_name;
    std::string_view par2_name;
};

SlotLayout slot_layout(ModelId id);

struct ModelSpec {
    ModelId id;
    ParamSlot par1;
    ParamSlot par2;

    /// Resolves slot status from the model layout. Throws ConfigError when a fixed
    /// parameter is missing or a value is supplied for an absent slot.
    static ModelSpec make(ModelId id,
                          std::optional<std::vector<double>> par1 = std::nullopt,
                          std::optional<std::vector<double>> par2 = std::nullopt);
};

/// Natural parameters: par1 and par2 (par2 empty for one-parameter models).
struct Params {
    std::vector<double> par1;
    std::vector<double> par2;
};

/// Closed-form kernel expectations under P_theta against data x_1..x_n:
/// e_kk = E k(X, X'), e_kx[i] = E k(X, x_i).
struct ClosedForm {
    double e_kk = 0.0;
    std::vector<double> e_kx;
    /// d e_kk / d theta; empty unless gradients were requested.
    std::vector<double> grad_e_kk;
    /// d/d theta of (1/n) sum_i e_kx[i]; empty unless gradients were requested.
    std::vector<double> grad_mean_e_kx;
};

/// A parametric family with its fixed parameters bound. Optimizer coordinates
/// ("theta") are unconstrained: log for positive parameters, logit for probabilities,
/// log-diagonal lower-triangular factor for covariance matrices. Integer parameters
/// (N of discrete.uniform / binomial) occupy a coordinate holding the integer itself
/// and are never moved by gradient steps.
class Model {
public:
    virtual ~Model() = default;

    const ModelSpec& spec() const { return spec_; }
    ModelId id() const { return spec_.id; }
    std::size_t data_dim() const { return dim_; }
    virtual std::size_t num_coords() const = 0;

    /// Full natural parameters (fixed ones included) at optimizer coordinates theta.
    virtual Params natural(std::span<const double> theta) const = 0;
    /// Optimizer coordinates of the free parts of p.
    virtual std::vector<double> coords(const Params& p) const = 0;
    /// Throws ConfigError naming the offending parameter when p leaves the domain.
    virtual void validate(const Params& p) const = 0;
    /// Data-driven starting values (only the free parts are used).
    virtual Params default_init(const Sample& data) const = 0;

    /// m i.i.d. draws, appended row-major to out.
    virtual void sample(std::span<const double> theta, std::size_t m, Rng& rng,
                        std::vector<double>& out) const = 0;

    /// grad_theta log p_theta(x) is available.
    virtual bool has_score() const { return false; }
    /// Throws CapabilityError when has_score() is false.
    virtual void score(std::span<const double> theta, std::span<const double> x,
                       std::span<double> out) const;

    /// Reparameterized draws X = g(theta, u) with dX/dtheta (scalar models only).
    virtual bool has_pathwise() const { return false; }
    virtual void sample_pathwise(std::span<const double> theta, std::size_t m, Rng& rng,
                                 std::vector<double>& x, std::vector<double>& jacobian) const;

    /// log p_theta(x); CapabilityError for point masses.
    virtual double log_pdf(std::span<const double> theta, std::span<const double> x) const;

    virtual bool has_closed_form(const KernelSpec& spec) const;
    virtual std::optional<ClosedForm> closed_form(std::span<const double> theta,
                                                  const KernelSpec& spec, const Sample& data,
                                                  bool with_grad) const;

    /// Coordinates that hold integers searched by enumeration rather than gradients.
    virtual std::vector<std::size_t> integer_coords() const { return {}; }

    /// Starting natural parameters: user values where given, data defaults elsewhere.
    Params initial_params(const Sample& data) const;

protected:
    Model(ModelSpec spec, std::size_t dim) : spec_(std::move(spec)), dim_(dim) {}

    ModelSpec spec_;
    std::size_t dim_;
};

/// Throws ConfigError on inconsistent fixed values or dimensions.
std::unique_ptr<Model> make_model(const ModelSpec& spec, std::size_t data_dim);

/// m i.i.d. draws, deterministic given seed.
Sample sample(const Model& model, std::span<const double> theta, std::size_t m, std::uint64_t seed);

/// grad_theta log p_theta(x) in optimizer coordinates; CapabilityError for
/// Dirac, discrete.uniform, binomial N and uniform boundary parameters.
std::vector<double> log_density_grad(const Model& model, std::span<const double> theta,
                                     std::span<const double> x);

struct KernelExpectations {
    double e_kk = 0.0;
    std::vector<double> e_kx;
};

/// Closed-form kernel expectations when the (model, kernel) pair has them.
std::optional<KernelExpectations> kernel_expectations(const Model& model,
                                                      std::span<const double> theta,
                                                      const KernelSpec& spec, const Sample& data);

// Robust summaries shared by default initializations.
double median(std::vector<double> v);
/// 1.4826 * median(|v - median(v)|).
double mad_scale(const std::vector<double>& v);

inline double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

} // namespace mmdfit
