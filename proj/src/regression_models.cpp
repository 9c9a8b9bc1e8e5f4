#include "mmdfit/regression_models.hpp"

#include "mmdfit/error.hpp"
#include "mmdfit/normal_expectation.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

namespace mmdfit {

namespace {

struct RegName {
    RegressionModelId id;
    std::string_view name;
};

constexpr std::array kRegNames{
    RegName{RegressionModelId::LinearGaussian, "linearGaussian"},
    RegName{RegressionModelId::LinearGaussianLoc, "linearGaussian.loc"},
    RegName{RegressionModelId::Exponential, "exponential"},
    RegName{RegressionModelId::Gamma, "gamma"},
    RegName{RegressionModelId::GammaLoc, "gamma.loc"},
    RegName{RegressionModelId::Beta, "beta"},
    RegName{RegressionModelId::BetaLoc, "beta.loc"},
    RegName{RegressionModelId::Logistic, "logistic"},
    RegName{RegressionModelId::Poisson, "poisson"},
};

constexpr auto kRegIds = [] {
    std::array<RegressionModelId, kRegNames.size()> ids{};
    for (std::size_t i = 0; i < kRegNames.size(); ++i) ids[i] = kRegNames[i].id;
    return ids;
}();

LawFamily family_of(RegressionModelId id)
{
    switch (id) {
    case RegressionModelId::LinearGaussian:
    case RegressionModelId::LinearGaussianLoc: return LawFamily::Normal;
    case RegressionModelId::Exponential: return LawFamily::Exponential;
    case RegressionModelId::Gamma:
    case RegressionModelId::GammaLoc: return LawFamily::Gamma;
    case RegressionModelId::Beta:
    case RegressionModelId::BetaLoc: return LawFamily::Beta;
    case RegressionModelId::Logistic: return LawFamily::Bernoulli;
    case RegressionModelId::Poisson: return LawFamily::Poisson;
    }
    return LawFamily::Normal;
}

double capped_exp(double eta, bool& capped)
{
    if (eta > kExpLinkCap) {
        capped = true;
        return std::exp(kExpLinkCap);
    }
    return std::exp(eta);
}

} // namespace

std::string_view to_string(RegressionModelId id)
{
    for (const auto& e : kRegNames)
        if (e.id == id) return e.name;
    return "?";
}

RegressionModelId parse_regression_model_id(std::string_view name)
{
    for (const auto& e : kRegNames)
        if (e.name == name) return e.id;
    std::string valid;
    for (const auto& e : kRegNames) {
        if (!valid.empty()) valid += ", ";
        valid += e.name;
    }
    throw ConfigError("unknown regression model '" + std::string(name) + "'; valid models: " + valid);
}

std::span<const RegressionModelId> all_regression_model_ids() { return kRegIds; }

AuxKind aux_kind(RegressionModelId id)
{
    switch (family_of(id)) {
    case LawFamily::Normal: return AuxKind::NoiseStd;
    case LawFamily::Gamma:
    case LawFamily::Beta: return AuxKind::Precision;
    default: return AuxKind::None;
    }
}

SlotRole aux_role(RegressionModelId id)
{
    switch (id) {
    case RegressionModelId::LinearGaussian:
    case RegressionModelId::Gamma:
    case RegressionModelId::Beta: return SlotRole::Free;
    case RegressionModelId::LinearGaussianLoc:
    case RegressionModelId::GammaLoc:
    case RegressionModelId::BetaLoc: return SlotRole::Fixed;
    default: return SlotRole::Absent;
    }
}

std::string_view aux_label(RegressionModelId id)
{
    switch (aux_kind(id)) {
    case AuxKind::NoiseStd: return "Std. dev. of Gaussian noise";
    case AuxKind::Precision: return "Precision parameter";
    case AuxKind::None: return "";
    }
    return "";
}

RegressionModelSpec RegressionModelSpec::make(RegressionModelId id, std::optional<std::vector<double>> par1,
                                              std::optional<double> par2)
{
    RegressionModelSpec s;
    s.id = id;
    if (par1) {
        for (double v : *par1)
            if (!std::isfinite(v)) throw ConfigError("par1 (coefficients) must be finite");
        s.par1.status = ParamStatus::FreeUserInit;
        s.par1.value = std::move(*par1);
    }
    const std::string name(to_string(id));
    switch (aux_role(id)) {
    case SlotRole::Absent:
        if (par2) throw ConfigError("model " + name + " has no par2");
        s.par2.status = ParamStatus::Fixed;
        break;
    case SlotRole::Fixed:
        if (!par2)
            throw ConfigError("model " + name + " requires par2 (" +
                              std::string(aux_kind(id) == AuxKind::NoiseStd ? "standard deviation of the noise"
                                                                            : "precision") +
                              ") to be specified by the user");
        [[fallthrough]];
    default:
        if (par2) {
            if (!(*par2 > 0.0) || !std::isfinite(*par2)) throw ConfigError("par2 must be positive");
            s.par2.value = {*par2};
        }
        s.par2.status = aux_role(id) == SlotRole::Fixed ? ParamStatus::Fixed
                        : par2                          ? ParamStatus::FreeUserInit
                                                        : ParamStatus::FreeDefault;
        break;
    }
    return s;
}

ConditionalLaw conditional_law(RegressionModelId id, double eta, double aux)
{
    ConditionalLaw law;
    law.family = family_of(id);
    law.eta = eta;
    law.aux = aux;
    switch (law.family) {
    case LawFamily::Normal: law.mean = eta; break;
    case LawFamily::Exponential:
    case LawFamily::Gamma:
    case LawFamily::Poisson: law.mean = capped_exp(eta, law.capped); break;
    case LawFamily::Beta:
    case LawFamily::Bernoulli: law.mean = logistic(eta); break;
    }
    return law;
}

ConditionalLaw regression_distribution(const RegressionModelSpec& model, std::span<const double> x_row,
                                       std::span<const double> theta)
{
    const std::size_t extra = model.aux_is_free() ? 1 : 0;
    if (theta.size() != x_row.size() + extra)
        throw InputError("coefficient vector has " + std::to_string(theta.size() - std::min(theta.size(), extra)) +
                         " entries but the covariate row has " + std::to_string(x_row.size()));
    double eta = 0.0;
    for (std::size_t k = 0; k < x_row.size(); ++k) eta += x_row[k] * theta[k];
    double aux = 1.0;
    if (extra) {
        aux = std::exp(theta[x_row.size()]);
    } else if (!model.par2.value.empty()) {
        aux = model.par2.value[0];
    }
    return conditional_law(model.id, eta, aux);
}

double ConditionalLaw::sample(Rng& rng) const
{
    switch (family) {
    case LawFamily::Normal: return std::normal_distribution<double>(mean, aux)(rng);
    case LawFamily::Exponential: return std::exponential_distribution<double>(1.0 / mean)(rng);
    case LawFamily::Gamma: return std::gamma_distribution<double>(aux, mean / aux)(rng);
    case LawFamily::Beta: {
        const double a = std::gamma_distribution<double>(mean * aux, 1.0)(rng);
        const double b = std::gamma_distribution<double>((1.0 - mean) * aux, 1.0)(rng);
        return a / (a + b);
    }
    case LawFamily::Bernoulli: return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < mean ? 1.0 : 0.0;
    case LawFamily::Poisson:
        if (mean > 1e15) {
            const double v = std::normal_distribution<double>(mean, std::sqrt(mean))(rng);
            return std::max(0.0, std::round(v));
        }
        return static_cast<double>(std::poisson_distribution<long long>(mean)(rng));
    }
    return 0.0;
}

bool ConditionalLaw::in_support(double y) const
{
    switch (family) {
    case LawFamily::Normal: return std::isfinite(y);
    case LawFamily::Exponential: return y >= 0.0;
    case LawFamily::Gamma: return y > 0.0;
    case LawFamily::Beta: return y > 0.0 && y < 1.0;
    case LawFamily::Bernoulli: return y == 0.0 || y == 1.0;
    case LawFamily::Poisson: return y >= 0.0 && std::floor(y) == y;
    }
    return false;
}

double ConditionalLaw::log_pdf(double y) const
{
    if (!in_support(y)) return -std::numeric_limits<double>::infinity();
    switch (family) {
    case LawFamily::Normal: {
        const double z = (y - mean) / aux;
        return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(aux) - 0.5 * z * z;
    }
    case LawFamily::Exponential: return -std::log(mean) - y / mean;
    case LawFamily::Gamma:
        return aux * std::log(aux / mean) - std::lgamma(aux) + (aux - 1.0) * std::log(y) - aux * y / mean;
    case LawFamily::Beta: {
        const double a = mean * aux, b = (1.0 - mean) * aux;
        return std::lgamma(aux) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(y) +
               (b - 1.0) * std::log1p(-y);
    }
    case LawFamily::Bernoulli: return y == 1.0 ? std::log(mean) : std::log1p(-mean);
    case LawFamily::Poisson: return y * std::log(mean) - mean - std::lgamma(y + 1.0);
    }
    return 0.0;
}

double ConditionalLaw::score_eta(double y) const
{
    switch (family) {
    case LawFamily::Normal: return (y - mean) / (aux * aux);
    case LawFamily::Exponential: return capped ? 0.0 : y / mean - 1.0;
    case LawFamily::Gamma: return capped ? 0.0 : aux * (y / mean - 1.0);
    case LawFamily::Beta: {
        const double a = mean * aux, b = (1.0 - mean) * aux;
        const double da = std::log(y) - boost::math::digamma(a);
        const double db = std::log1p(-y) - boost::math::digamma(b);
        return mean * (1.0 - mean) * aux * (da - db);
    }
    case LawFamily::Bernoulli: return y - mean;
    case LawFamily::Poisson: return capped ? 0.0 : y - mean;
    }
    return 0.0;
}

double ConditionalLaw::score_log_aux(double y) const
{
    switch (family) {
    case LawFamily::Normal: {
        const double z = (y - mean) / aux;
        return z * z - 1.0;
    }
    case LawFamily::Gamma:
        return aux * (std::log(aux / mean) + 1.0 - boost::math::digamma(aux) + std::log(y) - y / mean);
    case LawFamily::Beta: {
        const double a = mean * aux, b = (1.0 - mean) * aux;
        const double da = std::log(y) - boost::math::digamma(a);
        const double db = std::log1p(-y) - boost::math::digamma(b);
        return aux * (boost::math::digamma(aux) + mean * da + (1.0 - mean) * db);
    }
    default: return 0.0;
    }
}

bool has_closed_form(LawFamily family, KernelFamily kernel)
{
    if (family == LawFamily::Bernoulli) return true;
    return family == LawFamily::Normal && has_normal_kernel_mean(kernel);
}

PairExpectation pair_expectation(const ConditionalLaw& a, const ConditionalLaw& b, const KernelSpec& spec)
{
    PairExpectation out;
    if (a.family == LawFamily::Normal && b.family == LawFamily::Normal) {
        // Y - Y' ~ N(eta_a - eta_b, 2 s^2) with a shared noise level
        const double s = std::numbers::sqrt2 * a.aux;
        const auto e = normal_kernel_mean(spec, a.mean - b.mean, s);
        if (!e) throw CapabilityError("no closed-form expectation for this kernel");
        out.value = e->value;
        out.d_eta_a = e->d_mu;
        out.d_eta_b = -e->d_mu;
        out.d_log_aux = s * e->d_s;
        return out;
    }
    if (a.family == LawFamily::Bernoulli && b.family == LawFamily::Bernoulli) {
        const double k0 = spec.at_zero();
        const double k1 = spec.of_distance(1.0);
        const double pa = a.mean, pb = b.mean;
        out.value = k0 * (pa * pb + (1.0 - pa) * (1.0 - pb)) + k1 * (pa * (1.0 - pb) + pb * (1.0 - pa));
        out.d_eta_a = (2.0 * pb - 1.0) * (k0 - k1) * pa * (1.0 - pa);
        out.d_eta_b = (2.0 * pa - 1.0) * (k0 - k1) * pb * (1.0 - pb);
        return out;
    }
    throw CapabilityError("no closed-form expectation for this conditional law");
}

PointExpectation point_expectation(const ConditionalLaw& a, double y, const KernelSpec& spec)
{
    PointExpectation out;
    if (a.family == LawFamily::Normal) {
        const auto e = normal_kernel_mean(spec, a.mean - y, a.aux);
        if (!e) throw CapabilityError("no closed-form expectation for this kernel");
        out.value = e->value;
        out.d_eta = e->d_mu;
        out.d_log_aux = a.aux * e->d_s;
        return out;
    }
    if (a.family == LawFamily::Bernoulli) {
        const double k1 = kernel_eval(spec, 1.0, y);
        const double k0 = kernel_eval(spec, 0.0, y);
        out.value = a.mean * k1 + (1.0 - a.mean) * k0;
        out.d_eta = (k1 - k0) * a.mean * (1.0 - a.mean);
        return out;
    }
    throw CapabilityError("no closed-form expectation for this conditional law");
}

void check_response(RegressionModelId id, std::span<const double> y)
{
    const ConditionalLaw probe = conditional_law(id, 0.0, 1.0);
    const char* domain = "";
    switch (probe.family) {
    case LawFamily::Normal: domain = "finite"; break;
    case LawFamily::Exponential: domain = "non-negative"; break;
    case LawFamily::Gamma: domain = "positive"; break;
    case LawFamily::Beta: domain = "in (0, 1)"; break;
    case LawFamily::Bernoulli: domain = "0 or 1"; break;
    case LawFamily::Poisson: domain = "a non-negative integer"; break;
    }
    for (std::size_t i = 0; i < y.size(); ++i)
        if (!probe.in_support(y[i]))
            throw InputError("response " + std::to_string(i + 1) + " (" + std::to_string(y[i]) + ") must be " +
                             domain + " for model " + std::string(to_string(id)));
}

} // namespace mmdfit
