#include "mmdfit/models.hpp"

#include "mmdfit/error.hpp"
#include "mmdfit/normal_expectation.hpp"

#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace mmdfit {

namespace {

struct IdName {
    ModelId id;
    std::string_view name;
};

constexpr std::array kModelNames{
    IdName{ModelId::Gaussian, "Gaussian"},
    IdName{ModelId::GaussianLoc, "Gaussian.loc"},
    IdName{ModelId::GaussianScale, "Gaussian.scale"},
    IdName{ModelId::Cauchy, "Cauchy"},
    IdName{ModelId::Pareto, "Pareto"},
    IdName{ModelId::Exponential, "exponential"},
    IdName{ModelId::Gamma, "gamma"},
    IdName{ModelId::GammaShape, "gamma.shape"},
    IdName{ModelId::GammaRate, "gamma.rate"},
    IdName{ModelId::UniformLoc, "continuous.uniform.loc"},
    IdName{ModelId::UniformUpper, "continuous.uniform.upper"},
    IdName{ModelId::UniformLowerUpper, "continuous.uniform.lower.upper"},
    IdName{ModelId::Dirac, "Dirac"},
    IdName{ModelId::DiscreteUniform, "discrete.uniform"},
    IdName{ModelId::Binomial, "binomial"},
    IdName{ModelId::BinomialSize, "binomial.size"},
    IdName{ModelId::BinomialProb, "binomial.prob"},
    IdName{ModelId::Geometric, "geometric"},
    IdName{ModelId::Poisson, "Poisson"},
    IdName{ModelId::MultiGaussian, "multidim.Gaussian"},
    IdName{ModelId::MultiGaussianLoc, "multidim.Gaussian.loc"},
    IdName{ModelId::MultiGaussianScale, "multidim.Gaussian.scale"},
    IdName{ModelId::MultiDirac, "multidim.Dirac"},
};

constexpr auto kAllIds = [] {
    std::array<ModelId, kModelNames.size()> ids{};
    for (std::size_t i = 0; i < kModelNames.size(); ++i) ids[i] = kModelNames[i].id;
    return ids;
}();

constexpr double kCauchyDefaultScale = 1.0;

double only(const std::vector<double>& v, std::string_view what)
{
    if (v.size() != 1) throw ConfigError(std::string(what) + " must be a scalar");
    return v[0];
}

void require_positive(double v, std::string_view what)
{
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
}

void require_probability(double v, std::string_view what)
{
    if (!(v > 0.0 && v < 1.0)) throw ConfigError(std::string(what) + " must lie in (0, 1)");
}

void require_count(double v, std::string_view what)
{
    if (!(v >= 1.0) || std::floor(v) != v || !std::isfinite(v))
        throw ConfigError(std::string(what) + " must be a positive integer");
}

std::vector<double> column(const Sample& data, std::size_t k)
{
    std::vector<double> v(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) v[i] = data[i][k];
    return v;
}

double positive_or(double v, double fallback) { return v > 0.0 && std::isfinite(v) ? v : fallback; }

double mean_of(const std::vector<double>& v)
{
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Closed-form expectations for a law with finite support {points[j]} and weights w[j].
// dw (optional) holds d w[j] / d t for a single scalar coordinate t.
struct FiniteLaw {
    std::vector<double> points;
    std::vector<double> w;
    std::vector<double> dw;
};

ClosedForm finite_closed_form(const FiniteLaw& law, const KernelSpec& spec, const Sample& data,
                              bool with_grad)
{
    const std::size_t s = law.points.size();
    ClosedForm cf;
    double ekk = 0.0;
    double dekk = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
        double inner = 0.0;
        for (std::size_t l = 0; l < s; ++l)
            inner += law.w[l] * spec.of_distance(std::abs(law.points[j] - law.points[l]));
        ekk += law.w[j] * inner;
        if (with_grad) dekk += 2.0 * law.dw[j] * inner;
    }
    cf.e_kk = ekk;
    cf.e_kx.resize(data.size());
    double dmean = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        double e = 0.0;
        double de = 0.0;
        for (std::size_t j = 0; j < s; ++j) {
            const double k = spec.of_distance(std::abs(law.points[j] - data[i][0]));
            e += law.w[j] * k;
            if (with_grad) de += law.dw[j] * k;
        }
        cf.e_kx[i] = e;
        dmean += de;
    }
    if (with_grad) {
        cf.grad_e_kk = {dekk};
        cf.grad_mean_e_kx = {dmean / static_cast<double>(data.size())};
    }
    return cf;
}

// ---------------------------------------------------------------- Gaussian

class GaussianModel final : public Model {
public:
    GaussianModel(ModelSpec spec, std::size_t dim) : Model(std::move(spec), dim)
    {
        free_mean_ = spec_.par1.is_free();
        free_sd_ = spec_.par2.is_free();
        if (!free_mean_) mean_ = only(spec_.par1.value, "par1 (mean)");
        if (!free_sd_) sd_ = only(spec_.par2.value, "par2 (standard deviation)");
    }

    std::size_t num_coords() const override { return (free_mean_ ? 1 : 0) + (free_sd_ ? 1 : 0); }

    Params natural(std::span<const double> theta) const override
    {
        auto [m, s] = unpack(theta);
        return {{m}, {s}};
    }

    std::vector<double> coords(const Params& p) const override
    {
        std::vector<double> t;
        if (free_mean_) t.push_back(only(p.par1, "par1"));
        if (free_sd_) t.push_back(std::log(only(p.par2, "par2")));
        return t;
    }

    void validate(const Params& p) const override
    {
        if (!std::isfinite(only(p.par1, "par1 (mean)"))) throw ConfigError("par1 (mean) must be finite");
        require_positive(only(p.par2, "par2 (standard deviation)"), "par2 (standard deviation)");
    }

    Params default_init(const Sample& data) const override
    {
        const auto x = column(data, 0);
        return {{median(x)}, {positive_or(mad_scale(x), 1.0)}};
    }

    void sample(std::span<const double> theta, std::size_t m, Rng& rng, std::vector<double>& out) const override
    {
        auto [mu, s] = unpack(theta);
        std::normal_distribution<double> d(mu, s);
        for (std::size_t t = 0; t < m; ++t) out.push_back(d(rng));
    }

    bool has_score() const override { return true; }

    void score(std::span<const double> theta, std::span<const double> x, std::span<double> out) const override
    {
        auto [mu, s] = unpack(theta);
        const double z = (x[0] - mu) / s;
        std::size_t k = 0;
        if (free_mean_) out[k++] = z / s;
        if (free_sd_) out[k++] = z * z - 1.0;
    }

    double log_pdf(std::span<const double> theta, std::span<const double> x) const override
    {
        auto [mu, s] = unpack(theta);
        const double z = (x[0] - mu) / s;
        return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(s) - 0.5 * z * z;
    }

    bool has_closed_form(const KernelSpec& spec) const override { return has_normal_kernel_mean(spec.family()); }

    std::optional<ClosedForm> closed_form(std::span<const double> theta, const KernelSpec& spec,
                                          const Sample& data, bool with_grad) const override
    {
        if (!has_closed_form(spec)) return std::nullopt;
        auto [mu, s] = unpack(theta);
        ClosedForm cf;
        const auto kk = *normal_kernel_mean(spec, 0.0, std::numbers::sqrt2 * s);
        cf.e_kk = kk.value;
        cf.e_kx.resize(data.size());
        double dmu = 0.0;
        double ds = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto e = *normal_kernel_mean(spec, mu - data[i][0], s);
            cf.e_kx[i] = e.value;
            dmu += e.d_mu;
            ds += e.d_s;
        }
        if (with_grad) {
            const double inv_n = 1.0 / static_cast<double>(data.size());
            if (free_mean_) {
                cf.grad_e_kk.push_back(0.0);
                cf.grad_mean_e_kx.push_back(dmu * inv_n);
            }
            if (free_sd_) {
                cf.grad_e_kk.push_back(s * std::numbers::sqrt2 * kk.d_s);
                cf.grad_mean_e_kx.push_back(s * ds * inv_n);
            }
        }
        return cf;
    }

private:
    std::pair<double, double> unpack(std::span<const double> theta) const
    {
        std::size_t k = 0;
        const double m = free_mean_ ? theta[k++] : mean_;
        const double s = free_sd_ ? std::exp(theta[k++]) : sd_;
        return {m, s};
    }

    bool free_mean_ = true;
    bool free_sd_ = true;
    double mean_ = 0.0;
    double sd_ = 1.0;
};

// ---------------------------------------------------------------- Cauchy

class CauchyModel final : public Model {
public:
    CauchyModel(ModelSpec spec, std::size_t dim) : Model(std::move(spec), dim)
    {
        scale_ = spec_.par2.value.empty() ? kCauchyDefaultScale : only(spec_.par2.value, "par2 (scale)");
    }

    std::size_t num_coords() const override { return 1; }
    Params natural(std::span<const double> theta) const override { return {{theta[0]}, {scale_}}; }
    std::vector<double> coords(const Params& p) const override { return {only(p.par1, "par1")}; }

    void validate(const Params& p) const override
    {
        if (!std::isfinite(only(p.par1, "par1 (location)"))) throw ConfigError("par1 (location) must be finite");
        require_positive(only(p.par2, "par2 (scale)"), "par2 (scale)");
    }

    Params default_init(const Sample& data) const override { return {{median(column(data, 0))}, {scale_}}; }

    void sample(std::span<const double> theta, std::size_t m, Rng& rng, std::vector<double>& out) const override
    {
        std::cauchy_distribution<double> d(theta[0], scale_);
        for (std::size_t t = 0; t < m; ++t) out.push_back(d(rng));
    }

    bool has_score() const override { return true; }

    void score(std::span<const double> theta, std::span<const double> x, std::span<double> out) const override
    {
        const double r = x[0] - theta[0];
        out[0] = 2.0 * r / (scale_ * scale_ + r * r);
    }

    double log_pdf(std::span<const double> theta, std::span<const double> x) const override
    {
        const double z = (x[0] - theta[0]) / scale_;
        return -std::log(std::numbers::pi * scale_) - std::log1p(z * z);
    }

private:
    double scale_;
};

// ---------------------------------------------------------------- Pareto (unit scale)

class ParetoModel final : public Model {
public:
    ParetoModel(ModelSpec spec, std::size_t dim) : Model(std::move(spec), dim) {}

    std::size_t num_coords() const override { return 1; }
    Params natural(std::span<const double> theta) const override { return {{std::exp(theta[0])}, {}}; }
    std::vector<double> coords(const Params& p) const override { return {std::log(only(p.par1, "par1"))}; }
    void validate(const Params& p) const override { require_positive(only(p.par1, "par1 (exponent)"), "par1 (exponent)"); }

    Params default_init(const Sample& data) const override
    {
        // median of the unit-scale Pareto is 2^(1/theta)
        const double med = median(column(data, 0));
        return {{med > 1.0 ? std::numbers::ln2 / std::log(med) : 1.0}, {}};
    }

    void sample(std::span<const double> theta, std::size_t m, Rng& rng, std::vector<double>& out) const override
    {
        const double a = std::exp(theta[0]);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t t = 0; t < m; ++t) out.push_back(std::pow(1.0 - u(rng), -1.0 / a));
    }

    bool has_score() const override { return true; }

    void score(std::span<const double> theta, std::span<const double> x, std::span<double> out) const override
    {
        out[0] = 1.0 - std::exp(theta[0]) * std::log(x[0]);
    }

    double log_pdf(std::span<const double> theta, std::span<const double> x) const override
    {
        if (x[0] < 1.0) return -std::numeric_limits<double>::infinity();
        const double a = std::exp(theta[0]);
        return std::log(a) - (a + 1.0) * std::log(x[0]);
    }
};

// ---------------------------------------------------------------- exponential

class ExponentialModel final : public Model {
public:
    ExponentialModel(ModelSpec spec, std::size_t dim) : Model(std::move(spec), dim) {}

    std::size_t num_coords() const override { return 1; }
    Params natural(std::span<const double> theta) const override { return {{std::exp(theta[0])}, {}}; }
    std::vector<double> coords(const Params& p) const override { return {std::log(only(p.par1, "par1"))}; }
    void validate(const Params& p) const override { require_positive(only(p.par1, "par1 (rate)"), "par1 (rate)"); }

    Params default_init(const Sample& data) const override
    {
        return {{1.0 / positive_or(median(column(data, 0)), 1.0)}, {}};
    }

    void sample(std::span<const double> theta, std::size_t m, Rng& rng, std::vector<double>& out) const override
    {
        std::exponential_distribution<double> d(std::exp(theta[0]));
        for (std::size_t t = 0; t < m; ++t) out.push_back(d(rng));
    }

    bool has_score() const override { return true; }

    void score(std::span<const double> theta, std::span<const double> x, std::span<double> out) const override
    {
        out[0] = 1.0 - std::exp(theta[0]) * x[0];
    }

    double log_pdf(std::span<const double> theta, std::span<const double> x) const override
    {
        if (x[0] < 0.0) return -std::numeric_limits<double>::infinity();
        return theta[0] - std::exp(theta[0]) * x[0];
    }
};

// ---------------------------------------------------------------- gamma (shape a, rate b)

class GammaModel final : public Model {
public:
    GammaModel(ModelSpec spec, std::size_t dim) : Model(std::move(spec), dim)
    {
        free_shape_ = spec_.par1.is_free();
        free_rate_ = spec_.par2.is_free();
        if (!free_shape_) shape_ = only(spec_.par1.value, "par1 (shape)");
        if (!free_rate_) rate_ = only(spec_.par2.value, "par2 (rate)");
    }

    std::size_t num_coords() const override { return (free_shape_ ? 1 : 0) + (free_rate_ ? 1 : 0); }

    Params natural(std::span<const double> theta) const override
    {
        auto [a, b] = unpack(theta);
        return {{a}, {b}};
    }

    std::vector<double> coords(const Params& p) const override
    {
        std::vector<double> t;
        if (free_shape_) t.push_back(std::log(only(p.par1, "par1")));
        if (free_rate_) t.push_back(std::log(only(p.par2, "par2")));
        return t;
    }

    void validate(const Params& p) const override
    {
        require_positive(only(p.par1, "par1 (shape)"), "par1 (shape)");
        require_positive(only(p.par2, "par2 (rate)"), "par2 (rate)");
    }

    Params default_init(const Sample& data) const override
    {
        const auto x = column(data, 0);
        const double med = positive_or(median(x), positive_or(mean_of(x), 1.0));
        const double spread = positive_or(mad_scale(x), med);
        const double a = free_shape_ ? std::clamp((med / spread) * (med / spread), 0.05, 1e4) : shape_;
        const double b = free_rate_ ? a / med : rate_;
        return {{a}, {b}};
    }

    void sample(std::span<const double> theta, std::size_t m, Rng& rng, std::vector<double>& out) const override
    {
        auto [a, b] = unpack(theta);
        std::gamma_distribution<double> d(a, 1.0 / b);
        for (std::size_t t = 0; t < m; ++t) out.push_back(d(rng));
    }

    bool has_score() const override { return true; }

    void score(std::span<const double> theta, std::span<const double> x, std::span<double> out) const override
    {
        auto [a, b] = unpack(theta);
        std::size_t k = 0;
        if (free_shape_) out[k++] = a * (std::log(b) - boost::math::digamma(a) + std::log(x[0]));
        if (free_rate_) out[k++] = a - b * x[0];
    }

    double log_pdf(std::span<const double> theta, std::span<const double> x) const override
    {
        auto [a, b] = unpack(theta);
        if (x[0] <= 0.0) return -std::numeric_limits<double>::infinity();
        return a * std::log(b) - std::lgamma(a) + (a - 1.0) * std::log(x[0]) - b * x[0];
    }

private:
    std::pair<double, double> unpack(std::span<const double> theta) const
    {
        std::size_t k = 0;
        const double a = free_shape_ ? std::exp(theta[k++]) : shape_;
        const double b = free_rate_ ? std::exp(theta[k++]) : rate_;
        return {a, b};
    }

    bool free_shape_ = true;
    bool free_rate_ = true;
    double shape_ = 1.0;
    double rate_ = 1.0;
};

// ---------------------------------------------------------------- continuous uniform

class UniformModel final : public Model {
public:
    UniformModel(ModelSpec spec, std::size_t dim) : Model(std::move(spec), dim)
    {
        if (id() == ModelId::UniformLoc) length_ = only(spec_.par2.value, "par2 (length)");
        if (id() == ModelId::UniformUpper) lower_ = only(spec_.par1.value, "par1 (lower bound)");
    }

    std::size_t num_coords() const override { return id() == ModelId::UniformLowerUpper ? 2 : 1; }

    Params natural(std::span<const double> theta) const override
    {
        switch (id()) {
        case ModelId::UniformLoc: return {{theta[0]}, {length_}};
        case ModelId::UniformUpper: return {{lower_}, {lower_ + std::exp(theta[0])}};
        default: return {{theta[0]}, {theta[0] + std::exp(theta[1])}};
        }
    }

    std::vector<double> coords(const Params& p) const override
    {
        const double p1 = only(p.par1, "par1");
        const double p2 = only(p.par2, "par2");
        switch (id()) {
        case ModelId::UniformLoc: return {p1};
        case ModelId::UniformUpper: return {std::log(p2 - p1)};
        default: return {p1, std::log(p2 - p1)};
        }
    }

    void validate(const Params& p) const override
    {
        const double p1 = only(p.par1, "par1");
        const double p2 = only(p.par2, "par2");
        if (!std::isfinite(p1) || !std::isfinite(p2)) throw ConfigError("uniform parameters must be finite");
        if (id() == ModelId::UniformLoc) {
            require_positive(p2, "par2 (length)");
        } else if (!(p2 > p1)) {
            throw ConfigError("par2 (upper bound) must exceed par1 (lower bound)");
        }
    }

    Params default_init(const Sample& data) const override
    {
        const auto x = column(data, 0);
        const double lo = *std::min_element(x.begin(), x.end());
        const double hi = *std::max_element(x.begin(), x.end());
        switch (id()) {
        case ModelId::UniformLoc: return {{median(x)}, {length_}};
        case ModelId::UniformUpper: return {{lower_}, {std::max(hi, lower_ + 1.0)}};
        default: return {{lo}, {hi > lo ? hi : lo + 1.0}};
        }
    }

    void sample(std::span<const double> theta, std::size_t m, Rng& rng, std::vector<double>& out) const override
    {
        const Params p = natural(theta);
        const auto [a, b] = bounds(p);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t t = 0; t < m; ++t) out.push_back(a + (b - a) * u(rng));
    }

    bool has_pathwise() const override { return true; }

    void sample_pathwise(std::span<const double> theta, std::size_t m, Rng& rng, std::vector<double>& x,
                         std::vector<double>& jacobian) const override
    {
        std::uniform_real_distribution<double> ud(0.0, 1.0);
        for (std::size_t t = 0; t < m; ++t) {
            const double u = ud(rng);
            switch (id()) {
            case ModelId::UniformLoc:
                x.push_back(theta[0] + length_ * (u - 0.5));
                jacobian.push_back(1.0);
                break;
            case ModelId::UniformUpper: {
                const double w = std::exp(theta[0]);
                x.push_back(lower_ + w * u);
                jacobian.push_back(w * u);
                break;
            }
            default: {
                const double w = std::exp(theta[1]);
                x.push_back(theta[0] + w * u);
                jacobian.push_back(1.0);
                jacobian.push_back(w * u);
                break;
            }
            }
        }
    }

    double log_pdf(std::span<const double> theta, std::span<const double> x) const override
    {
        const auto [a, b] = bounds(natural(theta));
        if (x[0] < a || x[0] > b) return -std::numeric_limits<double>::infinity();
        return -std::log(b - a);
    }

private:
    std::pair<double, double> bounds(const Params& p) const
    {
        if (id() == ModelId::UniformLoc) return {p.par1[0] - 0.5 * p.par2[0], p.par1[0] + 0.5 * p.par2[0]};
        return {p.par1[0], p.par2[0]};
    }

    double length_ = 1.0;
    double lower_ = 0.0;
};

// ---------------------------------------------------------------- Dirac (any dimension)

class DiracModel final : public Model {
public:
    DiracModel(ModelSpec spec, std::size_t dim) : Model(std::move(spec), dim) {}

    std::size_t num_coords() const override { return dim_; }
    Params natural(std::span<const double> theta) const override { return {{theta.begin(), theta.end()}, {}}; }
    std::vector<double> coords(const Params& p) const override { return p.par1; }

    void validate(const Params& p) const override
    {
        if (p.par1.size() != dim_)
            throw ConfigError("par1 (location) must have " + std::to_string(dim_) + " entries");
        for (double v : p.par1)
            if (!std::isfinite(v)) throw ConfigError("par1 (location) must be finite");
    }

    Params default_init(const Sample& data) const override
    {
        std::vector<double> a(dim_);
        for (std::size_t k = 0; k < dim_; ++k) a[k] = median(column(data, k));
        return {a, {}};
    }

    void sample(std::span<const double> theta, std::size_t m, Rng&, std::vector<double>& out) const override
    {
        for (std::size_t t = 0; t < m; ++t) out.insert(out.end(), theta.begin(), theta.end());
    }

    bool has_closed_form(const KernelSpec&) const override { return true; }

    std::optional<ClosedForm> closed_form(std::span<const double> theta, const KernelSpec& spec,
                                          const Sample& data, bool with_grad) const override
    {
        ClosedForm cf;
        cf.e_kk = spec.at_zero();
        cf.e_kx.resize(data.size());
        std::vector<double> g(dim_, 0.0);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto x = data[i];
            const double r = euclidean_distance(theta, x);
            cf.e_kx[i] = spec.of_distance(r);
            if (with_grad && r > 0.0) {
                const double scale = spec.distance_derivative(r) / r;
                for (std::size_t k = 0; k < dim_; ++k) g[k] += scale * (theta[k] - x[k]);
            }
        }
        if (with_grad) {
            cf.grad_e_kk.assign(dim_, 0.0);
            for (double& v : g) v /= static_cast<double>(data.size());
            cf.grad_mean_e_kx = std::move(g);
        }
        return cf;
    }
};

// ---------------------------------------------------------------- discrete uniform on {1..N}

class DiscreteUniformModel final : public Model {
public:
    DiscreteUniformModel(ModelSpec spec, std::size_t dim) : Model(std::move(spec), dim) {}

    std::size_t num_coords() const override { return 1; }
    Params natural(std::span<const double> theta) const override { return {{theta[0]}, {}}; }
    std::vector<double> coords(const Params& p) const override { return {only(p.par1, "par1")}; }
    void validate(const Params& p) const override { require_count(only(p.par1, "par1 (N)"), "par1 (N)"); }
    std::vector<std::size_t> integer_coords() const override { return {0}; }

    Params default_init(const Sample& data) const override
    {
        const auto x = column(data, 0);
        return {{std::max(1.0, std::ceil(*std::max_element(x.begin(), x.end())))}, {}};
    }

    void sample(std::span<const double> theta, std::size_t m, Rng& rng, std::vector<double>& out) const override
    {
        std::uniform_int_distribution<long long> d(1, static_cast<long long>(theta[0]));
        for (std::size_t t = 0; t < m; ++t) out.push_back(static_cast<double>(d(rng)));
    }

    double log_pdf(std::span<const double> theta, std::span<const double> x) const override
    {
        const double n = theta[0];
        if (x[0] < 1.0 || x[0] > n || std::floor(x[0]) != x[0]) return -std::numeric_limits<double>::infinity();
        return -std::log(n);
    }

    bool has_closed_form(const KernelSpec&) const override { return true; }

    std::optional<ClosedForm> closed_form(std::span<const double> theta, const KernelSpec& spec,
                                          const Sample& data, bool) const override
    {
        const auto n = static_cast<long long>(theta[0]);
        const double nd = static_cast<double>(n);
        ClosedForm cf;
        // equally spaced support: sum over lags d with multiplicity N - d
        double s = nd * spec.at_zero();
        for (long long d = 1; d < n; ++d) s += 2.0 * static_cast<double>(n - d) * spec.of_distance(static_cast<double>(d));
        cf.e_kk = s / (nd * nd);
        cf.e_kx.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            double e = 0.0;
            for (long long j = 1; j <= n; ++j) e += spec.of_distance(std::abs(static_cast<double>(j) - data[i][0]));
            cf.e_kx[i] = e / nd;
        }
        return cf;
    }
};

// ---------------------------------------------------------------- binomial (N, p)

class BinomialModel final : public Model {
public:
    BinomialModel(ModelSpec spec, std::size_t dim) : Model(std::move(spec), dim)
    {
        free_size_ = spec_.par1.is_free();
        free_prob_ = spec_.par2.is_free();
        if (!free_size_) size_ = only(spec_.par1.value, "par1 (N)");
        if (!free_prob_) prob_ = only(spec_.par2.value, "par2 (p)");
    }

    std::size_t num_coords() const override { return (free_size_ ? 1 : 0) + (free_prob_ ? 1 : 0); }

    Params natural(std::span<const double> theta) const override
    {
        auto [n, p] = unpack(theta);
        return {{n}, {p}};
    }

    std::vector<double> coords(const Params& p) const override
    {
        std::vector<double> t;
        if (free_size_) t.push_back(only(p.par1, "par1"));
        if (free_prob_) t.push_back(logit(only(p.par2, "par2")));
        return t;
    }

    void validate(const Params& p) const override
    {
        require_count(only(p.par1, "par1 (N)"), "par1 (N)");
        require_probability(only(p.par2, "par2 (p)"), "par2 (p)");
    }

    std::vector<std::size_t> integer_coords() const override
    {
        if (free_size_) return {0};
        return {};
    }

    Params default_init(const Sample& data) const override
    {
        const auto x = column(data, 0);
        const double n = free_size_ ? std::max(1.0, std::ceil(*std::max_element(x.begin(), x.end()))) : size_;
        const double p = free_prob_ ? std::clamp(mean_of(x) / n, 0.01, 0.99) : prob_;
        return {{n}, {p}};
    }

    void sample(std::span<const double> theta, std::size_t m, Rng& rng, std::vector<double>& out) const override
    {
        auto [n, p] = unpack(theta);
        std::binomial_distribution<long long> d(static_cast<long long>(n), p);
        for (std::size_t t = 0; t < m; ++t) out.push_back(static_cast<double>(d(rng)));
    }

    // Only the probability is differentiable; with N free the score is not defined.
    bool has_score() const override { return !free_size_; }

    void score(std::span<const double> theta, std::span<const double> x, std::span<double> out) const override
    {
        if (free_size_) Model::score(theta, x, out);
        auto [n, p] = unpack(theta);
        out[0] = x[0] - n * p;
    }

    double log_pdf(std::span<const double> theta, std::span<const double> x) const override
    {
        auto [n, p] = unpack(theta);
        const double j = x[0];
        if (j < 0.0 || j > n || std::floor(j) != j) return -std::numeric_limits<double>::infinity();
        return std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) + j * std::log(p) +
               (n - j) * std::log1p(-p);
    }

    bool has_closed_form(const KernelSpec&) const override { return true; }

    std::optional<ClosedForm> closed_form(std::span<const double> theta, const KernelSpec& spec,
                                          const Sample& data, bool with_grad) const override
    {
        auto [n, p] = unpack(theta);
        FiniteLaw law;
        const auto count = static_cast<std::size_t>(n);
        for (std::size_t j = 0; j <= count; ++j) {
            const double jd = static_cast<double>(j);
            const double w = std::exp(std::lgamma(n + 1.0) - std::lgamma(jd + 1.0) - std::lgamma(n - jd + 1.0) +
                                      jd * std::log(p) + (n - jd) * std::log1p(-p));
            law.points.push_back(jd);
            law.w.push_back(w);
            law.dw.push_back(w * (jd - n * p));
        }
        ClosedForm cf = finite_closed_form(law, spec, data, with_grad && free_prob_);
        if (with_grad) {
            if (!free_prob_) {
                cf.grad_e_kk.assign(num_coords(), 0.0);
                cf.grad_mean_e_kx.assign(num_coords(), 0.0);
            } else if (free_size_) {
                cf.grad_e_kk.insert(cf.grad_e_kk.begin(), 0.0);
                cf.grad_mean_e_kx.insert(cf.grad_mean_e_kx.begin(), 0.0);
            }
        }
        return cf;
    }

private:
    std::pair<double, double> unpack(std::span<const double> theta) const
    {
        std::size_t k = 0;
        const double n = free_size_ ? theta[k++] : size_;
        const double p = free_prob_ ? logistic(theta[k++]) : prob_;
        return {n, p};
    }

    bool free_size_ = true;
    bool free_prob_ = true;
    double size_ = 1.0;
    double prob_ = 0.5;
};

// ---------------------------------------------------------------- geometric (failures before success)

class GeometricModel final : public Model {
public:
    GeometricModel(ModelSpec spec, std::size_t dim) : Model(std::move(spec), dim) {}

    std::size_t num_coords() const override { return 1; }
    Params natural(std::span<const double> theta) const override { return {{logistic(theta[0])}, {}}; }
    std::vector<double> coords(const Params& p) const override { return {logit(only(p.par1, "par1"))}; }
    void validate(const Params& p) const override { require_probability(only(p.par1, "par1 (p)"), "par1 (p)"); }

    Params default_init(const Sample& data) const override
    {
        return {{std::clamp(1.0 / (1.0 + mean_of(column(data, 0))), 0.01, 0.99)}, {}};
    }

    void sample(std::span<const double> theta, std::size_t m, Rng& rng, std::vector<double>& out) const override
    {
        std::geometric_distribution<long long> d(logistic(theta[0]));
        for (std::size_t t = 0; t < m; ++t) out.push_back(static_cast<double>(d(rng)));
    }

    bool has_score() const override { return true; }

    void score(std::span<const double> theta, std::span<const double> x, std::span<double> out) const override
    {
        const double p = logistic(theta[0]);
        out[0] = (1.0 - p) - x[0] * p;
    }

    double log_pdf(std::span<const double> theta, std::span<const double> x) const override
    {
        const double p = logistic(theta[0]);
        if (x[0] < 0.0 || std::floor(x[0]) != x[0]) return -std::numeric_limits<double>::infinity();
        return std::log(p) + x[0] * std::log1p(-p);
    }
};

// ---------------------------------------------------------------- Poisson

class PoissonModel final : public Model {
public:
    PoissonModel(ModelSpec spec, std::size_t dim) : Model(std::move(spec), dim) {}

    std::size_t num_coords() const override { return 1; }
    Params natural(std::span<const double> theta) const override { return {{std::exp(theta[0])}, {}}; }
    std::vector<double> coords(const Params& p) const override { return {std::log(only(p.par1, "par1"))}; }
    void validate(const Params& p) const override { require_positive(only(p.par1, "par1 (rate)"), "par1 (rate)"); }

    Params default_init(const Sample& data) const override
    {
        const auto x = column(data, 0);
        return {{positive_or(median(x), std::max(mean_of(x), 0.1))}, {}};
    }

    void sample(std::span<const double> theta, std::size_t m, Rng& rng, std::vector<double>& out) const override
    {
        std::poisson_distribution<long long> d(std::exp(theta[0]));
        for (std::size_t t = 0; t < m; ++t) out.push_back(static_cast<double>(d(rng)));
    }

    bool has_score() const override { return true; }

    void score(std::span<const double> theta, std::span<const double> x, std::span<double> out) const override
    {
        out[0] = x[0] - std::exp(theta[0]);
    }

    double log_pdf(std::span<const double> theta, std::span<const double> x) const override
    {
        if (x[0] < 0.0 || std::floor(x[0]) != x[0]) return -std::numeric_limits<double>::infinity();
        return x[0] * theta[0] - std::exp(theta[0]) - std::lgamma(x[0] + 1.0);
    }
};

// ---------------------------------------------------------------- multivariate Gaussian N(mu, U U^T)

class MultiGaussianModel final : public Model {
public:
    MultiGaussianModel(ModelSpec spec, std::size_t dim) : Model(std::move(spec), dim)
    {
        free_mean_ = spec_.par1.is_free();
        free_factor_ = spec_.par2.is_free();
        isotropic_ = id() == ModelId::MultiGaussianLoc;
        if (!free_mean_) {
            if (spec_.par1.value.size() != dim_)
                throw ConfigError("par1 (mean) must have " + std::to_string(dim_) + " entries");
            mean_ = Eigen::Map<const Eigen::VectorXd>(spec_.par1.value.data(), static_cast<Eigen::Index>(dim_));
        }
        if (isotropic_) {
            sigma_ = only(spec_.par2.value, "par2 (standard deviation)");
            require_positive(sigma_, "par2 (standard deviation)");
        }
    }

    std::size_t num_coords() const override
    {
        return (free_mean_ ? dim_ : 0) + (free_factor_ ? dim_ * (dim_ + 1) / 2 : 0);
    }

    Params natural(std::span<const double> theta) const override
    {
        const auto [mu, u] = unpack(theta);
        Params p;
        p.par1.assign(mu.data(), mu.data() + mu.size());
        if (isotropic_) {
            p.par2 = {sigma_};
        } else {
            p.par2.resize(dim_ * dim_);
            for (std::size_t i = 0; i < dim_; ++i)
                for (std::size_t j = 0; j < dim_; ++j) p.par2[i * dim_ + j] = u(Eigen::Index(i), Eigen::Index(j));
        }
        return p;
    }

    std::vector<double> coords(const Params& p) const override
    {
        std::vector<double> t;
        if (free_mean_) t.insert(t.end(), p.par1.begin(), p.par1.end());
        if (free_factor_) {
            for (std::size_t i = 0; i < dim_; ++i)
                for (std::size_t j = 0; j <= i; ++j) {
                    const double v = p.par2[i * dim_ + j];
                    t.push_back(i == j ? std::log(v) : v);
                }
        }
        return t;
    }

    void validate(const Params& p) const override
    {
        if (p.par1.size() != dim_) throw ConfigError("par1 (mean) must have " + std::to_string(dim_) + " entries");
        if (isotropic_) {
            require_positive(only(p.par2, "par2 (standard deviation)"), "par2 (standard deviation)");
            return;
        }
        if (p.par2.size() != dim_ * dim_)
            throw ConfigError("par2 (U) must be a " + std::to_string(dim_) + "x" + std::to_string(dim_) +
                              " lower-triangular matrix given row-major");
        for (std::size_t i = 0; i < dim_; ++i) {
            require_positive(p.par2[i * dim_ + i], "diagonal of par2 (U)");
            for (std::size_t j = i + 1; j < dim_; ++j)
                if (p.par2[i * dim_ + j] != 0.0) throw ConfigError("par2 (U) must be lower-triangular");
        }
    }

    Params default_init(const Sample& data) const override
    {
        Params p;
        for (std::size_t k = 0; k < dim_; ++k) p.par1.push_back(median(column(data, k)));
        if (isotropic_) {
            p.par2 = {sigma_};
        } else {
            p.par2.assign(dim_ * dim_, 0.0);
            for (std::size_t k = 0; k < dim_; ++k) p.par2[k * dim_ + k] = positive_or(mad_scale(column(data, k)), 1.0);
        }
        return p;
    }

    void sample(std::span<const double> theta, std::size_t m, Rng& rng, std::vector<double>& out) const override
    {
        const auto [mu, u] = unpack(theta);
        std::normal_distribution<double> nd(0.0, 1.0);
        Eigen::VectorXd z(static_cast<Eigen::Index>(dim_));
        for (std::size_t t = 0; t < m; ++t) {
            for (auto& v : z) v = nd(rng);
            const Eigen::VectorXd x = mu + u * z;
            out.insert(out.end(), x.data(), x.data() + x.size());
        }
    }

    bool has_score() const override { return true; }

    void score(std::span<const double> theta, std::span<const double> x, std::span<double> out) const override
    {
        const auto [mu, u] = unpack(theta);
        const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(dim_)) - mu;
        const Eigen::VectorXd z = u.triangularView<Eigen::Lower>().solve(r);
        std::size_t k = 0;
        if (free_mean_) {
            const Eigen::VectorXd g = u.transpose().triangularView<Eigen::Upper>().solve(z);
            for (Eigen::Index i = 0; i < g.size(); ++i) out[k++] = g(i);
        }
        if (free_factor_) {
            // d/dU log p = U^{-T} (z z^T - I)
            const auto d = static_cast<Eigen::Index>(dim_);
            const Eigen::MatrixXd inner = z * z.transpose() - Eigen::MatrixXd::Identity(d, d);
            const Eigen::MatrixXd g = u.transpose().triangularView<Eigen::Upper>().solve(inner);
            write_factor_grad(g, u, out.subspan(k));
        }
    }

    double log_pdf(std::span<const double> theta, std::span<const double> x) const override
    {
        const auto [mu, u] = unpack(theta);
        const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(dim_)) - mu;
        const Eigen::VectorXd z = u.triangularView<Eigen::Lower>().solve(r);
        double logdet = 0.0;
        for (Eigen::Index i = 0; i < u.rows(); ++i) logdet += std::log(u(i, i));
        return -0.5 * static_cast<double>(dim_) * std::log(2.0 * std::numbers::pi) - logdet - 0.5 * z.squaredNorm();
    }

    bool has_closed_form(const KernelSpec& spec) const override { return spec.family() == KernelFamily::Gaussian; }

    std::optional<ClosedForm> closed_form(std::span<const double> theta, const KernelSpec& spec,
                                          const Sample& data, bool with_grad) const override
    {
        if (!has_closed_form(spec)) return std::nullopt;
        const auto [mu, u] = unpack(theta);
        const auto d = static_cast<Eigen::Index>(dim_);
        const double g2 = spec.bandwidth() * spec.bandwidth();
        const Eigen::MatrixXd sigma = u * u.transpose();
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
        const Eigen::MatrixXd mmat = g2 * id + 2.0 * sigma;
        const Eigen::MatrixXd nmat = g2 * id + 4.0 * sigma;
        const Eigen::LLT<Eigen::MatrixXd> mchol(mmat);
        const Eigen::LLT<Eigen::MatrixXd> nchol(nmat);
        auto half_logdet = [](const Eigen::LLT<Eigen::MatrixXd>& c) {
            double s = 0.0;
            for (Eigen::Index i = 0; i < c.matrixL().rows(); ++i) s += std::log(c.matrixLLT()(i, i));
            return s;
        };
        const double log_gd = static_cast<double>(d) * std::log(spec.bandwidth());
        const double pref_m = std::exp(log_gd - half_logdet(mchol));

        ClosedForm cf;
        cf.e_kk = std::exp(log_gd - half_logdet(nchol));
        cf.e_kx.resize(data.size());
        Eigen::VectorXd gmu = Eigen::VectorXd::Zero(d);
        Eigen::MatrixXd gsig = Eigen::MatrixXd::Zero(d, d);
        const Eigen::MatrixXd minv = mchol.solve(id);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const Eigen::VectorXd r = mu - Eigen::Map<const Eigen::VectorXd>(data[i].data(), d);
            const Eigen::VectorXd w = mchol.solve(r);
            const double e = pref_m * std::exp(-r.dot(w));
            cf.e_kx[i] = e;
            if (with_grad) {
                gmu += -2.0 * e * w;
                gsig += e * (2.0 * w * w.transpose() - minv);
            }
        }
        if (!with_grad) return cf;

        const double inv_n = 1.0 / static_cast<double>(data.size());
        cf.grad_e_kk.assign(num_coords(), 0.0);
        cf.grad_mean_e_kx.assign(num_coords(), 0.0);
        std::size_t k = 0;
        if (free_mean_) {
            for (Eigen::Index i = 0; i < d; ++i) cf.grad_mean_e_kx[k++] = gmu(i) * inv_n;
        }
        if (free_factor_) {
            const Eigen::MatrixXd gk = -2.0 * cf.e_kk * nchol.solve(id);
            write_factor_grad(2.0 * gk * u, u, std::span<double>(cf.grad_e_kk).subspan(k));
            write_factor_grad(2.0 * (gsig * inv_n) * u, u, std::span<double>(cf.grad_mean_e_kx).subspan(k));
        }
        return cf;
    }

private:
    std::pair<Eigen::VectorXd, Eigen::MatrixXd> unpack(std::span<const double> theta) const
    {
        const auto d = static_cast<Eigen::Index>(dim_);
        std::size_t k = 0;
        Eigen::VectorXd mu = mean_;
        if (free_mean_) {
            mu.resize(d);
            for (Eigen::Index i = 0; i < d; ++i) mu(i) = theta[k++];
        }
        Eigen::MatrixXd u = Eigen::MatrixXd::Zero(d, d);
        if (isotropic_) {
            u.diagonal().setConstant(sigma_);
        } else if (free_factor_) {
            for (Eigen::Index i = 0; i < d; ++i)
                for (Eigen::Index j = 0; j <= i; ++j) {
                    const double v = theta[k++];
                    u(i, j) = i == j ? std::exp(v) : v;
                }
        } else {
            for (Eigen::Index i = 0; i < d; ++i)
                for (Eigen::Index j = 0; j <= i; ++j) u(i, j) = spec_.par2.value[std::size_t(i) * dim_ + std::size_t(j)];
        }
        return {mu, u};
    }

    // Lower-triangular entries of a gradient in U, chain-ruled through the log diagonal.
    void write_factor_grad(const Eigen::MatrixXd& g, const Eigen::MatrixXd& u, std::span<double> out) const
    {
        std::size_t k = 0;
        for (Eigen::Index i = 0; i < g.rows(); ++i)
            for (Eigen::Index j = 0; j <= i; ++j) out[k++] = i == j ? g(i, j) * u(i, i) : g(i, j);
    }

    bool free_mean_ = true;
    bool free_factor_ = true;
    bool isotropic_ = false;
    double sigma_ = 1.0;
    Eigen::VectorXd mean_;
};

} // namespace

// ---------------------------------------------------------------- registry

std::string_view to_string(ModelId id)
{
    for (const auto& e : kModelNames)
        if (e.id == id) return e.name;
    return "?";
}

ModelId parse_model_id(std::string_view name)
{
    for (const auto& e : kModelNames)
        if (e.name == name) return e.id;
    std::string valid;
    for (const auto& e : kModelNames) {
        if (!valid.empty()) valid += ", ";
        valid += e.name;
    }
    throw ConfigError("unknown model '" + std::string(name) + "'; valid models: " + valid);
}

std::span<const ModelId> all_model_ids() { return kAllIds; }

bool is_multivariate(ModelId id)
{
    return id == ModelId::MultiGaussian || id == ModelId::MultiGaussianLoc || id == ModelId::MultiGaussianScale ||
           id == ModelId::MultiDirac;
}

SlotLayout slot_layout(ModelId id)
{
    using R = SlotRole;
    switch (id) {
    case ModelId::Gaussian: return {R::Free, R::Free, "mean", "standard deviation"};
    case ModelId::GaussianLoc: return {R::Free, R::Fixed, "mean", "standard deviation"};
    case ModelId::GaussianScale: return {R::Fixed, R::Free, "mean", "standard deviation"};
    case ModelId::Cauchy: return {R::Free, R::FixedOrDefault, "location", "scale"};
    case ModelId::Pareto: return {R::Free, R::Absent, "exponent", ""};
    case ModelId::Exponential: return {R::Free, R::Absent, "rate", ""};
    case ModelId::Gamma: return {R::Free, R::Free, "shape", "rate"};
    case ModelId::GammaShape: return {R::Free, R::Fixed, "shape", "rate"};
    case ModelId::GammaRate: return {R::Fixed, R::Free, "shape", "rate"};
    case ModelId::UniformLoc: return {R::Free, R::Fixed, "center", "length"};
    case ModelId::UniformUpper: return {R::Fixed, R::Free, "lower bound", "upper bound"};
    case ModelId::UniformLowerUpper: return {R::Free, R::Free, "lower bound", "upper bound"};
    case ModelId::Dirac: return {R::Free, R::Absent, "location", ""};
    case ModelId::DiscreteUniform: return {R::Free, R::Absent, "upper bound N", ""};
    case ModelId::Binomial: return {R::Free, R::Free, "size N", "probability"};
    case ModelId::BinomialSize: return {R::Free, R::Fixed, "size N", "probability"};
    case ModelId::BinomialProb: return {R::Fixed, R::Free, "size N", "probability"};
    case ModelId::Geometric: return {R::Free, R::Absent, "probability", ""};
    case ModelId::Poisson: return {R::Free, R::Absent, "rate", ""};
    case ModelId::MultiGaussian: return {R::Free, R::Free, "mean", "scale matrix U"};
    case ModelId::MultiGaussianLoc: return {R::Free, R::Fixed, "mean", "standard deviation"};
    case ModelId::MultiGaussianScale: return {R::Fixed, R::Free, "mean", "scale matrix U"};
    case ModelId::MultiDirac: return {R::Free, R::Absent, "location", ""};
    }
    return {R::Free, R::Absent, "", ""};
}

ModelSpec ModelSpec::make(ModelId id, std::optional<std::vector<double>> par1, std::optional<std::vector<double>> par2)
{
    const SlotLayout layout = slot_layout(id);
    auto resolve = [&](SlotRole role, std::optional<std::vector<double>>& given, std::string_view slot,
                       std::string_view what) {
        ParamSlot s;
        switch (role) {
        case SlotRole::Absent:
            if (given) throw ConfigError("model " + std::string(to_string(id)) + " has no " + std::string(slot));
            s.status = ParamStatus::Fixed;
            break;
        case SlotRole::Free:
            s.status = given ? ParamStatus::FreeUserInit : ParamStatus::FreeDefault;
            if (given) s.value = std::move(*given);
            break;
        case SlotRole::Fixed:
            if (!given)
                throw ConfigError("model " + std::string(to_string(id)) + " requires " + std::string(slot) + " (" +
                                  std::string(what) + ") to be specified by the user");
            s.status = ParamStatus::Fixed;
            s.value = std::move(*given);
            break;
        case SlotRole::FixedOrDefault:
            s.status = ParamStatus::Fixed;
            if (given) s.value = std::move(*given);
            break;
        }
        return s;
    };
    ModelSpec spec{id, {}, {}};
    spec.par1 = resolve(layout.par1, par1, "par1", layout.par1_name);
    spec.par2 = resolve(layout.par2, par2, "par2", layout.par2_name);
    return spec;
}

void Model::score(std::span<const double>, std::span<const double>, std::span<double>) const
{
    throw CapabilityError("model " + std::string(to_string(id())) + " has no differentiable log-density");
}

void Model::sample_pathwise(std::span<const double>, std::size_t, Rng&, std::vector<double>&,
                            std::vector<double>&) const
{
    throw CapabilityError("model " + std::string(to_string(id())) + " has no reparameterized sampler");
}

double Model::log_pdf(std::span<const double>, std::span<const double>) const
{
    throw CapabilityError("model " + std::string(to_string(id())) + " has no density");
}

bool Model::has_closed_form(const KernelSpec&) const { return false; }

std::optional<ClosedForm> Model::closed_form(std::span<const double>, const KernelSpec&, const Sample&, bool) const
{
    return std::nullopt;
}

Params Model::initial_params(const Sample& data) const
{
    Params defaults = default_init(data);
    Params p;
    p.par1 = spec_.par1.status == ParamStatus::FreeDefault ? defaults.par1 : spec_.par1.value;
    p.par2 = spec_.par2.status == ParamStatus::FreeDefault ? defaults.par2 : spec_.par2.value;
    if (slot_layout(id()).par2 == SlotRole::FixedOrDefault && p.par2.empty()) p.par2 = defaults.par2;
    if (slot_layout(id()).par2 == SlotRole::Absent) p.par2.clear();
    validate(p);
    return p;
}

std::unique_ptr<Model> make_model(const ModelSpec& spec, std::size_t data_dim)
{
    if (data_dim == 0) throw ConfigError("data dimension must be at least 1");
    if (!is_multivariate(spec.id) && data_dim != 1)
        throw ConfigError("model " + std::string(to_string(spec.id)) + " is univariate but data has " +
                          std::to_string(data_dim) + " columns");

    std::unique_ptr<Model> model;
    switch (spec.id) {
    case ModelId::Gaussian:
    case ModelId::GaussianLoc:
    case ModelId::GaussianScale: model = std::make_unique<GaussianModel>(spec, data_dim); break;
    case ModelId::Cauchy: model = std::make_unique<CauchyModel>(spec, data_dim); break;
    case ModelId::Pareto: model = std::make_unique<ParetoModel>(spec, data_dim); break;
    case ModelId::Exponential: model = std::make_unique<ExponentialModel>(spec, data_dim); break;
    case ModelId::Gamma:
    case ModelId::GammaShape:
    case ModelId::GammaRate: model = std::make_unique<GammaModel>(spec, data_dim); break;
    case ModelId::UniformLoc:
    case ModelId::UniformUpper:
    case ModelId::UniformLowerUpper: model = std::make_unique<UniformModel>(spec, data_dim); break;
    case ModelId::Dirac:
    case ModelId::MultiDirac: model = std::make_unique<DiracModel>(spec, data_dim); break;
    case ModelId::DiscreteUniform: model = std::make_unique<DiscreteUniformModel>(spec, data_dim); break;
    case ModelId::Binomial:
    case ModelId::BinomialSize:
    case ModelId::BinomialProb: model = std::make_unique<BinomialModel>(spec, data_dim); break;
    case ModelId::Geometric: model = std::make_unique<GeometricModel>(spec, data_dim); break;
    case ModelId::Poisson: model = std::make_unique<PoissonModel>(spec, data_dim); break;
    case ModelId::MultiGaussian:
    case ModelId::MultiGaussianLoc:
    case ModelId::MultiGaussianScale: model = std::make_unique<MultiGaussianModel>(spec, data_dim); break;
    }

    // Fixed values are checked once here, with placeholder free values taken from a
    // neutral point so that only the user-fixed parts can fail.
    Params probe;
    const SlotLayout layout = slot_layout(spec.id);
    auto fill = [&](const ParamSlot& slot, SlotRole role, std::vector<double>& out, bool first) {
        if (role == SlotRole::Absent) return;
        if (!slot.value.empty()) {
            out = slot.value;
            return;
        }
        // neutral placeholder satisfying every domain
        const bool matrix = !first && (spec.id == ModelId::MultiGaussian || spec.id == ModelId::MultiGaussianScale);
        const std::size_t size = matrix ? data_dim * data_dim : (first && is_multivariate(spec.id) ? data_dim : 1);
        out.assign(size, 0.0);
        if (matrix) {
            for (std::size_t k = 0; k < data_dim; ++k) out[k * data_dim + k] = 1.0;
        } else if (first) {
            const bool integer = spec.id == ModelId::DiscreteUniform || spec.id == ModelId::Binomial ||
                                 spec.id == ModelId::BinomialSize;
            const bool positive = spec.id == ModelId::Pareto || spec.id == ModelId::Exponential ||
                                  spec.id == ModelId::Gamma || spec.id == ModelId::GammaShape ||
                                  spec.id == ModelId::Poisson;
            const bool prob = spec.id == ModelId::Geometric;
            out[0] = integer || positive ? 1.0 : (prob ? 0.5 : 0.0);
        } else {
            const bool prob = spec.id == ModelId::Binomial || spec.id == ModelId::BinomialSize ||
                              spec.id == ModelId::BinomialProb;
            double base = 0.0;
            if (!spec.par1.value.empty() && spec.par1.value.size() == 1) base = spec.par1.value[0];
            out[0] = prob ? 0.5 : (layout.par2 == SlotRole::Free && !first ? base + 1.0 : 1.0);
        }
    };
    fill(spec.par1, layout.par1, probe.par1, true);
    fill(spec.par2, layout.par2, probe.par2, false);
    if (spec.id == ModelId::Cauchy && probe.par2.empty()) probe.par2 = {kCauchyDefaultScale};
    model->validate(probe);
    return model;
}

Sample sample(const Model& model, std::span<const double> theta, std::size_t m, std::uint64_t seed)
{
    if (m == 0) throw InputError("sample size must be at least 1");
    Rng rng(seed);
    std::vector<double> out;
    out.reserve(m * model.data_dim());
    model.sample(theta, m, rng, out);
    return Sample(model.data_dim(), std::move(out));
}

std::vector<double> log_density_grad(const Model& model, std::span<const double> theta, std::span<const double> x)
{
    if (!model.has_score())
        throw CapabilityError("model " + std::string(to_string(model.id())) +
                              " has no log-density gradient in its free parameters");
    std::vector<double> g(model.num_coords());
    model.score(theta, x, g);
    return g;
}

std::optional<KernelExpectations> kernel_expectations(const Model& model, std::span<const double> theta,
                                                      const KernelSpec& spec, const Sample& data)
{
    auto cf = model.closed_form(theta, spec, data, false);
    if (!cf) return std::nullopt;
    return KernelExpectations{cf->e_kk, std::move(cf->e_kx)};
}

double median(std::vector<double> v)
{
    if (v.empty()) throw InputError("median of an empty vector");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    return 0.5 * (upper + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
}

double mad_scale(const std::vector<double>& v)
{
    const double m = median(v);
    std::vector<double> dev(v.size());
    std::transform(v.begin(), v.end(), dev.begin(), [m](double x) { return std::abs(x - m); });
    return 1.4826 * median(std::move(dev));
}

} // namespace mmdfit
