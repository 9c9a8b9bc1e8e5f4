#include "mmdfit/fit_est.hpp"

#include "mmdfit/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace mmdfit {

namespace {

double mean_of_sample(const Sample& data)
{
    double s = 0.0;
    for (double v : data.values()) s += v;
    return s / static_cast<double>(data.values().size());
}

void check_data(const Model& model, const Sample& data)
{
    if (data.size() == 0) throw InputError("data must contain at least one observation");
    if (data.dim() != model.data_dim())
        throw InputError("data has dimension " + std::to_string(data.dim()) + " but the model expects " +
                         std::to_string(model.data_dim()));
    for (double v : data.values())
        if (!std::isfinite(v)) throw InputError("data contains a non-finite value");
}

// e_kk - 2 mean(e_kx), i.e. D^2 without the data-data constant.
double closed_form_value(const ClosedForm& cf)
{
    double s = 0.0;
    for (double v : cf.e_kx) s += v;
    return cf.e_kk - 2.0 * s / static_cast<double>(cf.e_kx.size());
}

double mean_kernel_to_data(const KernelSpec& spec, std::span<const double> x, const Sample& data)
{
    double s = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) s += kernel_eval(spec, x, data[i]);
    return s / static_cast<double>(data.size());
}

// (1/n) sum_i d/dx k(x, x_i) for scalar data.
double mean_kernel_slope(const KernelSpec& spec, double x, const Sample& data)
{
    double s = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double r = x - data[i][0];
        if (r != 0.0) s += spec.distance_derivative(std::abs(r)) * (r > 0.0 ? 1.0 : -1.0);
    }
    return s / static_cast<double>(data.size());
}

// Monte-Carlo gradient of D^2 written to grad; returns the matching estimate of
// D^2 minus its data-data constant.
double mc_gradient(const Model& model, std::span<const double> theta, const Sample& data, const KernelSpec& spec,
                   std::size_t m, Rng& rng, std::vector<double>& grad)
{
    if (m < 2 || m % 2 != 0) throw ConfigError("Monte-Carlo sample count must be even and at least 2");
    const std::size_t p = model.num_coords();
    const std::size_t d = model.data_dim();
    const std::size_t pairs = m / 2;
    grad.assign(p, 0.0);
    double e_kk = 0.0;
    double e_kx = 0.0;

    if (model.has_pathwise()) {
        std::vector<double> x, jac;
        x.reserve(m);
        jac.reserve(m * p);
        model.sample_pathwise(theta, m, rng, x, jac);
        for (std::size_t t = 0; t < pairs; ++t) {
            const std::size_t a = 2 * t, b = 2 * t + 1;
            const double r = x[a] - x[b];
            const double dk = r == 0.0 ? 0.0 : spec.distance_derivative(std::abs(r)) * (r > 0.0 ? 1.0 : -1.0);
            const double ha = mean_kernel_slope(spec, x[a], data);
            const double hb = mean_kernel_slope(spec, x[b], data);
            for (std::size_t k = 0; k < p; ++k) {
                const double ja = jac[a * p + k], jb = jac[b * p + k];
                grad[k] += dk * (ja - jb) - ha * ja - hb * jb;
            }
            e_kk += spec.of_distance(std::abs(r));
            e_kx += mean_kernel_to_data(spec, {&x[a], 1}, data) + mean_kernel_to_data(spec, {&x[b], 1}, data);
        }
    } else if (model.has_score()) {
        std::vector<double> x;
        x.reserve(m * d);
        model.sample(theta, m, rng, x);
        std::vector<double> sa(p), sb(p);
        for (std::size_t t = 0; t < pairs; ++t) {
            const std::span<const double> xa(&x[2 * t * d], d), xb(&x[(2 * t + 1) * d], d);
            const double kab = kernel_eval(spec, xa, xb);
            const double ha = mean_kernel_to_data(spec, xa, data);
            const double hb = mean_kernel_to_data(spec, xb, data);
            model.score(theta, xa, sa);
            model.score(theta, xb, sb);
            for (std::size_t k = 0; k < p; ++k) grad[k] += (kab - ha) * sa[k] + (kab - hb) * sb[k];
            e_kk += kab;
            e_kx += ha + hb;
        }
    } else {
        throw CapabilityError("model " + std::string(to_string(model.id())) +
                              " admits no Monte-Carlo gradient (no score and no reparameterized sampler)");
    }
    const double inv = 1.0 / static_cast<double>(pairs);
    for (double& g : grad) g *= inv;
    return e_kk * inv - e_kx / static_cast<double>(m) * 2.0;
}

double mc_value(const Model& model, std::span<const double> theta, const Sample& data, const KernelSpec& spec,
                std::uint64_t seed)
{
    const Sample draws = sample(model, theta, kObjectiveMcDraws, seed);
    double e_kk = 0.0;
    for (std::size_t t = 0; t + 1 < draws.size(); t += 2) e_kk += kernel_eval(spec, draws[t], draws[t + 1]);
    e_kk /= static_cast<double>(draws.size() / 2);
    return e_kk - 2.0 * cross_gram_mean(draws, data, spec);
}

bool binomial_with_free_size(const Model& model)
{
    return model.id() == ModelId::Binomial;
}

std::size_t window_start(const Sample& data)
{
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : data.values()) hi = std::max(hi, v);
    return static_cast<std::size_t>(std::max(1.0, std::ceil(hi)));
}

GdOptions gd_options(const OptimizerConfig& cfg)
{
    GdOptions o;
    o.maxit = cfg.maxit;
    o.tol = cfg.tol;
    o.window = cfg.window;
    o.initial_step = cfg.step0;
    o.fixed_step = cfg.fixed_step;
    return o;
}

SmoothObjective closed_form_objective(const Model& model, const Sample& data, const KernelSpec& spec, double constant)
{
    return [&model, &data, spec, constant](std::span<const double> theta, std::vector<double>* grad) {
        const auto cf = model.closed_form(theta, spec, data, grad != nullptr);
        if (grad) {
            grad->resize(cf->grad_e_kk.size());
            for (std::size_t k = 0; k < grad->size(); ++k) (*grad)[k] = cf->grad_e_kk[k] - 2.0 * cf->grad_mean_e_kx[k];
        }
        return closed_form_value(*cf) + constant;
    };
}

FitResult make_result(const Model& model, const KernelSpec& spec, Method method, const Params& init)
{
    FitResult r;
    r.model = model.id();
    r.initial = init;
    r.method_used = method;
    r.kernel = spec;
    return r;
}

FitResult fit_binomial_enumerated(const Model& model, const Sample& data, const KernelSpec& spec,
                                  const OptimizerConfig& cfg, double constant)
{
    const Params init = model.initial_params(data);
    FitResult best = make_result(model, spec, Method::GD, init);
    best.objective = std::numeric_limits<double>::infinity();
    const std::size_t lo = window_start(data);
    for (std::size_t n = lo; n <= lo + cfg.exact_window; ++n) {
        const double nd = static_cast<double>(n);
        const double p0 = model.spec().par2.status == ParamStatus::FreeUserInit
                              ? init.par2[0]
                              : std::clamp(mean_of_sample(data) / nd, 0.01, 0.99);
        const auto inner = make_model(ModelSpec::make(ModelId::BinomialProb, std::vector<double>{nd},
                                                      std::vector<double>{p0}),
                                      1);
        const auto gd = gradient_descent(closed_form_objective(*inner, data, spec, constant),
                                         inner->coords(inner->initial_params(data)), gd_options(cfg));
        best.iterations += gd.iterations;
        if (gd.objective < best.objective) {
            best.objective = gd.objective;
            best.theta = {nd, gd.theta[0]};
            best.trace.clear();
            for (const auto& tp : gd.trace) best.trace.push_back({{nd, tp.theta[0]}, tp.objective});
            best.warnings.clear();
            if (gd.hit_maxit) best.warnings.emplace_back(kMaxitWarning);
        }
    }
    best.estimates = model.natural(best.theta);
    return best;
}

} // namespace

std::string_view to_string(Method m)
{
    switch (m) {
    case Method::Auto: return "auto";
    case Method::Exact: return "exact";
    case Method::GD: return "GD";
    case Method::SGD: return "SGD";
    }
    return "?";
}

Method parse_method(std::string_view name)
{
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "auto") return Method::Auto;
    if (lower == "exact") return Method::Exact;
    if (lower == "gd") return Method::GD;
    if (lower == "sgd") return Method::SGD;
    throw ConfigError("unknown method '" + std::string(name) + "'; valid methods: auto, exact, GD, SGD");
}

void OptimizerConfig::validate() const
{
    if (maxit < 1) throw ConfigError("maxit must be at least 1");
    if (mc_samples < 2 || mc_samples % 2 != 0) throw ConfigError("mc_samples must be even and at least 2");
    if (!(tol > 0.0)) throw ConfigError("tol must be positive");
    if (!(step0 > 0.0)) throw ConfigError("step0 must be positive");
    if (window < 1) throw ConfigError("window must be at least 1");
    if (hat_batch < 1) throw ConfigError("hat_batch must be at least 1");
    if (fixed_step && !(*fixed_step > 0.0)) throw ConfigError("fixed_step must be positive");
}

Objective objective_mmd2(const Model& model, std::span<const double> theta, const Sample& data,
                         const KernelSpec& spec, std::uint64_t seed)
{
    check_data(model, data);
    const double constant = gram_mean(data, spec);
    if (const auto cf = model.closed_form(theta, spec, data, false)) return {closed_form_value(*cf) + constant, true};
    return {mc_value(model, theta, data, spec, seed) + constant, false};
}

std::vector<double> grad_mmd2_exact(const Model& model, std::span<const double> theta, const Sample& data,
                                    const KernelSpec& spec)
{
    check_data(model, data);
    if (!model.has_closed_form(spec))
        throw CapabilityError("no closed-form gradient for model " + std::string(to_string(model.id())) +
                              " with the " + std::string(to_string(spec.family())) + " kernel");
    std::vector<double> g;
    closed_form_objective(model, data, spec, 0.0)(theta, &g);
    if (g.size() != model.num_coords())
        throw CapabilityError("no closed-form gradient for model " + std::string(to_string(model.id())));
    return g;
}

std::vector<double> grad_mmd2_mc(const Model& model, std::span<const double> theta, const Sample& data,
                                 const KernelSpec& spec, std::size_t m, Rng& rng)
{
    check_data(model, data);
    std::vector<double> g;
    mc_gradient(model, theta, data, spec, m, rng, g);
    return g;
}

std::vector<double> grad_mmd2_mc(const Model& model, std::span<const double> theta, const Sample& data,
                                 const KernelSpec& spec, std::size_t m, std::uint64_t seed)
{
    Rng rng(seed);
    return grad_mmd2_mc(model, theta, data, spec, m, rng);
}

bool exact_available(const Model& model, const KernelSpec& spec)
{
    return model.has_closed_form(spec) && !model.integer_coords().empty() &&
           model.integer_coords().size() == model.num_coords();
}

bool gd_available(const Model& model, const KernelSpec& spec)
{
    return model.has_closed_form(spec) && model.integer_coords().size() < model.num_coords();
}

bool sgd_available(const Model& model)
{
    return model.integer_coords().empty() && (model.has_score() || model.has_pathwise());
}

Method resolve_method(const Model& model, const KernelSpec& spec, Method requested)
{
    const std::string who = "model " + std::string(to_string(model.id())) + " with the " +
                            std::string(to_string(spec.family())) + " kernel";
    switch (requested) {
    case Method::Auto:
        if (exact_available(model, spec)) return Method::Exact;
        if (gd_available(model, spec)) return Method::GD;
        if (sgd_available(model)) return Method::SGD;
        throw CapabilityError("no optimization method is available for " + who);
    case Method::Exact:
        if (!exact_available(model, spec)) throw CapabilityError("method exact is not available for " + who);
        return Method::Exact;
    case Method::GD:
        if (!gd_available(model, spec)) throw CapabilityError("method GD is not available for " + who);
        return Method::GD;
    case Method::SGD:
        if (!sgd_available(model)) throw CapabilityError("method SGD is not available for " + who);
        return Method::SGD;
    }
    return requested;
}

FitResult fit_exact(const Model& model, const Sample& data, const KernelSpec& spec, const OptimizerConfig& cfg)
{
    check_data(model, data);
    if (!exact_available(model, spec))
        throw CapabilityError("model " + std::string(to_string(model.id())) + " cannot be fitted by enumeration");
    const Params init = model.initial_params(data);
    FitResult r = make_result(model, spec, Method::Exact, init);
    const double constant = gram_mean(data, spec);
    r.objective = std::numeric_limits<double>::infinity();
    const std::size_t lo = window_start(data);
    for (std::size_t n = lo; n <= lo + cfg.exact_window; ++n) {
        const std::vector<double> theta{static_cast<double>(n)};
        const double v = closed_form_value(*model.closed_form(theta, spec, data, false)) + constant;
        r.trace.push_back({theta, v});
        if (v < r.objective) {
            r.objective = v;
            r.theta = theta;
        }
    }
    r.iterations = r.trace.size();
    r.estimates = model.natural(r.theta);
    return r;
}

FitResult fit(const Model& model, const Sample& data, const KernelSpec& spec, const OptimizerConfig& cfg)
{
    cfg.validate();
    check_data(model, data);
    const Method method = resolve_method(model, spec, cfg.method);
    if (method == Method::Exact) return fit_exact(model, data, spec, cfg);

    const double constant = gram_mean(data, spec);
    if (method == Method::GD && binomial_with_free_size(model))
        return fit_binomial_enumerated(model, data, spec, cfg, constant);

    const Params init = model.initial_params(data);
    FitResult r = make_result(model, spec, method, init);
    const std::vector<double> theta0 = model.coords(init);

    if (method == Method::GD) {
        GdOptions opts = gd_options(cfg);
        opts.frozen = model.integer_coords();
        auto gd = gradient_descent(closed_form_objective(model, data, spec, constant), theta0, opts);
        r.theta = std::move(gd.theta);
        r.objective = gd.objective;
        r.trace = std::move(gd.trace);
        r.iterations = gd.iterations;
        if (gd.hit_maxit) r.warnings.emplace_back(kMaxitWarning);
    } else {
        AdagradOptions opts;
        opts.maxit = cfg.maxit;
        opts.step0 = cfg.step0;
        opts.eps = cfg.adagrad_eps;
        opts.burnin = cfg.burnin;
        opts.window = cfg.window;
        opts.seed = cfg.seed;
        const std::size_t m = cfg.mc_samples;
        auto sgd = adagrad(
            [&](std::span<const double> theta, std::vector<double>& g, Rng& rng) {
                return mc_gradient(model, theta, data, spec, m, rng, g) + constant;
            },
            theta0, opts);
        r.theta = std::move(sgd.theta);
        r.trace = std::move(sgd.trace);
        r.iterations = sgd.iterations;
        const Objective obj = objective_mmd2(model, r.theta, data, spec, cfg.seed);
        r.objective = obj.value;
        r.objective_exact = obj.exact;
    }
    r.estimates = model.natural(r.theta);
    return r;
}

} // namespace mmdfit
