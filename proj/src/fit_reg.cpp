#include "mmdfit/fit_reg.hpp"

#include "mmdfit/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace mmdfit {

namespace {

constexpr double kRootEps = 1e-10;
constexpr std::size_t kTildeMcDraws = 1000;
constexpr std::size_t kHatMcDraws = 1000;

std::optional<std::size_t> constant_column(const Sample& x)
{
    for (std::size_t c = 0; c < x.dim(); ++c) {
        const double v = x[0][c];
        if (v == 0.0) continue;
        bool same = true;
        for (std::size_t i = 1; i < x.size() && same; ++i) same = x[i][c] == v;
        if (same) return c;
    }
    return std::nullopt;
}

Rng datum_rng(std::uint64_t seed, std::size_t i)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
    return Rng(seq);
}

// The problem with its design matrix assembled and validated.
class Prepared {
public:
    explicit Prepared(const RegressionProblem& p) : p_(p)
    {
        n_ = p.y.size();
        if (n_ < 1) throw InputError("regression needs at least one observation");
        if (p.x.size() != n_)
            throw InputError("response has " + std::to_string(n_) + " entries but the design matrix has " +
                             std::to_string(p.x.size()) + " rows");
        for (double v : p.x.values())
            if (!std::isfinite(v)) throw InputError("design matrix contains a non-finite value");
        check_response(p.model.id, p.y);
        if (p.bdwth_x < 0.0 || !std::isfinite(p.bdwth_x)) throw ConfigError("bdwth.x must be 0 or positive");

        add_intercept_ = p.intercept && !constant_column(p.x);
        k_ = p.x.dim() + (add_intercept_ ? 1 : 0);
        design_.reserve(n_ * k_);
        for (std::size_t i = 0; i < n_; ++i) {
            if (add_intercept_) design_.push_back(1.0);
            const auto row = p.x[i];
            design_.insert(design_.end(), row.begin(), row.end());
        }
        aux_free_ = p.model.aux_is_free();
        aux_fixed_ = p.model.par2.value.empty() ? 1.0 : p.model.par2.value[0];
        closed_ = has_closed_form(conditional_law(p.model.id, 0.0, 1.0).family, p.kernel_y.family());
        if (p.bdwth_x > 0.0) kx_.emplace(p.kernel_x, p.bdwth_x);
    }

    std::size_t n() const { return n_; }
    std::size_t k() const { return k_; }
    std::size_t coords() const { return k_ + (aux_free_ ? 1 : 0); }
    bool aux_free() const { return aux_free_; }
    bool closed() const { return closed_; }
    bool adds_intercept() const { return add_intercept_; }
    const RegressionProblem& problem() const { return p_; }
    const KernelSpec& ky() const { return p_.kernel_y; }
    double y(std::size_t i) const { return p_.y[i]; }
    std::span<const double> row(std::size_t i) const { return {design_.data() + i * k_, k_}; }

    double kx(std::size_t i, std::size_t j) const
    {
        return i == j ? kx_->at_zero() : kernel_eval(*kx_, p_.x[i], p_.x[j]);
    }

    std::vector<ConditionalLaw> laws(std::span<const double> theta) const
    {
        if (theta.size() != coords())
            throw InputError("parameter vector has " + std::to_string(theta.size()) + " entries, expected " +
                             std::to_string(coords()));
        const double aux = aux_free_ ? std::exp(theta[k_]) : aux_fixed_;
        std::vector<ConditionalLaw> out(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            const auto r = row(i);
            const double eta = std::inner_product(r.begin(), r.end(), theta.begin(), 0.0);
            out[i] = conditional_law(p_.model.id, eta, aux);
            if (out[i].capped) capped_ = true;
        }
        return out;
    }

    bool saturated() const { return capped_; }

    // Adds w * (d/d eta_i) and w * (d/d log aux) into a coordinate gradient.
    void accumulate(std::vector<double>& g, std::size_t i, double d_eta, double d_log_aux) const
    {
        const auto r = row(i);
        for (std::size_t c = 0; c < k_; ++c) g[c] += d_eta * r[c];
        if (aux_free_) g[k_] += d_log_aux;
    }

private:
    const RegressionProblem& p_;
    std::size_t n_ = 0;
    std::size_t k_ = 0;
    bool add_intercept_ = false;
    bool aux_free_ = false;
    double aux_fixed_ = 1.0;
    bool closed_ = false;
    std::vector<double> design_;
    std::optional<KernelSpec> kx_;
    mutable bool capped_ = false;
};

void require_closed(const Prepared& pr)
{
    if (!pr.closed())
        throw CapabilityError("no closed-form gradient for model " + std::string(to_string(pr.problem().model.id)) +
                              " with the " + std::string(to_string(pr.ky().family())) + " response kernel");
}

void require_hat(const Prepared& pr, std::size_t max_n)
{
    if (!(pr.problem().bdwth_x > 0.0)) throw ConfigError("the theta hat criterion needs bdwth.x > 0");
    if (pr.n() > max_n)
        throw BudgetError("n = " + std::to_string(pr.n()) + " exceeds the O(n^2) budget of " + std::to_string(max_n) +
                          " observations; use bdwth.x = 0 (theta tilde) or raise the limit");
}

struct TildeTerm {
    double value;
    double d_eta;
    double d_log_aux;
};

TildeTerm tilde_term_closed(const Prepared& pr, const ConditionalLaw& law, std::size_t i)
{
    const auto pair = pair_expectation(law, law, pr.ky());
    const auto point = point_expectation(law, pr.y(i), pr.ky());
    return {pair.value - 2.0 * point.value + pr.ky().at_zero(), pair.d_eta_a + pair.d_eta_b - 2.0 * point.d_eta,
            pair.d_log_aux - 2.0 * point.d_log_aux};
}

double tilde_term_mc(const Prepared& pr, const ConditionalLaw& law, std::size_t i, std::uint64_t seed)
{
    Rng rng = datum_rng(seed, i);
    const double yi = pr.y(i);
    double s = 0.0;
    for (std::size_t t = 0; t < kTildeMcDraws / 2; ++t) {
        const double a = law.sample(rng), b = law.sample(rng);
        s += kernel_eval(pr.ky(), a, b) - kernel_eval(pr.ky(), a, yi) - kernel_eval(pr.ky(), b, yi);
    }
    return s / static_cast<double>(kTildeMcDraws / 2) + pr.ky().at_zero();
}

double aggregate(double t, TildeObjective kind)
{
    return kind == TildeObjective::Squared ? t : std::sqrt(std::max(t, 0.0) + kRootEps * kRootEps);
}

double tilde_value(const Prepared& pr, std::span<const double> theta, TildeObjective kind, std::uint64_t seed)
{
    const auto laws = pr.laws(theta);
    double s = 0.0;
    for (std::size_t i = 0; i < pr.n(); ++i) {
        const double t = pr.closed() ? tilde_term_closed(pr, laws[i], i).value : tilde_term_mc(pr, laws[i], i, seed);
        s += aggregate(t, kind);
    }
    return s / static_cast<double>(pr.n());
}

double tilde_value_grad(const Prepared& pr, std::span<const double> theta, TildeObjective kind,
                        std::vector<double>* grad)
{
    const auto laws = pr.laws(theta);
    if (grad) grad->assign(pr.coords(), 0.0);
    double s = 0.0;
    const double inv_n = 1.0 / static_cast<double>(pr.n());
    for (std::size_t i = 0; i < pr.n(); ++i) {
        const TildeTerm t = tilde_term_closed(pr, laws[i], i);
        s += aggregate(t.value, kind);
        if (grad) {
            double w = inv_n;
            if (kind == TildeObjective::Root)
                w = t.value > 0.0 ? inv_n / (2.0 * std::sqrt(t.value + kRootEps * kRootEps)) : 0.0;
            pr.accumulate(*grad, i, w * t.d_eta, w * t.d_log_aux);
        }
    }
    return s * inv_n;
}

// One pair of draws per observation; returns the matching estimate of the criterion.
double tilde_stochastic(const Prepared& pr, std::span<const double> theta, std::vector<double>& grad, Rng& rng)
{
    const auto laws = pr.laws(theta);
    grad.assign(pr.coords(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(pr.n());
    double s = 0.0;
    for (std::size_t i = 0; i < pr.n(); ++i) {
        const auto& law = laws[i];
        const double yi = pr.y(i);
        const double a = law.sample(rng), b = law.sample(rng);
        const double kab = kernel_eval(pr.ky(), a, b);
        const double kay = kernel_eval(pr.ky(), a, yi), kby = kernel_eval(pr.ky(), b, yi);
        const double d_eta = (kab - kay) * law.score_eta(a) + (kab - kby) * law.score_eta(b);
        const double d_aux =
            pr.aux_free() ? (kab - kay) * law.score_log_aux(a) + (kab - kby) * law.score_log_aux(b) : 0.0;
        pr.accumulate(grad, i, inv_n * d_eta, inv_n * d_aux);
        s += kab - kay - kby + pr.ky().at_zero();
    }
    return s * inv_n;
}

// Term t_ij = E k(Y_i, Y_j') - 2 E k(Y_i, y_j) + k(y_i, y_j) of the O(n^2) criterion.
double hat_term_closed(const Prepared& pr, const std::vector<ConditionalLaw>& laws, std::size_t i, std::size_t j,
                       double weight, std::vector<double>* grad)
{
    const auto pair = pair_expectation(laws[i], laws[j], pr.ky());
    const auto point = point_expectation(laws[i], pr.y(j), pr.ky());
    if (grad) {
        pr.accumulate(*grad, i, weight * (pair.d_eta_a - 2.0 * point.d_eta),
                      weight * (pair.d_log_aux - 2.0 * point.d_log_aux));
        pr.accumulate(*grad, j, weight * pair.d_eta_b, 0.0);
    }
    return pair.value - 2.0 * point.value + kernel_eval(pr.ky(), pr.y(i), pr.y(j));
}

double hat_term_mc(const Prepared& pr, const std::vector<ConditionalLaw>& laws, std::size_t i, std::size_t j,
                   double weight, std::vector<double>& grad, Rng& rng)
{
    const double a = laws[i].sample(rng), b = laws[j].sample(rng);
    const double kab = kernel_eval(pr.ky(), a, b);
    const double kay = kernel_eval(pr.ky(), a, pr.y(j));
    const double w_a = kab - 2.0 * kay;
    pr.accumulate(grad, i, weight * w_a * laws[i].score_eta(a), pr.aux_free() ? weight * w_a * laws[i].score_log_aux(a) : 0.0);
    pr.accumulate(grad, j, weight * kab * laws[j].score_eta(b), pr.aux_free() ? weight * kab * laws[j].score_log_aux(b) : 0.0);
    return kab - 2.0 * kay + kernel_eval(pr.ky(), pr.y(i), pr.y(j));
}

double hat_value(const Prepared& pr, std::span<const double> theta, std::uint64_t seed)
{
    const auto laws = pr.laws(theta);
    const std::size_t n = pr.n();
    double s = 0.0;
    if (pr.closed()) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double w = pr.kx(i, j);
                if (w != 0.0) s += w * hat_term_closed(pr, laws, i, j, 0.0, nullptr);
            }
    } else {
        // shared draws per observation; the diagonal pairs draw t with draw t + 1
        std::vector<std::vector<double>> draws(n);
        for (std::size_t i = 0; i < n; ++i) {
            Rng rng = datum_rng(seed, i);
            draws[i].resize(kHatMcDraws);
            for (double& v : draws[i]) v = laws[i].sample(rng);
        }
        const auto& ky = pr.ky();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double w = pr.kx(i, j);
                if (w == 0.0) continue;
                double e_pair = 0.0, e_point = 0.0;
                for (std::size_t t = 0; t < kHatMcDraws; ++t) {
                    const std::size_t u = i == j ? (t + 1) % kHatMcDraws : t;
                    e_pair += kernel_eval(ky, draws[i][t], draws[j][u]);
                    e_point += kernel_eval(ky, draws[i][t], pr.y(j));
                }
                const double m = static_cast<double>(kHatMcDraws);
                s += w * (e_pair / m - 2.0 * e_point / m + kernel_eval(ky, pr.y(i), pr.y(j)));
            }
    }
    return s / static_cast<double>(n * n);
}

double hat_value_grad(const Prepared& pr, std::span<const double> theta, std::vector<double>* grad)
{
    const auto laws = pr.laws(theta);
    const std::size_t n = pr.n();
    const double inv = 1.0 / static_cast<double>(n * n);
    if (grad) grad->assign(pr.coords(), 0.0);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double w = pr.kx(i, j);
            if (w != 0.0) s += w * hat_term_closed(pr, laws, i, j, w * inv, grad);
        }
    return s * inv;
}

// Stratified estimate: half the batch on the diagonal i = j, half on uniform pairs i != j.
double hat_stochastic(const Prepared& pr, std::span<const double> theta, std::size_t batch,
                      std::vector<double>& grad, Rng& rng)
{
    const auto laws = pr.laws(theta);
    const std::size_t n = pr.n();
    grad.assign(pr.coords(), 0.0);
    const std::size_t n_diag = n > 1 ? std::max<std::size_t>(1, batch / 2) : batch;
    const std::size_t n_off = n > 1 ? std::max<std::size_t>(1, batch - n_diag) : 0;
    const double nn = static_cast<double>(n) * static_cast<double>(n);
    const double w_diag = static_cast<double>(n) / nn / static_cast<double>(n_diag);
    const double w_off = n_off ? static_cast<double>(n) * static_cast<double>(n - 1) / nn / static_cast<double>(n_off) : 0.0;

    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    double s = 0.0;
    auto term = [&](std::size_t i, std::size_t j, double w) {
        const double kxij = pr.kx(i, j);
        if (kxij == 0.0) return;
        const double weight = w * kxij;
        s += weight * (pr.closed() ? hat_term_closed(pr, laws, i, j, weight, &grad)
                                   : hat_term_mc(pr, laws, i, j, weight, grad, rng));
    };
    for (std::size_t b = 0; b < n_diag; ++b) {
        const std::size_t i = pick(rng);
        term(i, i, w_diag);
    }
    if (n_off) {
        std::uniform_int_distribution<std::size_t> other(0, n - 2);
        for (std::size_t b = 0; b < n_off; ++b) {
            const std::size_t i = pick(rng);
            std::size_t j = other(rng);
            if (j >= i) ++j;
            term(i, j, w_off);
        }
    }
    return s;
}

double link_of_center(RegressionModelId id, std::span<const double> y)
{
    const std::vector<double> v(y.begin(), y.end());
    const double med = median(v);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    switch (conditional_law(id, 0.0, 1.0).family) {
    case LawFamily::Normal: return med;
    case LawFamily::Exponential:
    case LawFamily::Gamma:
    case LawFamily::Poisson: return std::log(med > 0.0 ? med : std::max(mean, 0.1));
    case LawFamily::Beta: return logit(std::clamp(med, 0.01, 0.99));
    case LawFamily::Bernoulli: return logit(std::clamp(mean, 0.01, 0.99));
    }
    return 0.0;
}

} // namespace

std::string_view to_string(EstimatorKind k)
{
    return k == EstimatorKind::ThetaTilde ? "theta tilde" : "theta hat";
}

double auto_bdwth_y(std::span<const double> y)
{
    return median_heuristic(Sample::scalars({y.begin(), y.end()})) / std::numbers::sqrt2;
}

KernelFamily default_kernel_y(RegressionModelId id)
{
    return conditional_law(id, 0.0, 1.0).family == LawFamily::Normal ? KernelFamily::Gaussian : KernelFamily::Laplace;
}

bool adds_intercept(const RegressionProblem& p) { return p.intercept && !constant_column(p.x); }

std::size_t coefficient_count(const RegressionProblem& p) { return p.x.dim() + (adds_intercept(p) ? 1 : 0); }

std::size_t coordinate_count(const RegressionProblem& p)
{
    return coefficient_count(p) + (p.model.aux_is_free() ? 1 : 0);
}

double objective_tilde(const RegressionProblem& p, std::span<const double> theta, TildeObjective kind,
                       std::uint64_t seed)
{
    return tilde_value(Prepared(p), theta, kind, seed);
}

double objective_hat2(const RegressionProblem& p, std::span<const double> theta, std::size_t max_n,
                      std::uint64_t seed)
{
    const Prepared pr(p);
    require_hat(pr, max_n);
    return hat_value(pr, theta, seed);
}

double objective_hat(const RegressionProblem& p, std::span<const double> theta, std::size_t max_n,
                     std::uint64_t seed)
{
    return std::sqrt(std::max(objective_hat2(p, theta, max_n, seed), 0.0));
}

std::vector<double> grad_tilde(const RegressionProblem& p, std::span<const double> theta, TildeObjective kind)
{
    const Prepared pr(p);
    require_closed(pr);
    std::vector<double> g;
    tilde_value_grad(pr, theta, kind, &g);
    return g;
}

std::vector<double> grad_hat_stochastic(const RegressionProblem& p, std::span<const double> theta,
                                        std::size_t batch, std::uint64_t seed)
{
    const Prepared pr(p);
    require_hat(pr, std::numeric_limits<std::size_t>::max());
    if (batch < 1) throw ConfigError("batch must be at least 1");
    Rng rng(seed);
    std::vector<double> g;
    hat_stochastic(pr, theta, batch, g, rng);
    return g;
}

std::vector<double> grad_hat_exact(const RegressionProblem& p, std::span<const double> theta)
{
    const Prepared pr(p);
    require_hat(pr, std::numeric_limits<std::size_t>::max());
    require_closed(pr);
    std::vector<double> g;
    hat_value_grad(pr, theta, &g);
    return g;
}

std::vector<double> default_regression_start(const RegressionProblem& p)
{
    const Prepared pr(p);
    std::vector<double> theta(pr.coords(), 0.0);
    const double center = link_of_center(p.model.id, p.y);
    if (pr.adds_intercept()) {
        theta[0] = center;
    } else if (p.intercept) {
        const std::size_t c = *constant_column(p.x);
        theta[c] = center / p.x[0][c];
    }
    if (pr.aux_free()) {
        double aux = 1.0;
        if (p.model.par2.status == ParamStatus::FreeUserInit) {
            aux = p.model.par2.value[0];
        } else if (aux_kind(p.model.id) == AuxKind::NoiseStd) {
            const double mad = mad_scale(p.y);
            aux = mad > 0.0 ? mad : 1.0;
        }
        theta[pr.k()] = std::log(aux);
    }
    return theta;
}

RegFitResult fit_regression(const RegressionProblem& p, const OptimizerConfig& cfg)
{
    cfg.validate();
    const Prepared pr(p);
    const bool hat = p.bdwth_x > 0.0;
    if (hat) require_hat(pr, cfg.hat_max_n);

    std::vector<double> theta0 = default_regression_start(p);
    if (p.model.par1.status == ParamStatus::FreeUserInit) {
        if (p.model.par1.value.size() != pr.k())
            throw ConfigError("par1 must have " + std::to_string(pr.k()) + " entries (one per coefficient" +
                              std::string(pr.adds_intercept() ? ", intercept first" : "") + ")");
        std::copy(p.model.par1.value.begin(), p.model.par1.value.end(), theta0.begin());
    }

    Method method = cfg.method;
    const std::string who = "model " + std::string(to_string(p.model.id)) + " with the " +
                            std::string(to_string(p.kernel_y.family())) + " response kernel";
    if (method == Method::Exact) throw CapabilityError("method exact is not available for regression");
    if (method == Method::Auto) method = (!hat && pr.closed()) ? Method::GD : Method::SGD;
    if (method == Method::GD && !pr.closed()) throw CapabilityError("method GD is not available for " + who);
    if (method == Method::SGD && !hat && cfg.tilde_objective == TildeObjective::Root)
        throw CapabilityError("the root criterion has no unbiased stochastic gradient; use the squared criterion");

    RegFitResult r;
    r.model = p.model.id;
    r.estimator = hat ? EstimatorKind::ThetaHat : EstimatorKind::ThetaTilde;
    r.method_used = method;
    r.intercept_added = pr.adds_intercept();
    r.kernel_y = p.kernel_y;
    r.kernel_x = p.kernel_x;
    r.bdwth_x = p.bdwth_x;
    r.aux_fixed = aux_role(p.model.id) == SlotRole::Fixed;

    bool hit_maxit = false;
    if (method == Method::GD) {
        GdOptions opts;
        opts.maxit = cfg.maxit;
        opts.tol = cfg.tol;
        opts.window = cfg.window;
        opts.initial_step = cfg.step0;
        opts.fixed_step = cfg.fixed_step;
        SmoothObjective f;
        if (hat)
            f = [&pr](std::span<const double> t, std::vector<double>* g) { return hat_value_grad(pr, t, g); };
        else
            f = [&pr, kind = cfg.tilde_objective](std::span<const double> t, std::vector<double>* g) {
                return tilde_value_grad(pr, t, kind, g);
            };
        auto gd = gradient_descent(f, theta0, opts);
        r.theta = std::move(gd.theta);
        r.trace = std::move(gd.trace);
        r.iterations = gd.iterations;
        r.objective = gd.objective;
        hit_maxit = gd.hit_maxit;
    } else {
        AdagradOptions opts;
        opts.maxit = cfg.maxit;
        opts.step0 = cfg.step0;
        opts.eps = cfg.adagrad_eps;
        opts.burnin = cfg.burnin;
        opts.window_stop = true;
        opts.tol = cfg.tol;
        opts.window = cfg.window;
        opts.seed = cfg.seed;
        StochasticObjective f;
        if (hat)
            f = [&pr, batch = cfg.hat_batch](std::span<const double> t, std::vector<double>& g, Rng& rng) {
                return hat_stochastic(pr, t, batch, g, rng);
            };
        else
            f = [&pr](std::span<const double> t, std::vector<double>& g, Rng& rng) {
                return tilde_stochastic(pr, t, g, rng);
            };
        auto sgd = adagrad(f, theta0, opts);
        r.theta = std::move(sgd.theta);
        r.trace = std::move(sgd.trace);
        r.iterations = sgd.iterations;
        hit_maxit = sgd.hit_maxit;
        r.objective = hat ? hat_value(pr, r.theta, cfg.seed) : tilde_value(pr, r.theta, cfg.tilde_objective, cfg.seed);
    }

    if (hit_maxit) r.warnings.emplace_back(kMaxitWarning);
    if (pr.saturated())
        r.warnings.emplace_back("linear predictor exceeded the exp-link cap of 700 and was saturated");

    r.coefficients.assign(r.theta.begin(), r.theta.begin() + static_cast<std::ptrdiff_t>(pr.k()));
    r.initial_coefficients.assign(theta0.begin(), theta0.begin() + static_cast<std::ptrdiff_t>(pr.k()));
    if (pr.aux_free()) {
        r.aux = std::exp(r.theta[pr.k()]);
        r.initial_aux = std::exp(theta0[pr.k()]);
    } else if (r.aux_fixed) {
        r.aux = p.model.par2.value[0];
    }
    return r;
}

} // namespace mmdfit
