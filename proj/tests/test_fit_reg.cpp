#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "suites.hpp"

#include "mmdfit/error.hpp"
#include "mmdfit/fit_reg.hpp"

#include <algorithm>

using namespace mmdfit;

namespace {

struct Synthetic {
    std::vector<double> y;
    std::vector<std::vector<double>> x;
};

/// Design with an intercept-free covariate block; responses from the model at beta (intercept first).
Synthetic simulate(RegressionModelId id, const std::vector<double>& beta, double aux, std::size_t n,
                   std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Synthetic s;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row(beta.size() - 1);
        for (double& v : row) v = z(rng);
        double eta = beta[0];
        for (std::size_t c = 0; c < row.size(); ++c) eta += beta[c + 1] * row[c];
        s.y.push_back(conditional_law(id, eta, aux).sample(rng));
        s.x.push_back(row);
    }
    return s;
}

RegressionProblem problem(RegressionModelId id, const Synthetic& s, std::optional<double> par2 = std::nullopt)
{
    RegressionProblem p;
    p.y = s.y;
    p.x = Sample::from_rows(s.x);
    p.model = RegressionModelSpec::make(id, std::nullopt, par2);
    p.kernel_y = KernelSpec(default_kernel_y(id), auto_bdwth_y(s.y));
    return p;
}

std::vector<std::vector<double>> with_ones(const std::vector<std::vector<double>>& x)
{
    std::vector<std::vector<double>> out;
    for (const auto& r : x) {
        std::vector<double> row{1.0};
        row.insert(row.end(), r.begin(), r.end());
        out.push_back(row);
    }
    return out;
}

} // namespace

TEST_CASE("identifiers and auxiliary parameters")
{
    CHECK(all_regression_model_ids().size() == 9);
    for (auto id : all_regression_model_ids()) CHECK(parse_regression_model_id(to_string(id)) == id);
    CHECK_THROWS_AS(parse_regression_model_id("probit"), ConfigError);
    CHECK(aux_label(RegressionModelId::LinearGaussian) == "Std. dev. of Gaussian noise");
    CHECK(aux_label(RegressionModelId::Gamma) == "Precision parameter");
    CHECK_THROWS_AS(RegressionModelSpec::make(RegressionModelId::GammaLoc), ConfigError);
    CHECK_THROWS_AS(RegressionModelSpec::make(RegressionModelId::Poisson, std::nullopt, 2.0), ConfigError);
    CHECK_THROWS_AS(RegressionModelSpec::make(RegressionModelId::LinearGaussianLoc, std::nullopt, -1.0), ConfigError);
}

TEST_CASE("conditional laws: moments, densities and scores")
{
    namespace bm = boost::math;
    Rng rng(3);
    const double eta = 0.4, aux = 2.5;
    struct Case {
        RegressionModelId id;
        double mean;
    };
    const double e = std::exp(eta), sig = 1.0 / (1.0 + std::exp(-eta));
    for (const Case c : {Case{RegressionModelId::LinearGaussian, eta}, Case{RegressionModelId::Exponential, e},
                         Case{RegressionModelId::Gamma, e}, Case{RegressionModelId::Beta, sig},
                         Case{RegressionModelId::Logistic, sig}, Case{RegressionModelId::Poisson, e}}) {
        CAPTURE(to_string(c.id));
        const auto law = conditional_law(c.id, eta, aux);
        double s = 0.0, s2 = 0.0;
        const int m = 100000;
        bool supported = true;
        for (int i = 0; i < m; ++i) {
            const double v = law.sample(rng);
            supported = supported && law.in_support(v);
            s += v;
            s2 += v * v;
        }
        CHECK(supported);
        const double mean = s / m, sd = std::sqrt(s2 / m - mean * mean);
        CHECK(std::abs(mean - c.mean) < 5.0 * sd / std::sqrt(double(m)));

        const double y = c.id == RegressionModelId::Logistic ? 1.0
                         : c.id == RegressionModelId::Beta   ? 0.3
                         : c.id == RegressionModelId::Poisson ? 2.0
                                                              : 1.7;
        const double h = 1e-6;
        const double fd_eta =
            (conditional_law(c.id, eta + h, aux).log_pdf(y) - conditional_law(c.id, eta - h, aux).log_pdf(y)) / (2 * h);
        CHECK(law.score_eta(y) == doctest::Approx(fd_eta).epsilon(1e-6));
        const double fd_aux = (conditional_law(c.id, eta, aux * std::exp(h)).log_pdf(y) -
                               conditional_law(c.id, eta, aux * std::exp(-h)).log_pdf(y)) /
                              (2 * h);
        CHECK(law.score_log_aux(y) == doctest::Approx(fd_aux).epsilon(1e-6).scale(1e-9));
    }
    CHECK(conditional_law(RegressionModelId::Gamma, eta, aux).log_pdf(1.7) ==
          doctest::Approx(std::log(bm::pdf(bm::gamma_distribution<>(aux, e / aux), 1.7))));
    CHECK(conditional_law(RegressionModelId::Beta, eta, aux).log_pdf(0.3) ==
          doctest::Approx(std::log(bm::pdf(bm::beta_distribution<>(sig * aux, (1 - sig) * aux), 0.3))));
    CHECK(conditional_law(RegressionModelId::Poisson, eta, aux).log_pdf(2.0) ==
          doctest::Approx(std::log(bm::pdf(bm::poisson(e), 2.0))));
    const auto capped = conditional_law(RegressionModelId::Poisson, 900.0, 1.0);
    CHECK(capped.capped);
    CHECK(std::isfinite(capped.mean));
}

TEST_CASE("pair and point expectations")
{
    for (auto kf : {KernelFamily::Gaussian, KernelFamily::Laplace}) {
        const KernelSpec spec(kf, 0.8);
        const auto a = conditional_law(RegressionModelId::LinearGaussian, 0.3, 0.7);
        const auto b = conditional_law(RegressionModelId::LinearGaussian, -0.5, 0.7);
        REQUIRE(has_closed_form(a.family, kf));
        // Y - Y' ~ N(0.8, 2 * 0.49) and Y - y ~ N(0.3 - y, 0.49).
        oracle::Law1d diff = oracle::continuous_law(boost::math::normal(0.8, std::sqrt(0.98)), -INFINITY, INFINITY);
        CHECK(pair_expectation(a, b, spec).value ==
              doctest::Approx(oracle::mean_kernel_at(diff, kf, 0.8, 0.0)).epsilon(1e-10));
        oracle::Law1d one = oracle::continuous_law(boost::math::normal(0.3, 0.7), -INFINITY, INFINITY);
        CHECK(point_expectation(a, 1.1, spec).value ==
              doctest::Approx(oracle::mean_kernel_at(one, kf, 0.8, 1.1)).epsilon(1e-10));

        const double h = 1e-6;
        auto law = [](double eta, double la) {
            return conditional_law(RegressionModelId::LinearGaussian, eta, std::exp(la));
        };
        const double la = std::log(0.7);
        const auto pe = pair_expectation(law(0.3, la), law(-0.5, la), spec);
        CHECK(pe.d_eta_a == doctest::Approx((pair_expectation(law(0.3 + h, la), law(-0.5, la), spec).value -
                                             pair_expectation(law(0.3 - h, la), law(-0.5, la), spec).value) /
                                            (2 * h))
                                .epsilon(1e-6));
        CHECK(pe.d_eta_b == doctest::Approx((pair_expectation(law(0.3, la), law(-0.5 + h, la), spec).value -
                                             pair_expectation(law(0.3, la), law(-0.5 - h, la), spec).value) /
                                            (2 * h))
                                .epsilon(1e-6));
        CHECK(pe.d_log_aux == doctest::Approx((pair_expectation(law(0.3, la + h), law(-0.5, la + h), spec).value -
                                               pair_expectation(law(0.3, la - h), law(-0.5, la - h), spec).value) /
                                              (2 * h))
                                  .epsilon(1e-6));
        const auto pt = point_expectation(law(0.3, la), 1.1, spec);
        CHECK(pt.d_eta == doctest::Approx((point_expectation(law(0.3 + h, la), 1.1, spec).value -
                                           point_expectation(law(0.3 - h, la), 1.1, spec).value) /
                                          (2 * h))
                              .epsilon(1e-6));
    }
    for (auto kf : {KernelFamily::Gaussian, KernelFamily::Laplace, KernelFamily::Cauchy}) {
        const KernelSpec spec(kf, 1.3);
        const auto a = conditional_law(RegressionModelId::Logistic, 0.2, 1.0);
        const auto b = conditional_law(RegressionModelId::Logistic, -1.0, 1.0);
        const double pa = a.mean, pb = b.mean;
        const double k0 = spec.at_zero(), k1 = spec.of_distance(1.0);
        const double ref = (pa * pb + (1 - pa) * (1 - pb)) * k0 + (pa * (1 - pb) + (1 - pa) * pb) * k1;
        CHECK(pair_expectation(a, b, spec).value == doctest::Approx(ref).epsilon(1e-14));
        CHECK(point_expectation(a, 1.0, spec).value == doctest::Approx(pa * k0 + (1 - pa) * k1).epsilon(1e-14));
    }
    CHECK_FALSE(has_closed_form(LawFamily::Normal, KernelFamily::Cauchy));
    CHECK_FALSE(has_closed_form(LawFamily::Poisson, KernelFamily::Gaussian));
}

TEST_CASE("automatic response bandwidth")
{
    const std::vector<double> y{1.0, 4.0, 2.0, 8.0};
    // Pairwise distances 3, 1, 7, 2, 4, 6: median 3.5.
    CHECK(auto_bdwth_y(y) == doctest::Approx(3.5 / std::sqrt(2.0)));
    CHECK(default_kernel_y(RegressionModelId::LinearGaussian) == KernelFamily::Gaussian);
    CHECK(default_kernel_y(RegressionModelId::Poisson) == KernelFamily::Laplace);
}

TEST_CASE("theta hat criterion against explicit loops (n <= 5)")
{
    Rng rng(5);
    for (std::size_t n : {2u, 3u, 5u}) {
        const auto lin = simulate(RegressionModelId::LinearGaussian, {0.5, 1.0, -0.7}, 0.6, n, 10 + n);
        auto p = problem(RegressionModelId::LinearGaussian, lin);
        p.kernel_y = KernelSpec(KernelFamily::Gaussian, 0.9);
        p.bdwth_x = 0.7;
        const std::vector<double> beta{0.3, 0.8, -0.2};
        const double sigma = 0.8;
        std::vector<double> theta = beta;
        theta.push_back(std::log(sigma));
        const double ref =
            suites::hat2_linear_gaussian_reference(lin.y, with_ones(lin.x), beta, sigma, 0.9, KernelFamily::Laplace, 0.7);
        CHECK(objective_hat2(p, theta) == doctest::Approx(ref).epsilon(1e-10));

        const auto logi = simulate(RegressionModelId::Logistic, {0.2, -1.0, 0.5}, 1.0, n, 20 + n);
        auto q = problem(RegressionModelId::Logistic, logi);
        for (auto kf : {KernelFamily::Gaussian, KernelFamily::Cauchy}) {
            q.kernel_y = KernelSpec(kf, 1.1);
            q.kernel_x = KernelFamily::Gaussian;
            q.bdwth_x = 1.5;
            const double r2 = suites::hat2_logistic_reference(logi.y, with_ones(logi.x), {0.1, -0.4, 0.9}, q.kernel_y,
                                                              KernelFamily::Gaussian, 1.5);
            CHECK(objective_hat2(q, std::vector<double>{0.1, -0.4, 0.9}) == doctest::Approx(r2).epsilon(1e-10));
        }
    }
}

TEST_CASE("theta tilde criterion")
{
    const auto s = simulate(RegressionModelId::LinearGaussian, {1.0, 2.0}, 0.5, 30, 4);
    auto p = problem(RegressionModelId::LinearGaussian, s);
    const std::vector<double> theta{0.9, 1.8, std::log(0.6)};
    // Per observation: E k(Y, Y') - 2 E k(Y, y_i) + 1 with Y ~ N(mu_i, 0.36).
    const double g = p.kernel_y.bandwidth();
    auto gm = [&](double m, double v) { return g / std::sqrt(g * g + 2 * v) * std::exp(-m * m / (g * g + 2 * v)); };
    double ref = 0.0;
    for (std::size_t i = 0; i < s.y.size(); ++i) {
        const double mu = 0.9 + 1.8 * s.x[i][0];
        ref += gm(0.0, 2 * 0.36) - 2 * gm(mu - s.y[i], 0.36) + 1.0;
    }
    ref /= static_cast<double>(s.y.size());
    CHECK(objective_tilde(p, theta) == doctest::Approx(ref).epsilon(1e-12));
    CHECK(objective_tilde(p, theta, TildeObjective::Root) < std::sqrt(ref) + 1e-9);

    // Without closed forms the terms are estimated from model draws.
    const auto ps = simulate(RegressionModelId::Poisson, {1.0, 0.5}, 1.0, 10, 6);
    auto pp = problem(RegressionModelId::Poisson, ps);
    const std::vector<double> pt{0.8, 0.4};
    double pref = 0.0;
    for (std::size_t i = 0; i < ps.y.size(); ++i) {
        const double lambda = std::exp(0.8 + 0.4 * ps.x[i][0]);
        const auto law = oracle::discrete_law(boost::math::poisson(lambda), 0.0);
        double kk = 0.0;
        for (std::size_t a = 0; a < law.atoms.size(); ++a)
            kk += law.masses[a] * oracle::mean_kernel_at(law, pp.kernel_y.family(), pp.kernel_y.bandwidth(), law.atoms[a]);
        pref += kk - 2 * oracle::mean_kernel_at(law, pp.kernel_y.family(), pp.kernel_y.bandwidth(), ps.y[i]) + 1.0;
    }
    pref /= static_cast<double>(ps.y.size());
    CHECK(objective_tilde(pp, pt) == doctest::Approx(pref).epsilon(0.05));
}

TEST_CASE("exact regression gradients match finite differences")
{
    for (auto id : {RegressionModelId::LinearGaussian, RegressionModelId::Logistic, RegressionModelId::LinearGaussianLoc}) {
        CAPTURE(to_string(id));
        const std::optional<double> aux =
            id == RegressionModelId::LinearGaussianLoc ? std::optional<double>(0.5) : std::nullopt;
        const auto s = simulate(id, {0.3, 1.0, -0.5}, 0.5, 12, 9);
        auto p = problem(id, s, aux);
        std::vector<double> theta{0.2, 0.7, -0.3};
        if (p.model.aux_is_free()) theta.push_back(std::log(0.7));
        for (auto kind : {TildeObjective::Squared, TildeObjective::Root}) {
            const auto g = grad_tilde(p, theta, kind);
            const auto fd = oracle::central_difference(
                [&](std::span<const double> t) { return objective_tilde(p, t, kind); }, theta, 1e-6);
            for (std::size_t k = 0; k < g.size(); ++k) CHECK(g[k] == doctest::Approx(fd[k]).epsilon(1e-6).scale(1e-8));
        }
        p.bdwth_x = 0.9;
        const auto gh = grad_hat_exact(p, theta);
        const auto fdh = oracle::central_difference([&](std::span<const double> t) { return objective_hat2(p, t); },
                                                    theta, 1e-6);
        for (std::size_t k = 0; k < gh.size(); ++k) CHECK(gh[k] == doctest::Approx(fdh[k]).epsilon(1e-6).scale(1e-8));
    }
    const auto s = simulate(RegressionModelId::Poisson, {0.3, 0.2}, 1.0, 10, 2);
    CHECK_THROWS_AS(grad_tilde(problem(RegressionModelId::Poisson, s), std::vector<double>{0.1, 0.1}), CapabilityError);
}

TEST_CASE("stratified theta hat gradient is unbiased")
{
    for (auto id : {RegressionModelId::LinearGaussian, RegressionModelId::Logistic}) {
        CAPTURE(to_string(id));
        const auto s = simulate(id, {0.3, 1.0, -0.5}, 0.5, 15, 19);
        auto p = problem(id, s);
        p.bdwth_x = 1.2;
        std::vector<double> theta{0.2, 0.7, -0.3};
        if (p.model.aux_is_free()) theta.push_back(std::log(0.7));
        const auto exact = grad_hat_exact(p, theta);
        const int reps = 20000;
        std::vector<double> sum(exact.size(), 0.0), sum2(exact.size(), 0.0);
        for (int r = 0; r < reps; ++r) {
            const auto g = grad_hat_stochastic(p, theta, 8, 1000 + r);
            for (std::size_t k = 0; k < g.size(); ++k) {
                sum[k] += g[k];
                sum2[k] += g[k] * g[k];
            }
        }
        for (std::size_t k = 0; k < exact.size(); ++k) {
            const double mean = sum[k] / reps;
            const double se = std::sqrt((sum2[k] / reps - mean * mean) / reps);
            CHECK(std::abs(mean - exact[k]) <= 4.0 * se + 1e-12);
        }
    }
}

TEST_CASE("fits recover coefficients")
{
    const auto s = simulate(RegressionModelId::LinearGaussian, {1.0, 2.0, -1.0}, 0.5, 300, 1);
    const auto r = fit_regression(problem(RegressionModelId::LinearGaussian, s));
    CHECK(r.method_used == Method::GD);
    CHECK(r.estimator == EstimatorKind::ThetaTilde);
    CHECK(r.intercept_added);
    REQUIRE(r.coefficients.size() == 3);
    CHECK(r.coefficients[0] == doctest::Approx(1.0).epsilon(0.1));
    CHECK(r.coefficients[1] == doctest::Approx(2.0).epsilon(0.1));
    CHECK(r.coefficients[2] == doctest::Approx(-1.0).epsilon(0.1));
    REQUIRE(r.aux.has_value());
    CHECK(*r.aux == doctest::Approx(0.5).epsilon(0.2));

    const auto l = simulate(RegressionModelId::Logistic, {-0.5, 1.5}, 1.0, 600, 2);
    const auto rl = fit_regression(problem(RegressionModelId::Logistic, l));
    CHECK(rl.method_used == Method::GD);
    CHECK(rl.coefficients[0] == doctest::Approx(-0.5).epsilon(0.5));
    CHECK(rl.coefficients[1] == doctest::Approx(1.5).epsilon(0.35));
    CHECK_FALSE(rl.aux.has_value());

    OptimizerConfig cfg;
    cfg.maxit = 5000;
    const auto ps = simulate(RegressionModelId::Poisson, {1.0, 0.5}, 1.0, 200, 3);
    const auto rp = fit_regression(problem(RegressionModelId::Poisson, ps), cfg);
    CHECK(rp.method_used == Method::SGD);
    CHECK(rp.coefficients[0] == doctest::Approx(1.0).epsilon(0.15));
    CHECK(rp.coefficients[1] == doctest::Approx(0.5).epsilon(0.25));

    const auto gs = simulate(RegressionModelId::Gamma, {0.5, 0.3}, 4.0, 200, 4);
    const auto rg = fit_regression(problem(RegressionModelId::Gamma, gs), cfg);
    CHECK(rg.method_used == Method::SGD);
    CHECK(rg.coefficients[0] == doctest::Approx(0.5).epsilon(0.3));
    REQUIRE(rg.aux.has_value());
    CHECK(*rg.aux > 1.0);
}

TEST_CASE("theta hat fit agrees with theta tilde on clean data")
{
    const auto s = simulate(RegressionModelId::LinearGaussian, {1.0, 2.0}, 0.5, 150, 8);
    auto p = problem(RegressionModelId::LinearGaussian, s);
    const auto tilde = fit_regression(p);
    p.bdwth_x = auto_bdwth_x(p.x);
    OptimizerConfig cfg;
    cfg.maxit = 20000;
    const auto hat = fit_regression(p, cfg);
    CHECK(hat.estimator == EstimatorKind::ThetaHat);
    CHECK(hat.method_used == Method::SGD);
    for (std::size_t c = 0; c < 2; ++c) CHECK(std::abs(hat.coefficients[c] - tilde.coefficients[c]) < 0.1);
}

TEST_CASE("intercept handling and user-supplied starting values")
{
    auto s = simulate(RegressionModelId::LinearGaussian, {1.0, 2.0}, 0.5, 50, 5);
    for (auto& row : s.x) row.insert(row.begin(), 1.0);
    auto p = problem(RegressionModelId::LinearGaussian, s);
    CHECK_FALSE(adds_intercept(p));
    CHECK(coefficient_count(p) == 2);
    p.intercept = false;
    CHECK(coordinate_count(p) == 3);

    const auto s2 = simulate(RegressionModelId::LinearGaussian, {1.0, 2.0}, 0.5, 50, 5);
    auto q = problem(RegressionModelId::LinearGaussian, s2);
    q.model = RegressionModelSpec::make(RegressionModelId::LinearGaussian, std::vector<double>{0.0});
    CHECK_THROWS_AS(fit_regression(q), ConfigError);
    q.model = RegressionModelSpec::make(RegressionModelId::LinearGaussian, std::vector<double>{0.5, 1.5});
    const auto r = fit_regression(q);
    CHECK(r.initial_coefficients == std::vector<double>{0.5, 1.5});
    q.model = RegressionModelSpec::make(RegressionModelId::LinearGaussianLoc, std::nullopt, 0.5);
    const auto fixed = fit_regression(q);
    CHECK(fixed.aux_fixed);
    CHECK(*fixed.aux == 0.5);
}

TEST_CASE("configuration and data errors")
{
    const auto s = simulate(RegressionModelId::Poisson, {0.3, 0.2}, 1.0, 20, 2);
    auto p = problem(RegressionModelId::Poisson, s);
    OptimizerConfig cfg;
    cfg.method = Method::Exact;
    CHECK_THROWS_AS(fit_regression(p, cfg), CapabilityError);
    cfg.method = Method::GD;
    CHECK_THROWS_AS(fit_regression(p, cfg), CapabilityError);
    cfg = {};
    cfg.tilde_objective = TildeObjective::Root;
    CHECK_THROWS_AS(fit_regression(p, cfg), CapabilityError);

    p.y[0] = -1.0;
    CHECK_THROWS_AS(fit_regression(p), InputError);
    CHECK_THROWS_AS(check_response(RegressionModelId::Logistic, std::vector<double>{0.0, 0.5}), InputError);
    CHECK_THROWS_AS(check_response(RegressionModelId::Beta, std::vector<double>{0.2, 1.0}), InputError);

    auto q = problem(RegressionModelId::Poisson, s);
    q.bdwth_x = 1.0;
    cfg = {};
    cfg.hat_max_n = 10;
    CHECK_THROWS_AS(fit_regression(q, cfg), BudgetError);
    q.y.pop_back();
    CHECK_THROWS_AS(fit_regression(q), InputError);
}

TEST_CASE("saturated exp link is reported")
{
    auto s = simulate(RegressionModelId::Poisson, {0.3, 0.2}, 1.0, 20, 2);
    auto p = problem(RegressionModelId::Poisson, s);
    p.model = RegressionModelSpec::make(RegressionModelId::Poisson, std::vector<double>{0.0, 800.0});
    OptimizerConfig cfg;
    cfg.maxit = 10;
    const auto r = fit_regression(p, cfg);
    bool found = false;
    for (const auto& w : r.warnings) found = found || w.find("cap") != std::string::npos;
    CHECK(found);
}
