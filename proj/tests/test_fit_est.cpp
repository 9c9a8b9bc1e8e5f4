#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "suites.hpp"

#include "mmdfit/error.hpp"
#include "mmdfit/fit_est.hpp"
#include "mmdfit/optim.hpp"

using namespace mmdfit;

namespace {

Sample normal_sample(std::size_t n, double mu, double sd, std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<double> z(mu, sd);
    std::vector<double> v(n);
    for (double& x : v) x = z(rng);
    return Sample::scalars(v);
}

std::unique_ptr<Model> model(ModelId id, std::optional<std::vector<double>> p1 = std::nullopt,
                             std::optional<std::vector<double>> p2 = std::nullopt, std::size_t dim = 1)
{
    return make_model(ModelSpec::make(id, std::move(p1), std::move(p2)), dim);
}

} // namespace

TEST_CASE("gradient descent on a quadratic")
{
    const SmoothObjective f = [](std::span<const double> t, std::vector<double>* g) {
        if (g) *g = {2.0 * (t[0] - 1.0), 20.0 * (t[1] + 2.0)};
        return (t[0] - 1.0) * (t[0] - 1.0) + 10.0 * (t[1] + 2.0) * (t[1] + 2.0);
    };
    GdOptions opts;
    opts.tol = 1e-12;
    const auto r = gradient_descent(f, {5.0, 5.0}, opts);
    CHECK(r.theta[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.theta[1] == doctest::Approx(-2.0).epsilon(1e-6));
    CHECK_FALSE(r.hit_maxit);
    CHECK(r.trace.size() == r.iterations + 1);

    opts.frozen = {1};
    const auto frozen = gradient_descent(f, {5.0, 5.0}, opts);
    CHECK(frozen.theta[1] == 5.0);

    const SmoothObjective bad = [](std::span<const double>, std::vector<double>* g) {
        if (g) *g = {0.0};
        return std::nan("");
    };
    CHECK_THROWS_AS(gradient_descent(bad, {0.0}, opts), InitializationError);
}

TEST_CASE("AdaGrad with averaging on a noisy quadratic")
{
    const StochasticObjective f = [](std::span<const double> t, std::vector<double>& g, Rng& rng) {
        std::normal_distribution<double> noise(0.0, 1.0);
        g = {2.0 * (t[0] - 3.0) + noise(rng)};
        return (t[0] - 3.0) * (t[0] - 3.0);
    };
    AdagradOptions opts;
    opts.maxit = 20000;
    opts.step0 = 1.0;
    const auto r = adagrad(f, {0.0}, opts);
    CHECK(r.theta[0] == doctest::Approx(3.0).epsilon(0.02));
    CHECK(r.hit_maxit);
    const auto again = adagrad(f, {0.0}, opts);
    CHECK(again.theta == r.theta);
}

TEST_CASE("closed-form gradients match finite differences")
{
    for (const auto& o : suites::closed_form_gradient_checks(5)) {
        CAPTURE(o.label);
        CAPTURE(o.score);
        CHECK(o.ok);
    }
}

TEST_CASE("Monte-Carlo gradients are unbiased")
{
    for (const auto& o : suites::mc_gradient_checks(20'000, 50, 1)) {
        CAPTURE(o.label);
        CAPTURE(o.score);
        CHECK(o.ok);
    }
}

TEST_CASE("objective is a V-statistic: exact forms agree with the empirical MMD of a large sample")
{
    const auto m = model(ModelId::Gaussian);
    const Sample data = normal_sample(20, 0.3, 1.2, 4);
    const std::vector<double> theta = m->coords({{0.1}, {0.9}});
    const KernelSpec spec(KernelFamily::Gaussian, 1.0);
    const auto exact = objective_mmd2(*m, theta, data, spec);
    CHECK(exact.exact);
    const Sample big = sample(*m, theta, 4000, 5);
    CHECK(exact.value == doctest::Approx(mmd2_empirical(big, data, spec)).epsilon(0.05));
    const auto mc = objective_mmd2(*make_model(ModelSpec::make(ModelId::Cauchy), 1), std::vector<double>{0.0}, data,
                                   spec);
    CHECK_FALSE(mc.exact);
    CHECK(mc.value >= 0.0);
}

TEST_CASE("dispatch follows the ranking exact > GD > SGD for every model")
{
    for (ModelId id : all_model_ids()) {
        const auto m = make_model(oracle::test_spec(id), oracle::test_dim(id));
        for (auto k : {KernelFamily::Gaussian, KernelFamily::Laplace, KernelFamily::Cauchy}) {
            CAPTURE(to_string(id));
            CAPTURE(to_string(k));
            const KernelSpec spec(k, 1.0);
            const Method chosen = resolve_method(*m, spec, Method::Auto);
            CHECK(chosen == suites::expected_method(id, k));
            const Method first = exact_available(*m, spec) ? Method::Exact
                                 : gd_available(*m, spec)  ? Method::GD
                                                           : Method::SGD;
            CHECK(chosen == first);
            if (!exact_available(*m, spec)) CHECK_THROWS_AS(resolve_method(*m, spec, Method::Exact), CapabilityError);
        }
    }
}

TEST_CASE("forced methods")
{
    const Sample data = normal_sample(60, 1.0, 2.0, 12);
    const auto m = model(ModelId::Gaussian);
    const KernelSpec spec(KernelFamily::Gaussian, median_heuristic(data));
    OptimizerConfig cfg;
    cfg.method = Method::SGD;
    cfg.maxit = 3000;
    const auto sgd = fit(*m, data, spec, cfg);
    CHECK(sgd.method_used == Method::SGD);
    cfg.method = Method::GD;
    const auto gd = fit(*m, data, spec, cfg);
    CHECK(gd.method_used == Method::GD);
    CHECK(sgd.estimates.par1[0] == doctest::Approx(gd.estimates.par1[0]).epsilon(0.15));
    cfg.method = Method::Exact;
    CHECK_THROWS_AS(fit(*m, data, spec, cfg), CapabilityError);
    CHECK(parse_method("sgd") == Method::SGD);
    CHECK_THROWS_AS(parse_method("newton"), ConfigError);
}

TEST_CASE("Gaussian location estimate resists outliers")
{
    Sample clean = normal_sample(200, 2.0, 1.0, 3);
    std::vector<double> v = clean.values();
    for (int i = 0; i < 10; ++i) v[i] = 60.0;
    const Sample dirty = Sample::scalars(v);
    const auto m = model(ModelId::GaussianLoc, std::nullopt, std::vector<double>{1.0});
    const auto r = fit(*m, dirty, KernelSpec(KernelFamily::Gaussian, median_heuristic(dirty)));
    CHECK(r.method_used == Method::GD);
    CHECK(std::abs(r.estimates.par1[0] - 2.0) < 0.25);
    CHECK(r.estimates.par2 == std::vector<double>{1.0});
    double mean = 0.0;
    for (double x : v) mean += x / static_cast<double>(v.size());
    CHECK(mean > 4.0);
}

TEST_CASE("discrete uniform: exact fit agrees with a brute-force scan")
{
    const auto m = model(ModelId::DiscreteUniform);
    const KernelSpec g1(KernelFamily::Gaussian, 1.0);
    std::vector<double> small;
    for (int r = 0; r < 30; ++r)
        for (double v : {1.0, 2.0, 3.0}) small.push_back(v);
    const auto r = fit(*m, Sample::scalars(small), g1);
    CHECK(r.method_used == Method::Exact);
    CHECK(r.estimates.par1[0] == 3.0);
    CHECK(suites::brute_force_discrete_uniform(small, g1, 100) == 3);

    Rng rng(99);
    std::uniform_int_distribution<int> u(1, 10);
    int hits = 0;
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> x(200);
        for (double& v : x) v = u(rng);
        const Sample s = Sample::scalars(x);
        for (auto k : {KernelFamily::Gaussian, KernelFamily::Laplace}) {
            const KernelSpec spec(k, median_heuristic(s));
            const auto fit_r = fit_exact(*m, s, spec);
            CHECK(static_cast<long>(fit_r.estimates.par1[0]) == suites::brute_force_discrete_uniform(x, spec, 100));
            if (k == KernelFamily::Gaussian && fit_r.estimates.par1[0] == 10.0) ++hits;
        }
    }
    CHECK(hits >= 95);
}

TEST_CASE("binomial models")
{
    Rng rng(7);
    std::binomial_distribution<int> b(15, 0.35);
    std::vector<double> x(300);
    for (double& v : x) v = b(rng);
    const Sample s = Sample::scalars(x);
    const KernelSpec spec(KernelFamily::Gaussian, median_heuristic(s));

    const auto prob = model(ModelId::BinomialProb, std::vector<double>{15.0});
    const auto rp = fit(*prob, s, spec);
    CHECK(rp.method_used == Method::GD);
    CHECK(rp.estimates.par2[0] == doctest::Approx(0.35).epsilon(0.1));

    const auto size = model(ModelId::BinomialSize, std::nullopt, std::vector<double>{0.35});
    const auto rs = fit(*size, s, spec);
    CHECK(rs.method_used == Method::Exact);
    CHECK(std::abs(rs.estimates.par1[0] - 15.0) <= 1.0);

    const auto both = model(ModelId::Binomial);
    OptimizerConfig cfg;
    cfg.exact_window = 30;
    const auto rb = fit(*both, s, spec, cfg);
    CHECK(rb.method_used == Method::GD);
    const double n = rb.estimates.par1[0];
    CHECK(n == std::round(n));
    CHECK(n * rb.estimates.par2[0] == doctest::Approx(15 * 0.35).epsilon(0.1));
}

TEST_CASE("stochastic fits recover parameters")
{
    OptimizerConfig cfg;
    cfg.maxit = 4000;
    Rng rng(17);
    std::poisson_distribution<int> pois(4.0);
    std::vector<double> x(300);
    for (double& v : x) v = pois(rng);
    const Sample s = Sample::scalars(x);
    const auto pm = model(ModelId::Poisson);
    const auto r = fit(*pm, s, KernelSpec(KernelFamily::Gaussian, median_heuristic(s)), cfg);
    CHECK(r.method_used == Method::SGD);
    CHECK(r.estimates.par1[0] == doctest::Approx(4.0).epsilon(0.1));

    std::exponential_distribution<double> ex(2.0);
    for (double& v : x) v = ex(rng);
    const Sample se = Sample::scalars(x);
    const auto em = model(ModelId::Exponential);
    const auto re = fit(*em, se, KernelSpec(KernelFamily::Laplace, median_heuristic(se)), cfg);
    CHECK(re.estimates.par1[0] == doctest::Approx(2.0).epsilon(0.15));

    std::uniform_real_distribution<double> un(1.0, 4.0);
    for (double& v : x) v = un(rng);
    const Sample su = Sample::scalars(x);
    const auto um = model(ModelId::UniformLowerUpper);
    const auto ru = fit(*um, su, KernelSpec(KernelFamily::Gaussian, median_heuristic(su)), cfg);
    CHECK(ru.estimates.par1[0] == doctest::Approx(1.0).epsilon(0.1));
    CHECK(ru.estimates.par2[0] == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("multivariate fits")
{
    const auto m = model(ModelId::MultiGaussian, std::nullopt, std::nullopt, 2);
    const std::vector<double> truth = m->coords({{1.0, -1.0}, {1.0, 0.0, 0.5, 0.8}});
    const Sample s = sample(*m, truth, 400, 5);
    const auto r = fit(*m, s, KernelSpec(KernelFamily::Gaussian, median_heuristic(s)));
    CHECK(r.method_used == Method::GD);
    CHECK(r.estimates.par1[0] == doctest::Approx(1.0).epsilon(0.15));
    CHECK(r.estimates.par1[1] == doctest::Approx(-1.0).epsilon(0.15));

    const auto d = model(ModelId::MultiDirac, std::nullopt, std::nullopt, 2);
    const auto rd = fit(*d, s, KernelSpec(KernelFamily::Laplace, median_heuristic(s)));
    CHECK(rd.estimates.par1[0] == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("maximum iterations produce a warning, not an error")
{
    const Sample data = normal_sample(50, 0.0, 1.0, 1);
    const auto m = model(ModelId::Gaussian);
    OptimizerConfig cfg;
    cfg.maxit = 2;
    cfg.tol = 1e-15;
    const auto r = fit(*m, data, KernelSpec(KernelFamily::Gaussian, 1.0), cfg);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0] == kMaxitWarning);
}

TEST_CASE("fits are deterministic under a fixed seed")
{
    const Sample data = normal_sample(80, 0.0, 1.0, 2);
    const auto m = model(ModelId::Cauchy);
    OptimizerConfig cfg;
    cfg.maxit = 1000;
    cfg.seed = 42;
    const KernelSpec spec(KernelFamily::Gaussian, 1.0);
    const auto a = fit(*m, data, spec, cfg);
    const auto b = fit(*m, data, spec, cfg);
    CHECK(a.theta == b.theta);
    cfg.seed = 43;
    const auto c = fit(*m, data, spec, cfg);
    CHECK(c.theta != a.theta);
}

TEST_CASE("bad configurations are rejected")
{
    OptimizerConfig cfg;
    cfg.maxit = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.mc_samples = 3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    const auto m = model(ModelId::Poisson);
    CHECK_THROWS_AS(fit(*m, Sample::scalars({1.0, INFINITY}), KernelSpec(KernelFamily::Gaussian, 1.0)), InputError);
    const auto g = model(ModelId::Gaussian);
    CHECK_THROWS_AS(fit(*g, Sample(2, {1.0, 2.0}), KernelSpec(KernelFamily::Gaussian, 1.0)), InputError);
}
