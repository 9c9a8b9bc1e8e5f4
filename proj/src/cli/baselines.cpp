#include "mmdfit/cli/baselines.hpp"

#include "mmdfit/error.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace mmdfit::cli {

namespace {

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& x)
{
    if (x.empty()) throw InputError("design matrix has no rows");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(x[0].size()));
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x[i].size(); ++j) m(Eigen::Index(i), Eigen::Index(j)) = x[i][j];
    return m;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

} // namespace

std::vector<std::vector<double>> with_intercept(const std::vector<std::vector<double>>& x)
{
    std::vector<std::vector<double>> out;
    out.reserve(x.size());
    for (const auto& r : x) {
        std::vector<double> row{1.0};
        row.insert(row.end(), r.begin(), r.end());
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<double> ols(const std::vector<double>& y, const std::vector<std::vector<double>>& x)
{
    const Eigen::MatrixXd a = to_matrix(x);
    const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    return to_vector(a.colPivHouseholderQr().solve(b));
}

std::vector<double> poisson_glm(const std::vector<double>& y, const std::vector<std::vector<double>>& x, int max_iter,
                                double tol)
{
    const Eigen::MatrixXd a = to_matrix(x);
    const auto n = a.rows();
    const Eigen::VectorXd yy = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    // start from the saturated-ish working response log(y + 0.1)
    Eigen::VectorXd eta = (yy.array() + 0.1).log().matrix();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(a.cols());
    double deviance_old = INFINITY;
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::ArrayXd mu = eta.array().exp();
        const Eigen::VectorXd z = (eta.array() + (yy.array() - mu) / mu).matrix();
        const Eigen::VectorXd w = mu.sqrt().matrix();
        beta = (w.asDiagonal() * a).colPivHouseholderQr().solve((w.array() * z.array()).matrix());
        eta = a * beta;
        const Eigen::ArrayXd mu_new = eta.array().exp();
        double dev = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double yi = yy(i);
            dev += 2.0 * ((yi > 0.0 ? yi * std::log(yi / mu_new(i)) : 0.0) - (yi - mu_new(i)));
        }
        if (std::abs(dev - deviance_old) < tol * (std::abs(dev) + 0.1)) return to_vector(beta);
        deviance_old = dev;
    }
    throw InputError("Poisson GLM did not converge");
}

} // namespace mmdfit::cli
