#include "mmdfit/optim.hpp"

#include "mmdfit/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mmdfit {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b)
{
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

void zero_frozen(std::vector<double>& g, const std::vector<std::size_t>& frozen)
{
    for (std::size_t k : frozen)
        if (k < g.size()) g[k] = 0.0;
}

bool all_finite(const std::vector<double>& v)
{
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace

GdResult gradient_descent(const SmoothObjective& f, std::vector<double> theta0, const GdOptions& opts)
{
    GdResult out;
    std::vector<double> theta = std::move(theta0);
    const std::size_t p = theta.size();
    std::vector<double> grad(p);
    double fx = f(theta, &grad);
    if (!std::isfinite(fx) || !all_finite(grad))
        throw InitializationError("objective or gradient is not finite at the starting point");
    zero_frozen(grad, opts.frozen);
    out.trace.push_back({theta, fx});

    std::vector<double> trial(p), trial_grad(p), prev_theta, prev_grad;
    double step = opts.initial_step;

    for (std::size_t it = 1; it <= opts.maxit; ++it) {
        const double gg = dot(grad, grad);
        if (std::sqrt(gg) < opts.grad_tol) break;

        if (opts.fixed_step) {
            for (std::size_t k = 0; k < p; ++k) trial[k] = theta[k] - *opts.fixed_step * grad[k];
            fx = f(trial, &trial_grad);
        } else {
            if (!prev_grad.empty()) {
                // long Barzilai-Borwein step s's / s'y, guarded against curvature of the wrong sign
                double ss = 0.0, sy = 0.0;
                for (std::size_t k = 0; k < p; ++k) {
                    const double s = theta[k] - prev_theta[k];
                    const double y = grad[k] - prev_grad[k];
                    ss += s * s;
                    sy += s * y;
                }
                step = (sy > 0.0 && std::isfinite(ss / sy)) ? ss / sy : step * 2.0;
            }
            bool accepted = false;
            double ft = 0.0;
            for (int b = 0; b <= opts.max_backtracks; ++b) {
                for (std::size_t k = 0; k < p; ++k) trial[k] = theta[k] - step * grad[k];
                ft = f(trial, &trial_grad);
                if (std::isfinite(ft) && ft <= fx - opts.armijo_c * step * gg) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) {
                out.line_search_failed = true;
                break;
            }
            fx = ft;
        }
        zero_frozen(trial_grad, opts.frozen);
        prev_theta = theta;
        prev_grad = grad;
        theta = trial;
        grad = trial_grad;
        out.iterations = it;
        out.trace.push_back({theta, fx});

        if (it >= opts.window) {
            const double before = out.trace[it - opts.window].objective;
            if (before - fx <= opts.tol * std::abs(before)) break;
        }
        if (it == opts.maxit) out.hit_maxit = true;
    }
    out.theta = std::move(theta);
    out.objective = fx;
    return out;
}

AdagradResult adagrad(const StochasticObjective& f, std::vector<double> theta0, const AdagradOptions& opts)
{
    AdagradResult out;
    Rng rng(opts.seed);
    std::vector<double> theta = std::move(theta0);
    const std::size_t p = theta.size();
    std::vector<double> grad(p), accum(p, 0.0), sum(p, 0.0);
    const std::size_t burnin = opts.burnin > 0 ? opts.burnin : opts.maxit / 2;
    std::size_t averaged = 0;
    double window_sum = 0.0;
    std::optional<double> previous_window;

    for (std::size_t it = 1; it <= opts.maxit; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        const double fx = f(theta, grad, rng);
        if (it == 1 && (!std::isfinite(fx) || !all_finite(grad)))
            throw InitializationError("objective or gradient is not finite at the starting point");
        zero_frozen(grad, opts.frozen);
        out.trace.push_back({theta, fx});
        for (std::size_t k = 0; k < p; ++k) {
            if (!std::isfinite(grad[k])) continue;
            accum[k] += grad[k] * grad[k];
            theta[k] -= opts.step0 * grad[k] / std::sqrt(accum[k] + opts.eps);
        }
        out.iterations = it;
        if (it > burnin) {
            for (std::size_t k = 0; k < p; ++k) sum[k] += theta[k];
            ++averaged;
        }

        window_sum += fx;
        if (it % opts.window == 0) {
            const double mean = window_sum / static_cast<double>(opts.window);
            window_sum = 0.0;
            if (opts.window_stop && previous_window &&
                std::abs(*previous_window - mean) <= opts.tol * std::abs(*previous_window))
                break;
            previous_window = mean;
        }
        if (it == opts.maxit) out.hit_maxit = true;
    }

    if (averaged > 0) {
        for (double& v : sum) v /= static_cast<double>(averaged);
        out.theta = std::move(sum);
    } else {
        out.theta = std::move(theta);
    }
    return out;
}

} // namespace mmdfit
