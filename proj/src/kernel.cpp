#include "mmdfit/kernel.hpp"

#include "mmdfit/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mmdfit {

std::string_view to_string(KernelFamily family)
{
    switch (family) {
    case KernelFamily::Gaussian: return "Gaussian";
    case KernelFamily::Laplace: return "Laplace";
    case KernelFamily::Cauchy: return "Cauchy";
    }
    return "?";
}

KernelFamily parse_kernel_family(std::string_view name)
{
    if (name == "Gaussian") return KernelFamily::Gaussian;
    if (name == "Laplace") return KernelFamily::Laplace;
    if (name == "Cauchy") return KernelFamily::Cauchy;
    throw ConfigError("unknown kernel '" + std::string(name) +
                      "' (valid: Gaussian, Laplace, Cauchy)");
}

double kernel_profile(KernelFamily family, double u)
{
    switch (family) {
    case KernelFamily::Gaussian: return std::exp(-u * u);
    case KernelFamily::Laplace: return std::exp(-u);
    case KernelFamily::Cauchy: return 1.0 / (2.0 + u * u);
    }
    return 0.0;
}

double kernel_profile_derivative(KernelFamily family, double u)
{
    switch (family) {
    case KernelFamily::Gaussian: return -2.0 * u * std::exp(-u * u);
    case KernelFamily::Laplace: return -std::exp(-u);
    case KernelFamily::Cauchy: {
        const double d = 2.0 + u * u;
        return -2.0 * u / (d * d);
    }
    }
    return 0.0;
}

KernelSpec::KernelSpec(KernelFamily family, double bandwidth) : family_(family), bandwidth_(bandwidth)
{
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
        throw ConfigError("kernel bandwidth must be positive and finite");
}

Sample::Sample(std::size_t dim, std::vector<double> values) : dim_(dim), values_(std::move(values))
{
    if (dim_ == 0) throw InputError("sample dimension must be at least 1");
    if (values_.empty() || values_.size() % dim_ != 0)
        throw InputError("sample must contain at least one point of dimension " + std::to_string(dim_));
}

Sample Sample::from_rows(const std::vector<std::vector<double>>& rows)
{
    if (rows.empty()) throw InputError("sample must contain at least one point");
    const std::size_t d = rows.front().size();
    std::vector<double> flat;
    flat.reserve(rows.size() * d);
    for (const auto& r : rows) {
        if (r.size() != d) throw InputError("all points of a sample must share one dimension");
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return Sample(d, std::move(flat));
}

double euclidean_distance(std::span<const double> x, std::span<const double> y)
{
    if (x.size() == 1) return std::abs(x[0] - y[0]);
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - y[k];
        s += d * d;
    }
    return std::sqrt(s);
}

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
        throw InputError("kernel_eval: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()) + ")");
    return spec.of_distance(euclidean_distance(x, y));
}

double gram_mean(const Sample& a, const KernelSpec& spec)
{
    const std::size_t n = a.size();
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) off += spec.of_distance(euclidean_distance(a[i], a[j]));
    const double nn = static_cast<double>(n);
    return (nn * spec.at_zero() + 2.0 * off) / (nn * nn);
}

double cross_gram_mean(const Sample& a, const Sample& b, const KernelSpec& spec)
{
    if (a.dim() != b.dim()) throw InputError("samples have different dimensions");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) s += spec.of_distance(euclidean_distance(a[i], b[j]));
    return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

double mmd2_empirical(const Sample& a, const Sample& b, const KernelSpec& spec)
{
    if (a.dim() != b.dim()) throw InputError("mmd2_empirical: samples have different dimensions");
    return gram_mean(a, spec) - 2.0 * cross_gram_mean(a, b, spec) + gram_mean(b, spec);
}

namespace {

double median_of(std::vector<double>& v)
{
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

} // namespace

double median_heuristic(const Sample& s, std::uint64_t seed)
{
    const std::size_t n = s.size();
    if (n < 2) throw InputError("median heuristic needs at least two points");

    std::vector<double> dist;
    if (n <= kMedianExhaustiveLimit) {
        dist.reserve(n * (n - 1) / 2);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) dist.push_back(euclidean_distance(s[i], s[j]));
    } else {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        dist.reserve(kMedianSubsamplePairs);
        while (dist.size() < kMedianSubsamplePairs) {
            const std::size_t i = pick(rng);
            const std::size_t j = pick(rng);
            if (i != j) dist.push_back(euclidean_distance(s[i], s[j]));
        }
    }

    double smallest_positive = 0.0;
    for (double d : dist)
        if (d > 0.0 && (smallest_positive == 0.0 || d < smallest_positive)) smallest_positive = d;

    const double med = median_of(dist);
    if (med > 0.0) return med;
    return smallest_positive > 0.0 ? smallest_positive : 1.0;
}

double auto_bdwth_x(const Sample& rows, double rescale)
{
    if (!(rescale > 0.0)) rescale = 1.0 / static_cast<double>(rows.size());
    return rescale * median_heuristic(rows);
}

} // namespace mmdfit
