#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmdfit {

// Radial kernels k(x, y) = K(|x - y| / bandwidth):
//   Gaussian  K(u) = exp(-u^2)
//   Laplace   K(u) = exp(-u)
//   Cauchy    K(u) = 1 / (2 + u^2)
enum class KernelFamily { Gaussian, Laplace, Cauchy };

std::string_view to_string(KernelFamily family);
/// Throws ConfigError on an unknown name.
KernelFamily parse_kernel_family(std::string_view name);

/// Kernel profile K(u) for u >= 0.
double kernel_profile(KernelFamily family, double u);
/// K'(u) for u >= 0 (right derivative at 0).
double kernel_profile_derivative(KernelFamily family, double u);

class KernelSpec {
public:
    /// Throws ConfigError unless bandwidth > 0 and finite.
    KernelSpec(KernelFamily family, double bandwidth);

    KernelFamily family() const { return family_; }
    double bandwidth() const { return bandwidth_; }

    /// K(0): 1 for Gaussian and Laplace, 0.5 for Cauchy.
    double at_zero() const { return kernel_profile(family_, 0.0); }
    /// k as a function of the distance |x - y|.
    double of_distance(double r) const { return kernel_profile(family_, r / bandwidth_); }
    /// d k / d r.
    double distance_derivative(double r) const
    {
        return kernel_profile_derivative(family_, r / bandwidth_) / bandwidth_;
    }

    bool operator==(const KernelSpec&) const = default;

private:
    KernelFamily family_;
    double bandwidth_;
};

/// n points of a common dimension d, stored row-major.
class Sample {
public:
    /// Throws InputError if values.size() is not a positive multiple of dim.
    Sample(std::size_t dim, std::vector<double> values);

    static Sample scalars(std::vector<double> values) { return Sample(1, std::move(values)); }
    static Sample from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t size() const { return values_.size() / dim_; }
    std::size_t dim() const { return dim_; }
    std::span<const double> operator[](std::size_t i) const
    {
        return {values_.data() + i * dim_, dim_};
    }
    const std::vector<double>& values() const { return values_; }

private:
    std::size_t dim_;
    std::vector<double> values_;
};

double euclidean_distance(std::span<const double> x, std::span<const double> y);

/// k(x, y); throws InputError on a dimension mismatch.
double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y);
inline double kernel_eval(const KernelSpec& spec, double x, double y)
{
    return spec.of_distance(x > y ? x - y : y - x);
}

/// (1/n^2) sum_ij k(a_i, a_j): the within-sample V-statistic block.
double gram_mean(const Sample& a, const KernelSpec& spec);
/// (1/(n_a n_b)) sum_ij k(a_i, b_j).
double cross_gram_mean(const Sample& a, const Sample& b, const KernelSpec& spec);

/// Biased (V-statistic) squared MMD between two empirical measures.
double mmd2_empirical(const Sample& a, const Sample& b, const KernelSpec& spec);

/// Samples above this size use a seeded subsample of pairs in the median heuristic.
inline constexpr std::size_t kMedianExhaustiveLimit = 2000;
inline constexpr std::size_t kMedianSubsamplePairs = 2'000'000;

/// Median of pairwise distances over i < j, with the fallback chain
/// (smallest positive distance, then 1) for degenerate samples.
/// Requires n >= 2.
double median_heuristic(const Sample& s, std::uint64_t seed = 0x5eed);

/// rescale * median_heuristic(rows). A non-positive rescale selects the default 1/n.
double auto_bdwth_x(const Sample& rows, double rescale = 0.0);

} // namespace mmdfit
