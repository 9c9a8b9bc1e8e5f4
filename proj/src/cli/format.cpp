#include "mmdfit/cli/format.hpp"

#include <cmath>
#include <cstdio>

namespace mmdfit::cli {

std::string format_round(double v, int digits)
{
    if (!std::isfinite(v)) return std::isnan(v) ? "NaN" : (v > 0 ? "Inf" : "-Inf");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    std::string s(buf);
    if (s.find('.') != std::string::npos) {
        while (s.back() == '0') s.pop_back();
        if (s.back() == '.') s.pop_back();
    }
    if (s == "-0") s = "0";
    return s;
}

std::string format_full(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return buf;
}

std::string format_values(std::span<const double> v, int digits)
{
    if (v.size() == 1) return format_round(v[0], digits);
    std::string s = "(";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += format_round(v[i], digits);
    }
    return s + ")";
}

} // namespace mmdfit::cli
