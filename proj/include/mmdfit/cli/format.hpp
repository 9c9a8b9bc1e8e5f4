#pragma once

#include <span>
#include <string>

namespace mmdfit::cli {

/// Rounded to `digits` decimals with trailing zeros dropped: 3.4270 -> "3.427", 1.0 -> "1".
std::string format_round(double v, int digits = 4);
/// 15 significant digits, e.g. bandwidths "0.976611092935025".
std::string format_full(double v);
/// "a" for one value, "(a, b, c)" for several.
std::string format_values(std::span<const double> v, int digits = 4);

} // namespace mmdfit::cli
