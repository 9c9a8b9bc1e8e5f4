#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace mmdfit::cli {

/// Numeric CSV contents after dropping incomplete rows.
struct Table {
    std::vector<std::string> header;
    /// Row-major cells, header.size() per row.
    std::vector<std::vector<double>> rows;
    std::size_t dropped = 0;
    std::vector<std::string> warnings;

    std::size_t column(std::string_view name) const;
    std::vector<double> column_values(std::size_t c) const;
};

/// Reads a header row and numeric cells. "NA" and empty cells are missing; a row
/// with any missing cell in the selected columns is dropped with a warning. When
/// `columns` is non-empty only those columns are kept, in that order.
/// Throws InputError on unreadable files, ragged rows or unparseable cells.
Table read_csv(std::istream& in, const std::vector<std::string>& columns = {});
Table load_csv(const std::string& path, const std::vector<std::string>& columns = {});

/// Orthonormal polynomial basis of degrees 1..degree over the centred values,
/// oriented so each column correlates positively with its leading power.
/// Returns n rows of `degree` entries.
std::vector<std::vector<double>> orthogonal_poly(const std::vector<double>& x, int degree);

} // namespace mmdfit::cli
