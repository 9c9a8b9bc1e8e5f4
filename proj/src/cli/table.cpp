#include "mmdfit/cli/table.hpp"

#include "mmdfit/error.hpp"

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>

namespace mmdfit::cli {

namespace {

std::vector<std::string> split_line(const std::string& line)
{
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(std::move(cur));
    for (auto& s : cells) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }
    return cells;
}

std::optional<double> parse_cell(const std::string& s, std::size_t row, const std::string& col)
{
    if (s.empty() || s == "NA") return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw InputError("row " + std::to_string(row) + ", column '" + col + "': cannot parse '" + s + "' as a number");
    return v;
}

} // namespace

std::size_t Table::column(std::string_view name) const
{
    for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] == name) return c;
    throw InputError("no column named '" + std::string(name) + "'");
}

std::vector<double> Table::column_values(std::size_t c) const
{
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r[c]);
    return v;
}

Table read_csv(std::istream& in, const std::vector<std::string>& columns)
{
    std::string line;
    if (!std::getline(in, line)) throw InputError("CSV input is empty (a header row is required)");
    const auto all_header = split_line(line);

    std::vector<std::size_t> keep;
    if (columns.empty()) {
        for (std::size_t c = 0; c < all_header.size(); ++c) keep.push_back(c);
    } else {
        for (const auto& name : columns) {
            std::size_t c = 0;
            while (c < all_header.size() && all_header[c] != name) ++c;
            if (c == all_header.size()) throw InputError("no column named '" + name + "'");
            keep.push_back(c);
        }
    }

    Table t;
    for (std::size_t c : keep) t.header.push_back(all_header[c]);
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_line(line);
        if (cells.size() != all_header.size())
            throw InputError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                             " cells but the header has " + std::to_string(all_header.size()));
        std::vector<double> values;
        bool missing = false;
        for (std::size_t c : keep) {
            const auto v = parse_cell(cells[c], row, all_header[c]);
            if (!v) {
                missing = true;
                continue;
            }
            values.push_back(*v);
        }
        if (missing) {
            ++t.dropped;
            continue;
        }
        t.rows.push_back(std::move(values));
    }
    if (t.dropped > 0)
        t.warnings.push_back("dropped " + std::to_string(t.dropped) + (t.dropped == 1 ? " row" : " rows") +
                             " with missing values");
    if (t.rows.empty()) throw InputError("no complete rows in CSV input");
    return t;
}

Table load_csv(const std::string& path, const std::vector<std::string>& columns)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return read_csv(in, columns);
}

std::vector<std::vector<double>> orthogonal_poly(const std::vector<double>& x, int degree)
{
    const auto n = static_cast<Eigen::Index>(x.size());
    if (degree < 1) throw ConfigError("polynomial degree must be at least 1");
    if (n <= degree) throw InputError("polynomial degree must be smaller than the number of rows");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);

    Eigen::MatrixXd v(n, degree + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double c = x[static_cast<std::size_t>(i)] - mean;
        double p = 1.0;
        for (int d = 0; d <= degree; ++d) {
            v(i, d) = p;
            p *= c;
        }
    }
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, degree + 1);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(degree + 1).triangularView<Eigen::Upper>();
    for (int d = 0; d <= degree; ++d)
        if (std::abs(r(d, d)) < 1e-10 * std::max(1.0, r.col(d).norm()))
            throw InputError("column has too few distinct values for a degree-" + std::to_string(degree) +
                             " polynomial");

    std::vector<std::vector<double>> out(x.size(), std::vector<double>(static_cast<std::size_t>(degree)));
    for (int d = 1; d <= degree; ++d) {
        const double sign = r(d, d) < 0.0 ? -1.0 : 1.0;
        for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(d - 1)] = sign * q(i, d);
    }
    return out;
}

} // namespace mmdfit::cli
