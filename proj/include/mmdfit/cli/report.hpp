#pragma once

#include "mmdfit/cli/table.hpp"
#include "mmdfit/fit_est.hpp"
#include "mmdfit/fit_reg.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace mmdfit::cli {

struct EstRequest {
    std::string data_path;
    /// Columns forming the observations; all columns when empty.
    std::vector<std::string> columns;
    std::string model;
    std::optional<std::vector<double>> par1;
    std::optional<std::vector<double>> par2;
    std::string kernel = "Gaussian";
    /// Median heuristic when absent.
    std::optional<double> bdwth;
    OptimizerConfig cfg;
    bool runtime = false;
};

struct RegRequest {
    std::string data_path;
    /// First column when empty.
    std::string response;
    /// Every non-response column when empty.
    std::vector<std::string> columns;
    /// Replace each covariate by an orthogonal polynomial basis of this degree (0 = off).
    int poly_degree = 0;
    bool log_response = false;
    std::string model = "linearGaussian";
    std::optional<std::vector<double>> par1;
    std::optional<double> par2;
    /// Per-model default when absent.
    std::optional<std::string> kernel_y;
    std::string kernel_x = "Laplace";
    /// "0", a positive number, or "auto".
    std::string bdwth_x = "0";
    /// A positive number or "auto".
    std::string bdwth_y = "auto";
    /// Rescale factor for bdwth.x = "auto"; non-positive means 1/n.
    double bdwth_x_rescale = 0.0;
    bool intercept = true;
    OptimizerConfig cfg;
    bool runtime = false;
};

struct RunOutput {
    std::string text;
    nlohmann::json json;
    std::vector<std::string> warnings;
};

/// Loads data, fits, and renders the summary and JSON artifact.
RunOutput run_est(const EstRequest& req);
RunOutput run_est(const EstRequest& req, const Table& table);
RunOutput run_reg(const RegRequest& req);
RunOutput run_reg(const RegRequest& req, const Table& table);

/// Assembles the regression problem (response transform, polynomial features,
/// bandwidth resolution) from a loaded table.
struct PreparedRegression {
    RegressionProblem problem;
    std::vector<std::string> covariate_names;
};
PreparedRegression prepare_regression(const RegRequest& req, const Table& table);

std::string est_summary(const FitResult& r, const Model& model);
std::string reg_summary(const RegFitResult& r);

nlohmann::json est_json(const FitResult& r, const Model& model, std::uint64_t seed);
nlohmann::json reg_json(const RegFitResult& r, const std::vector<std::string>& covariate_names, std::uint64_t seed);

/// At most this many trace entries are written to JSON; longer traces are strided.
inline constexpr std::size_t kMaxJsonTrace = 2000;

/// Parses "1.5", "1,2,3" or "free" (absent).
std::optional<std::vector<double>> parse_par(const std::string& text);

} // namespace mmdfit::cli
