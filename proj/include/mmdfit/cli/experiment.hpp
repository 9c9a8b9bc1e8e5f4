#pragma once

#include "mmdfit/fit_est.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmdfit::cli {

enum class ExperimentName { GaussLoc, GaussScale, LinregAir, PoisregAir };
std::string_view to_string(ExperimentName e);
/// Throws ConfigError on unknown names.
ExperimentName parse_experiment_name(std::string_view name);

enum class Contamination { None, Cauchy2Pts, Both };
std::string_view to_string(Contamination c);
Contamination parse_contamination(std::string_view name);

struct ExperimentConfig {
    ExperimentName name = ExperimentName::GaussLoc;
    std::uint64_t seed = 1;
    std::size_t replications = 200;
    std::size_t n = 100;
    Contamination contamination = Contamination::Both;
    /// Worker threads for the simulation studies; 0 uses every hardware thread.
    unsigned threads = 0;
    /// CSV export of the air quality data (header Ozone,Solar.R,Wind,Temp,...).
    std::string data_path = "data/airquality.csv";
    OptimizerConfig cfg;
};

/// MAE and standard deviation of the absolute error for one estimator.
struct EstimatorCell {
    std::string estimator;
    double mae = 0.0;
    double sd = 0.0;
    std::vector<double> abs_errors;
};

struct SimulationRow {
    Contamination contamination = Contamination::None;
    std::vector<EstimatorCell> cells;

    const EstimatorCell& cell(std::string_view estimator) const;
};

/// Side-by-side coefficient estimates, one column per fitting method.
struct CoefficientTable {
    std::vector<std::string> row_names;
    std::vector<std::string> column_names;
    /// values[column][row]
    std::vector<std::vector<double>> values;
    double bdwth_y = 0.0;
    double bdwth_x = 0.0;
    /// Noise std of the MMD fits (linear model only).
    std::vector<std::optional<double>> aux;
};

struct ExperimentResult {
    ExperimentName name{};
    std::uint64_t seed = 1;
    std::size_t replications = 0;
    std::size_t n = 0;
    std::vector<SimulationRow> rows;
    std::optional<CoefficientTable> table;
    std::vector<std::string> warnings;

    const SimulationRow& row(Contamination c) const;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::string experiment_text(const ExperimentResult& r);
std::string experiment_csv(const ExperimentResult& r);
nlohmann::json experiment_json(const ExperimentResult& r);
/// Grouped bar chart: MAE per estimator, or coefficients per method.
std::string experiment_svg(const ExperimentResult& r);

} // namespace mmdfit::cli
