// mmdfit: MMD minimum-distance estimation from the command line.
#include "mmdfit/cli/experiment.hpp"
#include "mmdfit/cli/report.hpp"
#include "mmdfit/error.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

struct Control {
    std::string method = "auto";
    std::size_t maxit = 50'000;
    std::uint64_t seed = 1;
    std::size_t mc_samples = 64;
    double tol = 1e-6;
    std::string json_path;
    std::string format = "text";
    bool runtime = false;
};

void add_control(CLI::App* app, Control& c)
{
    app->add_option("--method", c.method, "Optimizer: auto, exact, GD or SGD")->capture_default_str();
    app->add_option("--maxit", c.maxit, "Maximum number of iterations")->capture_default_str();
    app->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    app->add_option("--mc-samples", c.mc_samples, "Model draws per stochastic gradient")->capture_default_str();
    app->add_option("--tol", c.tol, "Relative tolerance of the stopping rule")->capture_default_str();
    app->add_option("--json", c.json_path, "Write the JSON artifact to this path");
    app->add_option("--format", c.format, "Standard output format")
        ->check(CLI::IsMember({"text", "json"}))
        ->capture_default_str();
    app->add_flag("--runtime", c.runtime, "Record runtime_ms in the JSON artifact");
}

mmdfit::OptimizerConfig to_config(const Control& c)
{
    mmdfit::OptimizerConfig cfg;
    cfg.method = mmdfit::parse_method(c.method);
    cfg.maxit = c.maxit;
    cfg.seed = c.seed;
    cfg.mc_samples = c.mc_samples;
    cfg.tol = c.tol;
    cfg.validate();
    return cfg;
}

void write_file(const std::string& path, const std::string& contents)
{
    std::ofstream out(path);
    if (!out) throw mmdfit::InputError("cannot write " + path);
    out << contents;
}

void emit(const mmdfit::cli::RunOutput& out, const Control& c)
{
    if (c.format == "json") {
        std::cout << out.json.dump(2) << "\n";
        for (const auto& w : out.warnings) std::cerr << "warning: " << w << "\n";
    } else {
        std::cout << out.text;
    }
    if (!c.json_path.empty()) write_file(c.json_path, out.json.dump(2) + "\n");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Minimum distance estimation with the maximum mean discrepancy"};
    app.require_subcommand(1);

    mmdfit::cli::EstRequest est;
    Control est_ctl;
    std::string est_par1, est_par2, est_bdwth;
    auto* est_cmd = app.add_subcommand("est", "Fit a parametric model to a data column (or columns)");
    est_cmd->add_option("--data", est.data_path, "CSV file with a header row")->required();
    est_cmd->add_option("--columns", est.columns, "Columns forming the observations (default: all)")->delimiter(',');
    est_cmd->add_option("--model", est.model, "Model identifier, e.g. Gaussian.loc")->required();
    est_cmd->add_option("--par1", est_par1, "First parameter: value, comma list, or free");
    est_cmd->add_option("--par2", est_par2, "Second parameter: value, comma list, or free");
    est_cmd->add_option("--kernel", est.kernel, "Gaussian, Laplace or Cauchy")->capture_default_str();
    est_cmd->add_option("--bdwth", est_bdwth, "Kernel bandwidth (default: median heuristic)");
    add_control(est_cmd, est_ctl);

    mmdfit::cli::RegRequest reg;
    Control reg_ctl;
    std::string reg_par1, reg_par2, reg_kernel_y;
    auto* reg_cmd = app.add_subcommand("reg", "Fit a regression model");
    reg_cmd->add_option("--data", reg.data_path, "CSV file with a header row")->required();
    reg_cmd->add_option("--response", reg.response, "Response column (default: first)");
    reg_cmd->add_option("--columns", reg.columns, "Covariate columns (default: all others)")->delimiter(',');
    reg_cmd->add_option("--poly-degree", reg.poly_degree, "Orthogonal polynomial basis per covariate (0 = off)")
        ->check(CLI::NonNegativeNumber);
    reg_cmd->add_flag("--log-response", reg.log_response, "Regress log(response)");
    reg_cmd->add_option("--model", reg.model, "Regression model, e.g. linearGaussian")->capture_default_str();
    reg_cmd->add_option("--par1", reg_par1, "Initial coefficients: comma list");
    reg_cmd->add_option("--par2", reg_par2, "Noise std or precision; fixes it when given");
    reg_cmd->add_option("--kernel-y", reg_kernel_y, "Response kernel (default per model)");
    reg_cmd->add_option("--kernel-x", reg.kernel_x, "Covariate kernel")->capture_default_str();
    reg_cmd->add_option("--bdwth-y", reg.bdwth_y, "Response bandwidth or auto")->capture_default_str();
    reg_cmd->add_option("--bdwth-x", reg.bdwth_x, "Covariate bandwidth: 0, positive or auto")->capture_default_str();
    reg_cmd->add_option("--intercept", reg.intercept, "Add an intercept column (true/false)")->capture_default_str();
    add_control(reg_cmd, reg_ctl);

    mmdfit::cli::ExperimentConfig exp;
    Control exp_ctl;
    std::string exp_name, exp_contamination = "both", exp_csv, exp_svg;
    auto* exp_cmd = app.add_subcommand("experiment", "Run a seeded robustness experiment");
    exp_cmd->add_option("name", exp_name, "gauss-loc, gauss-scale, linreg-air or poisreg-air")->required();
    exp_cmd->add_option("--replications", exp.replications, "Number of replications")->capture_default_str();
    exp_cmd->add_option("--n", exp.n, "Sample size per replication")->capture_default_str();
    exp_cmd->add_option("--contamination", exp_contamination, "none, cauchy-2pts or both")->capture_default_str();
    exp_cmd->add_option("--threads", exp.threads, "Worker threads (0 = all cores)")->capture_default_str();
    exp_cmd->add_option("--data", exp.data_path, "Air quality CSV")->capture_default_str();
    exp_cmd->add_option("--csv", exp_csv, "Write the result table as CSV");
    exp_cmd->add_option("--svg", exp_svg, "Write a bar chart as SVG");
    add_control(exp_cmd, exp_ctl);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*est_cmd) {
            est.par1 = mmdfit::cli::parse_par(est_par1);
            est.par2 = mmdfit::cli::parse_par(est_par2);
            if (!est_bdwth.empty()) {
                const auto b = mmdfit::cli::parse_par(est_bdwth);
                if (!b || b->size() != 1) throw mmdfit::ConfigError("bdwth must be a single positive number");
                est.bdwth = b->front();
            }
            est.cfg = to_config(est_ctl);
            est.runtime = est_ctl.runtime;
            emit(mmdfit::cli::run_est(est), est_ctl);
        } else if (*reg_cmd) {
            reg.par1 = mmdfit::cli::parse_par(reg_par1);
            if (const auto p2 = mmdfit::cli::parse_par(reg_par2)) {
                if (p2->size() != 1) throw mmdfit::ConfigError("par2 must be a single number");
                reg.par2 = p2->front();
            }
            if (!reg_kernel_y.empty()) reg.kernel_y = reg_kernel_y;
            reg.cfg = to_config(reg_ctl);
            reg.runtime = reg_ctl.runtime;
            emit(mmdfit::cli::run_reg(reg), reg_ctl);
        } else if (*exp_cmd) {
            exp.name = mmdfit::cli::parse_experiment_name(exp_name);
            exp.contamination = mmdfit::cli::parse_contamination(exp_contamination);
            exp.seed = exp_ctl.seed;
            exp.cfg = to_config(exp_ctl);
            const auto r = mmdfit::cli::run_experiment(exp);
            const auto j = mmdfit::cli::experiment_json(r);
            if (exp_ctl.format == "json")
                std::cout << j.dump(2) << "\n";
            else
                std::cout << mmdfit::cli::experiment_text(r);
            if (!exp_ctl.json_path.empty()) write_file(exp_ctl.json_path, j.dump(2) + "\n");
            if (!exp_csv.empty()) write_file(exp_csv, mmdfit::cli::experiment_csv(r));
            if (!exp_svg.empty()) write_file(exp_svg, mmdfit::cli::experiment_svg(r));
        }
    } catch (const mmdfit::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
