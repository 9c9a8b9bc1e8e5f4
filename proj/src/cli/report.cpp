#include "mmdfit/cli/report.hpp"

#include "mmdfit/cli/format.hpp"
#include "mmdfit/error.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace mmdfit::cli {

namespace {

constexpr std::string_view kTop = "======================== Summary ========================";
constexpr std::string_view kRule = "---------------------------------------------------------";
constexpr std::string_view kBottom = "=========================================================";

double parse_number(const std::string& text, std::string_view what)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v))
        throw ConfigError(std::string(what) + ": cannot parse '" + text + "' as a number");
    return v;
}

std::string field(std::string_view label, std::string_view value)
{
    std::string s(label);
    s.resize(21, ' ');
    return s + std::string(value) + "\n";
}

nlohmann::json trace_json(const std::vector<TracePoint>& trace, std::size_t& stride)
{
    stride = trace.size() <= kMaxJsonTrace ? 1 : (trace.size() + kMaxJsonTrace - 1) / kMaxJsonTrace;
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t i = 0; i < trace.size(); i += stride)
        out.push_back({{"iteration", i}, {"theta", trace[i].theta}, {"objective", trace[i].objective}});
    if (!trace.empty() && (trace.size() - 1) % stride != 0) {
        const std::size_t i = trace.size() - 1;
        out.push_back({{"iteration", i}, {"theta", trace[i].theta}, {"objective", trace[i].objective}});
    }
    return out;
}

std::vector<std::string> coefficient_names(const RegFitResult& r)
{
    std::vector<std::string> names;
    const std::size_t q = r.coefficients.size() - (r.intercept_added ? 1 : 0);
    if (r.intercept_added) names.emplace_back("(Intercept)");
    for (std::size_t c = 1; c <= q; ++c) names.push_back("X" + std::to_string(c));
    return names;
}

template <class F>
RunOutput timed(bool runtime, F&& f)
{
    const auto t0 = std::chrono::steady_clock::now();
    RunOutput out = f();
    if (runtime)
        out.json["runtime_ms"] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

} // namespace

std::optional<std::vector<double>> parse_par(const std::string& text)
{
    if (text.empty() || text == "free") return std::nullopt;
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) v.push_back(parse_number(item, "parameter value"));
    return v;
}

std::string est_summary(const FitResult& r, const Model& model)
{
    std::string s;
    s += std::string(kTop) + "\n";
    s += field("Model:", to_string(r.model));
    s += std::string(kRule) + "\n";
    s += field("Algorithm:", to_string(r.method_used));
    s += field("Kernel:", to_string(r.kernel.family()));
    s += field("Bandwidth:", format_full(r.kernel.bandwidth()));
    s += std::string(kRule) + "\n";
    s += "Parameters:\n";
    const SlotLayout layout = slot_layout(r.model);
    auto block = [&](std::string_view slot, SlotRole role, const ParamSlot& status, std::string_view name,
                     const std::vector<double>& init, const std::vector<double>& est) {
        if (role == SlotRole::Absent) return;
        s += " \n";
        s += std::string(slot) + ": " + std::string(name) + " -- ";
        if (status.is_free()) {
            s += "initialized at " + format_values(init) + "\n";
            s += "      estimated value: " + format_values(est) + "\n";
        } else if (!status.value.empty()) {
            s += "fixed by user: " + format_values(status.value) + "\n";
        } else {
            s += "fixed by default: " + format_values(est) + "\n";
        }
    };
    block("par1", layout.par1, model.spec().par1, layout.par1_name, r.initial.par1, r.estimates.par1);
    block("par2", layout.par2, model.spec().par2, layout.par2_name, r.initial.par2, r.estimates.par2);
    s += std::string(kBottom) + "\n";
    for (const auto& w : r.warnings) s += "Warning: " + w + "\n";
    return s;
}

std::string reg_summary(const RegFitResult& r)
{
    std::string s;
    s += std::string(kTop) + "\n";
    s += field("Model:", to_string(r.model));
    s += field("Estimator:", r.estimator == EstimatorKind::ThetaTilde ? "theta tilde (bdwth.x=0)"
                                                                      : "theta hat  (bdwth.x>0)");
    s += field("Algorithm:", to_string(r.method_used));
    s += std::string(kRule) + "\n";
    s += "  Coefficients           Estimate\n";
    s += std::string(kRule) + "\n";
    const auto names = coefficient_names(r);
    for (std::size_t c = 0; c < names.size(); ++c) {
        const std::string value = format_round(r.coefficients[c]);
        std::string line = "  " + names[c];
        const std::size_t width = 33;
        line.append(line.size() + value.size() < width ? width - line.size() - value.size() : 1, ' ');
        s += line + value + "\n";
    }
    s += std::string(kRule) + "\n";
    if (r.aux)
        s += "  " + std::string(aux_label(r.model)) + " : " + format_round(*r.aux) +
             (r.aux_fixed ? " (fixed by user)" : " (estimated)") + "\n";
    s += std::string(kRule) + "\n";
    s += "  Kernel for y: " + std::string(to_string(r.kernel_y.family())) + " with bandwidth " +
         format_round(r.kernel_y.bandwidth()) + "\n";
    if (r.estimator == EstimatorKind::ThetaHat)
        s += "  Kernel for x: " + std::string(to_string(r.kernel_x)) + " with bandwidth " + format_round(r.bdwth_x) +
             "\n";
    s += std::string(kBottom) + "\n";
    for (const auto& w : r.warnings) s += "Warning: " + w + "\n";
    return s;
}

nlohmann::json est_json(const FitResult& r, const Model& model, std::uint64_t seed)
{
    nlohmann::json j;
    j["model"] = std::string(to_string(r.model));
    j["estimator_kind"] = "parametric";
    j["method"] = std::string(to_string(r.method_used));
    j["kernels"] = {{"kernel", {{"family", std::string(to_string(r.kernel.family()))},
                                {"bandwidth", r.kernel.bandwidth()}}}};
    j["bandwidths"] = {{"kernel", r.kernel.bandwidth()}};
    nlohmann::json est = nlohmann::json::object();
    nlohmann::json init = nlohmann::json::object();
    nlohmann::json status = nlohmann::json::object();
    const SlotLayout layout = slot_layout(r.model);
    auto slot = [&](const char* name, SlotRole role, const ParamSlot& st, const std::vector<double>& e,
                    const std::vector<double>& i0) {
        if (role == SlotRole::Absent) return;
        est[name] = e;
        status[name] = st.is_free() ? "estimated" : "fixed";
        if (st.is_free()) init[name] = i0;
    };
    slot("par1", layout.par1, model.spec().par1, r.estimates.par1, r.initial.par1);
    slot("par2", layout.par2, model.spec().par2, r.estimates.par2, r.initial.par2);
    j["estimates"] = est;
    j["initial"] = init;
    j["status"] = status;
    j["aux"] = nullptr;
    j["objective"] = {{"value", r.objective}, {"exact", r.objective_exact}};
    j["iterations"] = r.iterations;
    std::size_t stride = 1;
    j["trace"] = trace_json(r.trace, stride);
    j["trace_stride"] = stride;
    j["warnings"] = r.warnings;
    j["seed"] = seed;
    return j;
}

nlohmann::json reg_json(const RegFitResult& r, const std::vector<std::string>& covariate_names, std::uint64_t seed)
{
    nlohmann::json j;
    j["model"] = std::string(to_string(r.model));
    j["estimator_kind"] = r.estimator == EstimatorKind::ThetaTilde ? "theta_tilde" : "theta_hat";
    j["method"] = std::string(to_string(r.method_used));
    nlohmann::json kernels = {{"y", {{"family", std::string(to_string(r.kernel_y.family()))},
                                     {"bandwidth", r.kernel_y.bandwidth()}}},
                              {"x", {{"family", std::string(to_string(r.kernel_x))}, {"bandwidth", r.bdwth_x}}}};
    j["kernels"] = kernels;
    j["bandwidths"] = {{"y", r.kernel_y.bandwidth()}, {"x", r.bdwth_x}};
    const auto names = coefficient_names(r);
    nlohmann::json coefs = nlohmann::json::array();
    for (std::size_t c = 0; c < names.size(); ++c)
        coefs.push_back({{"name", names[c]}, {"estimate", r.coefficients[c]}, {"initial", r.initial_coefficients[c]}});
    j["estimates"] = {{"coefficients", coefs}};
    j["covariates"] = covariate_names;
    j["intercept_added"] = r.intercept_added;
    if (r.aux) {
        j["aux"] = {{"name", std::string(aux_label(r.model))},
                    {"value", *r.aux},
                    {"status", r.aux_fixed ? "fixed" : "estimated"}};
        if (r.initial_aux) j["aux"]["initial"] = *r.initial_aux;
    } else {
        j["aux"] = nullptr;
    }
    j["objective"] = r.objective;
    j["iterations"] = r.iterations;
    std::size_t stride = 1;
    j["trace"] = trace_json(r.trace, stride);
    j["trace_stride"] = stride;
    j["warnings"] = r.warnings;
    j["seed"] = seed;
    return j;
}

RunOutput run_est(const EstRequest& req, const Table& table)
{
    return timed(req.runtime, [&] {
        std::vector<std::size_t> cols;
        if (req.columns.empty())
            for (std::size_t c = 0; c < table.header.size(); ++c) cols.push_back(c);
        else
            for (const auto& name : req.columns) cols.push_back(table.column(name));
        std::vector<double> values;
        values.reserve(table.rows.size() * cols.size());
        for (const auto& row : table.rows)
            for (std::size_t c : cols) values.push_back(row[c]);
        const Sample data(cols.size(), std::move(values));

        const ModelId id = parse_model_id(req.model);
        const auto model = make_model(ModelSpec::make(id, req.par1, req.par2), data.dim());
        const KernelFamily family = parse_kernel_family(req.kernel);
        const double bw = req.bdwth ? *req.bdwth : median_heuristic(data);
        const KernelSpec spec(family, bw);
        FitResult r = fit(*model, data, spec, req.cfg);

        RunOutput out;
        out.warnings = table.warnings;
        out.warnings.insert(out.warnings.end(), r.warnings.begin(), r.warnings.end());
        r.warnings = out.warnings;
        out.text = est_summary(r, *model);
        out.json = est_json(r, *model, req.cfg.seed);
        return out;
    });
}

RunOutput run_est(const EstRequest& req)
{
    std::vector<std::string> cols = req.columns;
    return run_est(req, load_csv(req.data_path, cols));
}

PreparedRegression prepare_regression(const RegRequest& req, const Table& table)
{
    const std::size_t ycol = req.response.empty() ? 0 : table.column(req.response);
    std::vector<std::size_t> xcols;
    if (req.columns.empty()) {
        for (std::size_t c = 0; c < table.header.size(); ++c)
            if (c != ycol) xcols.push_back(c);
    } else {
        for (const auto& name : req.columns) xcols.push_back(table.column(name));
    }
    if (xcols.empty()) throw InputError("regression needs at least one covariate column");

    PreparedRegression out;
    RegressionProblem& p = out.problem;
    p.y = table.column_values(ycol);
    if (req.log_response) {
        for (double& v : p.y) {
            if (!(v > 0.0)) throw InputError("log-response requires a positive response");
            v = std::log(v);
        }
    }
    const std::size_t n = p.y.size();
    std::vector<std::vector<double>> rows(n);
    for (std::size_t c : xcols) {
        const auto col = table.column_values(c);
        if (req.poly_degree > 0) {
            const auto basis = orthogonal_poly(col, req.poly_degree);
            for (std::size_t i = 0; i < n; ++i) rows[i].insert(rows[i].end(), basis[i].begin(), basis[i].end());
            for (int d = 1; d <= req.poly_degree; ++d)
                out.covariate_names.push_back(table.header[c] + "^" + std::to_string(d) + " (orthogonal)");
        } else {
            for (std::size_t i = 0; i < n; ++i) rows[i].push_back(col[i]);
            out.covariate_names.push_back(table.header[c]);
        }
    }
    p.x = Sample::from_rows(rows);
    p.intercept = req.intercept;
    const RegressionModelId id = parse_regression_model_id(req.model);
    p.model = RegressionModelSpec::make(id, req.par1, req.par2);

    const KernelFamily ky = req.kernel_y ? parse_kernel_family(*req.kernel_y) : default_kernel_y(id);
    double bw_y = 0.0;
    if (req.bdwth_y == "auto") {
        if (n < 2) throw InputError("automatic bdwth.y needs at least two observations");
        bw_y = auto_bdwth_y(p.y);
    } else {
        bw_y = parse_number(req.bdwth_y, "bdwth.y");
    }
    p.kernel_y = KernelSpec(ky, bw_y);
    p.kernel_x = parse_kernel_family(req.kernel_x);
    if (req.bdwth_x == "auto") {
        p.bdwth_x = auto_bdwth_x(p.x, req.bdwth_x_rescale);
    } else {
        p.bdwth_x = parse_number(req.bdwth_x, "bdwth.x");
        if (p.bdwth_x < 0.0) throw ConfigError("bdwth.x must be 0, positive, or \"auto\"");
    }
    return out;
}

RunOutput run_reg(const RegRequest& req, const Table& table)
{
    return timed(req.runtime, [&] {
        const PreparedRegression prep = prepare_regression(req, table);
        RegFitResult r = fit_regression(prep.problem, req.cfg);
        RunOutput out;
        out.warnings = table.warnings;
        out.warnings.insert(out.warnings.end(), r.warnings.begin(), r.warnings.end());
        r.warnings = out.warnings;
        out.text = reg_summary(r);
        out.json = reg_json(r, prep.covariate_names, req.cfg.seed);
        return out;
    });
}

RunOutput run_reg(const RegRequest& req)
{
    std::vector<std::string> cols;
    if (!req.columns.empty()) {
        if (!req.response.empty()) cols.push_back(req.response);
        cols.insert(cols.end(), req.columns.begin(), req.columns.end());
    }
    return run_reg(req, load_csv(req.data_path, cols));
}

} // namespace mmdfit::cli
