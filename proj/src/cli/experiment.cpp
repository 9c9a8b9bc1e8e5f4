#include "mmdfit/cli/experiment.hpp"

#include "mmdfit/cli/baselines.hpp"
#include "mmdfit/cli/format.hpp"
#include "mmdfit/cli/table.hpp"
#include "mmdfit/error.hpp"
#include "mmdfit/fit_reg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace mmdfit::cli {

namespace {

constexpr const char* kMle = "MLE";
constexpr const char* kMmdGauss = "MMD (Gaussian kernel)";
constexpr const char* kMmdLaplace = "MMD (Laplace kernel)";
constexpr const char* kMedian = "median";

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b)
{
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double sample_sd(const std::vector<double>& v)
{
    if (v.size() < 2) return 0.0;
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct ReplicationOutcome {
    std::vector<double> estimates;
    std::size_t maxit_hits = 0;
};

template <class F>
void parallel_for(std::size_t count, unsigned threads, F&& body)
{
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = count;
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

std::vector<std::string> estimator_names(ExperimentName name)
{
    if (name == ExperimentName::GaussLoc) return {kMle, kMmdGauss, kMmdLaplace, kMedian};
    return {kMle, kMmdGauss, kMmdLaplace};
}

ReplicationOutcome replicate(const ExperimentConfig& cfg, std::size_t rep, Contamination c)
{
    const bool loc = cfg.name == ExperimentName::GaussLoc;
    Rng rng(derive_seed(cfg.seed, rep, 0));
    std::normal_distribution<double> normal(loc ? -2.0 : 0.0, 1.0);
    std::vector<double> x(cfg.n);
    for (double& v : x) v = normal(rng);
    if (c == Contamination::Cauchy2Pts) {
        std::cauchy_distribution<double> cauchy(0.0, 1.0);
        for (std::size_t i = 0; i < std::min<std::size_t>(2, x.size()); ++i) x[i] = cauchy(rng);
    }

    ReplicationOutcome out;
    const double nd = static_cast<double>(x.size());
    if (loc) {
        out.estimates.push_back(std::accumulate(x.begin(), x.end(), 0.0) / nd);
    } else {
        double ss = 0.0;
        for (double v : x) ss += v * v;
        out.estimates.push_back(std::sqrt(ss / nd));
    }

    const Sample data = Sample::scalars(x);
    const double bw = median_heuristic(data);
    const ModelSpec spec = loc ? ModelSpec::make(ModelId::GaussianLoc, std::nullopt, std::vector<double>{1.0})
                               : ModelSpec::make(ModelId::GaussianScale, std::vector<double>{0.0}, std::nullopt);
    const auto model = make_model(spec, 1);
    OptimizerConfig oc = cfg.cfg;
    oc.seed = derive_seed(cfg.seed, rep, 1 + static_cast<std::uint64_t>(c));
    for (KernelFamily k : {KernelFamily::Gaussian, KernelFamily::Laplace}) {
        const FitResult r = fit(*model, data, KernelSpec(k, bw), oc);
        out.estimates.push_back(loc ? r.estimates.par1[0] : r.estimates.par2[0]);
        if (!r.warnings.empty()) ++out.maxit_hits;
    }
    if (loc) out.estimates.push_back(median(x));
    return out;
}

void run_simulation(const ExperimentConfig& cfg, ExperimentResult& res)
{
    const double truth = cfg.name == ExperimentName::GaussLoc ? -2.0 : 1.0;
    const auto names = estimator_names(cfg.name);
    std::vector<Contamination> settings;
    if (cfg.contamination != Contamination::Cauchy2Pts) settings.push_back(Contamination::None);
    if (cfg.contamination != Contamination::None) settings.push_back(Contamination::Cauchy2Pts);

    for (Contamination c : settings) {
        std::vector<ReplicationOutcome> outcomes(cfg.replications);
        parallel_for(cfg.replications, cfg.threads,
                     [&](std::size_t rep) { outcomes[rep] = replicate(cfg, rep, c); });
        SimulationRow row;
        row.contamination = c;
        std::size_t hits = 0;
        for (std::size_t e = 0; e < names.size(); ++e) {
            EstimatorCell cell;
            cell.estimator = names[e];
            for (const auto& o : outcomes) cell.abs_errors.push_back(std::abs(o.estimates[e] - truth));
            cell.mae = std::accumulate(cell.abs_errors.begin(), cell.abs_errors.end(), 0.0) /
                       static_cast<double>(std::max<std::size_t>(cell.abs_errors.size(), 1));
            cell.sd = sample_sd(cell.abs_errors);
            row.cells.push_back(std::move(cell));
        }
        for (const auto& o : outcomes) hits += o.maxit_hits;
        if (hits > 0)
            res.warnings.push_back(std::string(to_string(c)) + ": " + std::to_string(hits) +
                                   " MMD fit(s) reached the maximum number of iterations");
        res.rows.push_back(std::move(row));
    }
}

void run_air(const ExperimentConfig& cfg, ExperimentResult& res)
{
    const bool poisson = cfg.name == ExperimentName::PoisregAir;
    const Table t = load_csv(cfg.data_path, {"Ozone", "Solar.R", "Wind", "Temp"});
    res.warnings = t.warnings;
    std::vector<double> y = t.column_values(0);
    if (!poisson)
        for (double& v : y) {
            if (!(v > 0.0)) throw InputError("Ozone must be positive for the log response");
            v = std::log(v);
        }
    const std::size_t n = y.size();
    std::vector<std::vector<double>> x(n);
    for (std::size_t c = 1; c <= 3; ++c) {
        const auto basis = orthogonal_poly(t.column_values(c), 2);
        for (std::size_t i = 0; i < n; ++i) x[i].insert(x[i].end(), basis[i].begin(), basis[i].end());
    }

    std::vector<double> y_clean;
    std::vector<std::vector<double>> x_clean;
    for (std::size_t i = 0; i < n; ++i) {
        const bool outlier = poisson ? y[i] > 150.0 : y[i] < 1.0;
        if (outlier) continue;
        y_clean.push_back(y[i]);
        x_clean.push_back(x[i]);
    }

    CoefficientTable table;
    table.row_names.emplace_back("(Intercept)");
    for (std::size_t c = 1; c <= x.front().size(); ++c) table.row_names.push_back("X" + std::to_string(c));
    const std::string base = poisson ? "GLM" : "OLS";
    table.column_names = {base + " (full)", base + " (no outlier)", "MMD theta tilde", "MMD theta hat"};
    if (poisson) {
        table.values.push_back(poisson_glm(y, with_intercept(x)));
        table.values.push_back(poisson_glm(y_clean, with_intercept(x_clean)));
    } else {
        table.values.push_back(ols(y, with_intercept(x)));
        table.values.push_back(ols(y_clean, with_intercept(x_clean)));
    }
    table.aux = {std::nullopt, std::nullopt};

    RegressionProblem p;
    p.y = y;
    p.x = Sample::from_rows(x);
    p.model = RegressionModelSpec::make(poisson ? RegressionModelId::Poisson : RegressionModelId::LinearGaussian);
    p.kernel_y = KernelSpec(default_kernel_y(p.model.id), auto_bdwth_y(y));
    table.bdwth_y = p.kernel_y.bandwidth();
    for (bool hat : {false, true}) {
        p.bdwth_x = hat ? auto_bdwth_x(p.x) : 0.0;
        if (hat) table.bdwth_x = p.bdwth_x;
        const RegFitResult r = fit_regression(p, cfg.cfg);
        table.values.push_back(r.coefficients);
        table.aux.push_back(r.aux);
        for (const auto& w : r.warnings)
            res.warnings.push_back(std::string(hat ? "theta hat" : "theta tilde") + ": " + w);
    }
    res.table = std::move(table);
}

std::string pad_right(std::string s, std::size_t w)
{
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
}

std::string pad_left(const std::string& s, std::size_t w)
{
    return s.size() < w ? std::string(w - s.size(), ' ') + s : s;
}

std::string svg_escape(const std::string& s)
{
    std::string out;
    for (char ch : s) {
        if (ch == '<') out += "&lt;";
        else if (ch == '>') out += "&gt;";
        else if (ch == '&') out += "&amp;";
        else out += ch;
    }
    return out;
}

} // namespace

std::string_view to_string(ExperimentName e)
{
    switch (e) {
    case ExperimentName::GaussLoc: return "gauss-loc";
    case ExperimentName::GaussScale: return "gauss-scale";
    case ExperimentName::LinregAir: return "linreg-air";
    case ExperimentName::PoisregAir: return "poisreg-air";
    }
    return "?";
}

ExperimentName parse_experiment_name(std::string_view name)
{
    for (ExperimentName e : {ExperimentName::GaussLoc, ExperimentName::GaussScale, ExperimentName::LinregAir,
                             ExperimentName::PoisregAir})
        if (to_string(e) == name) return e;
    throw ConfigError("unknown experiment '" + std::string(name) +
                      "'; valid: gauss-loc, gauss-scale, linreg-air, poisreg-air");
}

std::string_view to_string(Contamination c)
{
    switch (c) {
    case Contamination::None: return "none";
    case Contamination::Cauchy2Pts: return "cauchy-2pts";
    case Contamination::Both: return "both";
    }
    return "?";
}

Contamination parse_contamination(std::string_view name)
{
    for (Contamination c : {Contamination::None, Contamination::Cauchy2Pts, Contamination::Both})
        if (to_string(c) == name) return c;
    throw ConfigError("unknown contamination '" + std::string(name) + "'; valid: none, cauchy-2pts, both");
}

const EstimatorCell& SimulationRow::cell(std::string_view estimator) const
{
    for (const auto& c : cells)
        if (c.estimator == estimator) return c;
    throw ConfigError("no estimator '" + std::string(estimator) + "' in this experiment");
}

const SimulationRow& ExperimentResult::row(Contamination c) const
{
    for (const auto& r : rows)
        if (r.contamination == c) return r;
    throw ConfigError("contamination setting '" + std::string(to_string(c)) + "' was not run");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg)
{
    cfg.cfg.validate();
    ExperimentResult res;
    res.name = cfg.name;
    res.seed = cfg.seed;
    const bool simulation = cfg.name == ExperimentName::GaussLoc || cfg.name == ExperimentName::GaussScale;
    if (simulation) {
        if (cfg.replications == 0) throw ConfigError("replications must be positive");
        if (cfg.n < 3) throw ConfigError("n must be at least 3");
        res.replications = cfg.replications;
        res.n = cfg.n;
        run_simulation(cfg, res);
    } else {
        run_air(cfg, res);
    }
    return res;
}

std::string experiment_text(const ExperimentResult& r)
{
    std::string s;
    if (!r.rows.empty()) {
        s += "Experiment " + std::string(to_string(r.name)) + ": " + std::to_string(r.replications) +
             " replications of n = " + std::to_string(r.n) + ", seed " + std::to_string(r.seed) + "\n";
        s += "Mean absolute error (standard deviation of the absolute error)\n";
        constexpr std::size_t first = 20, width = 24;
        s += pad_right("", first);
        for (const auto& c : r.rows.front().cells) s += pad_left(c.estimator, width);
        s += "\n";
        for (const auto& row : r.rows) {
            s += pad_right(row.contamination == Contamination::None ? "no contamination" : "Cauchy (2 points)",
                           first);
            for (const auto& c : row.cells)
                s += pad_left(format_round(c.mae) + " (" + format_round(c.sd, 3) + ")", width);
            s += "\n";
        }
    }
    if (r.table) {
        const auto& t = *r.table;
        s += "Experiment " + std::string(to_string(r.name)) + "\n";
        constexpr std::size_t first = 14, width = 18;
        s += pad_right("", first);
        for (const auto& c : t.column_names) s += pad_left(c, width);
        s += "\n";
        for (std::size_t i = 0; i < t.row_names.size(); ++i) {
            s += pad_right(t.row_names[i], first);
            for (const auto& col : t.values) s += pad_left(format_round(col[i]), width);
            s += "\n";
        }
        bool any_aux = false;
        for (const auto& a : t.aux) any_aux = any_aux || a.has_value();
        if (any_aux) {
            s += pad_right("noise std", first);
            for (const auto& a : t.aux) s += pad_left(a ? format_round(*a) : "-", width);
            s += "\n";
        }
        s += "Kernel for y bandwidth: " + format_round(t.bdwth_y) + "\n";
        s += "Kernel for x bandwidth (theta hat): " + format_round(t.bdwth_x) + "\n";
    }
    for (const auto& w : r.warnings) s += "Warning: " + w + "\n";
    return s;
}

std::string experiment_csv(const ExperimentResult& r)
{
    char buf[64];
    std::string s;
    if (!r.rows.empty()) {
        s += "experiment,contamination,estimator,mae,sd\n";
        for (const auto& row : r.rows)
            for (const auto& c : row.cells) {
                s += std::string(to_string(r.name)) + "," + std::string(to_string(row.contamination)) + ",\"" +
                     c.estimator + "\",";
                std::snprintf(buf, sizeof buf, "%.10g,%.10g\n", c.mae, c.sd);
                s += buf;
            }
    }
    if (r.table) {
        const auto& t = *r.table;
        s += "experiment,coefficient";
        for (const auto& c : t.column_names) s += ",\"" + c + "\"";
        s += "\n";
        for (std::size_t i = 0; i < t.row_names.size(); ++i) {
            s += std::string(to_string(r.name)) + ",\"" + t.row_names[i] + "\"";
            for (const auto& col : t.values) {
                std::snprintf(buf, sizeof buf, ",%.10g", col[i]);
                s += buf;
            }
            s += "\n";
        }
    }
    return s;
}

nlohmann::json experiment_json(const ExperimentResult& r)
{
    nlohmann::json j;
    j["experiment"] = std::string(to_string(r.name));
    j["seed"] = r.seed;
    if (!r.rows.empty()) {
        j["replications"] = r.replications;
        j["n"] = r.n;
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& row : r.rows) {
            nlohmann::json cells = nlohmann::json::array();
            for (const auto& c : row.cells) cells.push_back({{"estimator", c.estimator}, {"mae", c.mae}, {"sd", c.sd}});
            rows.push_back({{"contamination", std::string(to_string(row.contamination))}, {"cells", cells}});
        }
        j["rows"] = rows;
    }
    if (r.table) {
        const auto& t = *r.table;
        nlohmann::json cols = nlohmann::json::array();
        for (std::size_t c = 0; c < t.column_names.size(); ++c) {
            nlohmann::json col = {{"method", t.column_names[c]}, {"coefficients", t.values[c]}};
            col["aux"] = t.aux[c] ? nlohmann::json(*t.aux[c]) : nlohmann::json(nullptr);
            cols.push_back(col);
        }
        j["table"] = {{"rows", t.row_names}, {"columns", cols}, {"bandwidths", {{"y", t.bdwth_y}, {"x", t.bdwth_x}}}};
    }
    j["warnings"] = r.warnings;
    return j;
}

std::string experiment_svg(const ExperimentResult& r)
{
    std::vector<std::string> groups, series;
    std::vector<std::vector<double>> values;  // values[group][series]
    std::string title;
    if (!r.rows.empty()) {
        title = std::string(to_string(r.name)) + ": mean absolute error";
        for (const auto& c : r.rows.front().cells) series.push_back(c.estimator);
        for (const auto& row : r.rows) {
            groups.push_back(row.contamination == Contamination::None ? "no contamination" : "Cauchy (2 points)");
            std::vector<double> v;
            for (const auto& c : row.cells) v.push_back(c.mae);
            values.push_back(std::move(v));
        }
    } else if (r.table) {
        title = std::string(to_string(r.name)) + ": coefficients";
        series = r.table->column_names;
        groups = r.table->row_names;
        for (std::size_t i = 0; i < groups.size(); ++i) {
            std::vector<double> v;
            for (const auto& col : r.table->values) v.push_back(col[i]);
            values.push_back(std::move(v));
        }
    }

    double lo = 0.0, hi = 0.0;
    for (const auto& g : values)
        for (double v : g) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (hi == lo) hi = lo + 1.0;
    const double left = 60, top = 40, plot_h = 300, bar_w = 18, gap = 30;
    const double group_w = bar_w * static_cast<double>(series.size()) + gap;
    const double width = left + group_w * static_cast<double>(groups.size()) + 220;
    const double height = top + plot_h + 60;
    auto ypos = [&](double v) { return top + (hi - v) / (hi - lo) * plot_h; };
    static const char* palette[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948"};

    char buf[256];
    std::string s;
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" font-family=\"sans-serif\" "
                  "font-size=\"11\">\n",
                  width, height);
    s += buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"20\" font-size=\"14\">", left);
    s += buf + svg_escape(title) + "</text>\n";
    std::snprintf(buf, sizeof buf, "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", left,
                  ypos(0.0), width - 220, ypos(0.0));
    s += buf;
    for (int k = 0; k <= 4; ++k) {
        const double v = lo + (hi - lo) * k / 4.0;
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%s</text>\n", left - 5,
                      ypos(v) + 4, format_round(v, 3).c_str());
        s += buf;
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const double x0 = left + gap / 2 + group_w * static_cast<double>(g);
        for (std::size_t k = 0; k < series.size(); ++k) {
            const double v = values[g][k];
            const double y0 = std::min(ypos(v), ypos(0.0));
            const double h = std::abs(ypos(v) - ypos(0.0));
            std::snprintf(buf, sizeof buf,
                          "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"%s\"/>\n",
                          x0 + bar_w * static_cast<double>(k), y0, bar_w - 2, h, palette[k % 6]);
            s += buf;
        }
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\">", x0, top + plot_h + 20);
        s += buf + svg_escape(groups[g]) + "</text>\n";
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
        const double y = top + 16.0 * static_cast<double>(k);
        std::snprintf(buf, sizeof buf, "<rect x=\"%.1f\" y=\"%.1f\" width=\"10\" height=\"10\" fill=\"%s\"/>\n",
                      width - 200, y, palette[k % 6]);
        s += buf;
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\">", width - 185, y + 9);
        s += buf + svg_escape(series[k]) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

} // namespace mmdfit::cli
