#include "amplasso/sim.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "amplasso/log.hpp"
#include "amplasso/rng.hpp"
#include "amplasso/svg_plot.hpp"
#include "json.hpp"

namespace amplasso {

using nlohmann::json;

namespace {

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

const char* method_color(SimMethod m)
{
    switch (m) {
    case SimMethod::lasso_max:
        return "#1f77b4";
    case SimMethod::thresholded_lasso:
        return "#2ca02c";
    case SimMethod::oracle:
        return "#d62728";
    case SimMethod::eb:
        return "#9467bd";
    }
    return "#444444";
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Lambdas for the limiting Lasso path: dense enough near the interesting
// range, and wide enough to run from almost nothing selected to the smallest
// solvable lambda.
std::vector<double> lasso_theory_grid(int points)
{
    return log_grid_descending(50.0, 1e-3, std::max(points, 2));
}

double json_number_or_nan(double v)
{
    return std::isfinite(v) ? v : nan_value;
}

json number(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

}  // namespace

std::string sim_method_name(SimMethod m)
{
    switch (m) {
    case SimMethod::lasso_max:
        return "lasso_max";
    case SimMethod::thresholded_lasso:
        return "thresholded_lasso";
    case SimMethod::oracle:
        return "oracle";
    case SimMethod::eb:
        return "eb";
    }
    return "unknown";
}

SimMethod sim_method_from_name(const std::string& name)
{
    for (auto m : {SimMethod::lasso_max, SimMethod::thresholded_lasso, SimMethod::oracle, SimMethod::eb})
        if (sim_method_name(m) == name)
            return m;
    throw std::invalid_argument("unknown method '" + name +
                                "' (expected lasso_max, thresholded_lasso, oracle or eb)");
}

Eigen::Index ExperimentConfig::n() const
{
    return static_cast<Eigen::Index>(std::llround(delta * double(p)));
}

void ExperimentConfig::validate() const
{
    amplasso::validate(prior);
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("sigma must be finite and nonnegative");
    if (!(delta > 0.0) || !std::isfinite(delta))
        throw std::invalid_argument("delta must be positive");
    if (p < 50)
        throw std::invalid_argument("p must be at least 50");
    if (n() < 2)
        throw std::invalid_argument("n = round(delta p) must be at least 2");
    if (replications < 1)
        throw std::invalid_argument("replications must be at least 1");
    if (methods.empty())
        throw std::invalid_argument("at least one method is required");
    if (tpp_grid_points < 2)
        throw std::invalid_argument("tpp grid needs at least 2 points");
    if (!(tpp_grid_fraction > 0.0 && tpp_grid_fraction <= 1.0))
        throw std::invalid_argument("tpp_grid_fraction must lie in (0, 1]");
    if (lambda.kind == LambdaPolicy::Kind::fixed && !(lambda.value > 0.0))
        throw std::invalid_argument("fixed lambda must be positive");
    if (lambda.kind == LambdaPolicy::Kind::cv && (lambda.folds < 2 || lambda.folds > n()))
        throw std::invalid_argument("cv folds must lie in [2, n]");
    if (bandwidth && !(*bandwidth > 0.0))
        throw std::invalid_argument("bandwidth must be positive");
    if (!(bandwidth_scale > 0.0) || !std::isfinite(bandwidth_scale))
        throw std::invalid_argument("bandwidth_scale must be positive");
}

ExperimentConfig experiment_from_json_text(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("experiment config is not valid JSON: ") + e.what());
    }
    static const std::vector<std::string> known = {
        "name",      "prior",           "sigma",           "delta",
        "p",         "lambda",          "replications",    "seed",
        "methods",   "tpp_grid_points", "tpp_grid_fraction", "lasso_max_grid_points",
        "lasso_max_min_ratio", "bandwidth", "bandwidth_scale", "svg"};
    for (const auto& [key, value] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::invalid_argument("unknown experiment key '" + key + "'");
    if (!j.contains("prior") || !j.contains("delta") || !j.contains("p"))
        throw std::invalid_argument("experiment config needs prior, delta and p");

    ExperimentConfig c;
    try {
        c.name = j.value("name", c.name);
        c.prior = prior_from_json_text(j.at("prior").dump());
        c.sigma = j.value("sigma", c.sigma);
        c.delta = j.at("delta").get<double>();
        c.p = j.at("p").get<Eigen::Index>();
        c.replications = j.value("replications", c.replications);
        c.seed = j.value("seed", c.seed);
        c.tpp_grid_points = j.value("tpp_grid_points", c.tpp_grid_points);
        c.tpp_grid_fraction = j.value("tpp_grid_fraction", c.tpp_grid_fraction);
        c.lasso_max_grid_points = j.value("lasso_max_grid_points", c.lasso_max_grid_points);
        c.lasso_max_min_ratio = j.value("lasso_max_min_ratio", c.lasso_max_min_ratio);
        c.svg = j.value("svg", c.svg);
        c.bandwidth_scale = j.value("bandwidth_scale", c.bandwidth_scale);
        if (j.contains("bandwidth") && !j.at("bandwidth").is_null())
            c.bandwidth = j.at("bandwidth").get<double>();
        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& m : j.at("methods"))
                c.methods.push_back(sim_method_from_name(m.get<std::string>()));
        }
        if (j.contains("lambda")) {
            const auto& l = j.at("lambda");
            if (l.is_number()) {
                c.lambda.value = l.get<double>();
            } else {
                const auto policy = l.value("policy", std::string("fixed"));
                if (policy == "fixed") {
                    if (l.contains("folds") || l.contains("grid"))
                        throw std::invalid_argument("fixed lambda policy takes no folds or grid");
                    c.lambda.value = l.at("value").get<double>();
                } else if (policy == "cv") {
                    if (l.contains("value"))
                        throw std::invalid_argument("cv lambda policy takes no fixed value");
                    c.lambda.kind = LambdaPolicy::Kind::cv;
                    c.lambda.folds = l.value("folds", c.lambda.folds);
                    if (l.contains("grid"))
                        c.lambda.grid = l.at("grid").get<std::vector<double>>();
                } else {
                    throw std::invalid_argument("lambda policy must be 'fixed' or 'cv'");
                }
            }
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_experiment(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open experiment config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return experiment_from_json_text(ss.str());
}

std::string experiment_to_json_text(const ExperimentConfig& c)
{
    json j;
    j["name"] = c.name;
    j["prior"] = json::parse(prior_to_json_text(c.prior));
    j["sigma"] = c.sigma;
    j["delta"] = c.delta;
    j["p"] = c.p;
    if (c.lambda.kind == LambdaPolicy::Kind::fixed) {
        j["lambda"] = {{"policy", "fixed"}, {"value", c.lambda.value}};
    } else {
        j["lambda"] = {{"policy", "cv"}, {"folds", c.lambda.folds}};
        if (!c.lambda.grid.empty())
            j["lambda"]["grid"] = c.lambda.grid;
    }
    j["replications"] = c.replications;
    j["seed"] = c.seed;
    j["methods"] = json::array();
    for (auto m : c.methods)
        j["methods"].push_back(sim_method_name(m));
    j["tpp_grid_points"] = c.tpp_grid_points;
    j["tpp_grid_fraction"] = c.tpp_grid_fraction;
    j["lasso_max_grid_points"] = c.lasso_max_grid_points;
    j["lasso_max_min_ratio"] = c.lasso_max_min_ratio;
    j["bandwidth"] = c.bandwidth ? json(*c.bandwidth) : json(nullptr);
    j["bandwidth_scale"] = c.bandwidth_scale;
    j["svg"] = c.svg;
    return j.dump(2);
}

Dataset generate(const ExperimentConfig& config, int replication)
{
    const Eigen::Index n = config.n();
    const Eigen::Index p = config.p;
    const auto rep = static_cast<std::uint64_t>(replication);
    Rng prior_rng = make_stream(config.seed, rep, Stream::prior);
    Rng design_rng = make_stream(config.seed, rep, Stream::design);
    Rng noise_rng = make_stream(config.seed, rep, Stream::noise);
    std::normal_distribution<double> z(0.0, 1.0);

    Dataset out;
    out.problem.X.resize(n, p);
    const double scale = 1.0 / std::sqrt(double(n));
    double* data = out.problem.X.data();
    for (Eigen::Index k = 0; k < n * p; ++k)
        data[k] = scale * z(design_rng);
    const auto draws = sample_prior(config.prior, static_cast<std::size_t>(p), prior_rng);
    out.beta = Eigen::Map<const Eigen::VectorXd>(draws.data(), p);
    out.problem.Y = out.problem.X * out.beta;
    if (config.sigma > 0.0)
        for (Eigen::Index i = 0; i < n; ++i)
            out.problem.Y[i] += config.sigma * z(noise_rng);
    return out;
}

double step_fdp_at(const std::vector<EmpiricalPoint>& curve, double tpp)
{
    for (const auto& pt : curve)
        if (pt.tpp >= tpp)
            return pt.fdp;
    return nan_value;
}

TradeoffCurve theory_curve(SimMethod method, const SeModel& model, const SeSolution& sol, double lambda, int points,
                           const Tolerances& tol)
{
    switch (method) {
    case SimMethod::lasso_max:
        return lasso_curve(model, lasso_theory_grid(points), tol.se);
    case SimMethod::thresholded_lasso: {
        auto c = thresholded_lasso_curve(model.prior, sol, lambda, points);
        return c;
    }
    case SimMethod::oracle:
    case SimMethod::eb:
        return oracle_curve(DensityPair::from_solution(model.prior, sol), lambda, points, tol.level_set);
    }
    throw std::logic_error("unhandled method");
}

RunRecord run_replication(const ExperimentConfig& config, int replication, const Tolerances& tol)
{
    const auto start = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.replication = replication;
    try {
        const Dataset data = generate(config, replication);
        const auto truth = null_labels(data.beta);

        if (config.lambda.kind == LambdaPolicy::Kind::cv) {
            const auto grid = config.lambda.grid.empty() ? default_cv_grid() : config.lambda.grid;
            const auto fold_seed = make_stream(config.seed, static_cast<std::uint64_t>(replication), Stream::folds)();
            rec.lambda = cross_validate(data.problem, config.lambda.folds, grid, fold_seed, tol.lasso).lambda_cv;
        } else {
            rec.lambda = config.lambda.value;
        }

        const LassoSolver solver(data.problem, tol.lasso);
        const LassoFit fitted = solver.fit(rec.lambda);
        const auto& beta_hat = fitted.beta_hat;

        const bool needs_solution = std::any_of(config.methods.begin(), config.methods.end(),
                                                [](SimMethod m) { return m == SimMethod::oracle; });
        if (needs_solution)
            rec.solution = solve({config.prior, config.sigma, config.delta, rec.lambda}, tol.se);

        const bool needs_eb = std::find(config.methods.begin(), config.methods.end(), SimMethod::eb) !=
                              config.methods.end();
        std::optional<KernelDensity> q_hat;
        if (needs_eb) {
            rec.estimates = estimate(data.problem, fitted, config.bandwidth);
            if (!config.bandwidth)
                rec.estimates.bandwidth *= config.bandwidth_scale;
            q_hat.emplace(beta_hat, rec.estimates.bandwidth);
        }

        for (SimMethod m : config.methods) {
            SelectionPath path;
            switch (m) {
            case SimMethod::eb:
                path = eb_path(beta_hat, rec.estimates, *q_hat, truth);
                break;
            case SimMethod::oracle:
                path = oracle_path(beta_hat, DensityPair::from_solution(config.prior, rec.solution), truth);
                break;
            case SimMethod::thresholded_lasso:
                path = thresholded_path(beta_hat, truth);
                break;
            case SimMethod::lasso_max: {
                const auto grid =
                    lasso_path_grid(data.problem, config.lasso_max_grid_points, config.lasso_max_min_ratio);
                path = lasso_max_path(lasso_max_statistic(data.problem, grid, tol.lasso), truth);
                break;
            }
            }
            rec.curves.push_back({m, empirical_tradeoff(path)});
        }
        rec.ok = true;
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
    }
    rec.seconds = seconds_since(start);
    return rec;
}

std::vector<double> mean_curve(const std::vector<RunRecord>& records, SimMethod method,
                               const std::vector<double>& tpp_grid)
{
    std::vector<double> sum(tpp_grid.size(), 0.0);
    std::vector<int> count(tpp_grid.size(), 0);
    for (const auto& rec : records) {
        if (!rec.ok)
            continue;
        for (const auto& c : rec.curves) {
            if (c.method != method)
                continue;
            for (std::size_t g = 0; g < tpp_grid.size(); ++g) {
                const double f = step_fdp_at(c.points, tpp_grid[g]);
                if (!std::isnan(f)) {
                    sum[g] += f;
                    ++count[g];
                }
            }
        }
    }
    std::vector<double> out(tpp_grid.size());
    for (std::size_t g = 0; g < tpp_grid.size(); ++g)
        out[g] = count[g] > 0 ? sum[g] / count[g] : nan_value;
    return out;
}

const MethodSummary* RunReport::summary(SimMethod m) const
{
    for (const auto& s : summaries)
        if (s.method == m)
            return &s;
    return nullptr;
}

RunReport run(const ExperimentConfig& config, int threads, const Tolerances& tol)
{
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    RunReport report;
    report.config = config;
    report.records.resize(config.replications);

    const int workers = std::max(1, std::min(threads, config.replications));
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (int r = next++; r < config.replications; r = next++)
            report.records[r] = run_replication(config, r, tol);
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < workers; ++k)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }

    for (const auto& rec : report.records) {
        if (!rec.ok) {
            report.failures.push_back("replication " + std::to_string(rec.replication) + ": " + rec.error);
            log_warning("replication " + std::to_string(rec.replication) + " failed: " + rec.error);
        }
    }

    const SeModel model{config.prior, config.sigma, config.delta};
    if (config.lambda.kind == LambdaPolicy::Kind::cv)
        report.theory_lambda = optimal_lambda(model, cv_effective_delta(config.delta, config.lambda.folds), tol.se).lambda;
    else
        report.theory_lambda = config.lambda.value;
    report.theory_solution = solve({config.prior, config.sigma, config.delta, report.theory_lambda}, tol.se);

    for (SimMethod m : config.methods) {
        MethodSummary s;
        s.method = m;
        s.theory = theory_curve(m, model, report.theory_solution, report.theory_lambda, config.tpp_grid_points, tol);
        // The mean curve is only taken where every replication has a value.
        double top = s.theory.points.empty() ? 0.0 : s.theory.points.back().tpp;
        for (const auto& rec : report.records) {
            if (!rec.ok)
                continue;
            for (const auto& c : rec.curves)
                if (c.method == m && !c.points.empty()) {
                    top = std::min(top, c.points.back().tpp);
                    ++s.replications_used;
                }
        }
        const double hi = config.tpp_grid_fraction * top;
        for (int k = 1; k <= config.tpp_grid_points; ++k)
            s.tpp_grid.push_back(hi * k / config.tpp_grid_points);
        s.mean_fdp = mean_curve(report.records, m, s.tpp_grid);

        double total = 0.0;
        int used = 0;
        for (std::size_t g = 0; g < s.tpp_grid.size(); ++g) {
            s.theory_fdp.push_back(fdp_at_tpp(s.theory, s.tpp_grid[g]));
            const double d = std::abs(s.mean_fdp[g] - s.theory_fdp[g]);
            if (std::isfinite(d)) {
                total += d;
                ++used;
                s.sup_deviation = std::max(s.sup_deviation, d);
            }
        }
        s.mean_abs_deviation = used > 0 ? total / used : nan_value;
        report.summaries.push_back(std::move(s));
    }

    const auto* eb = report.summary(SimMethod::eb);
    const auto* oracle = report.summary(SimMethod::oracle);
    if (eb && oracle) {
        const auto& grid = eb->tpp_grid.back() <= oracle->tpp_grid.back() ? eb->tpp_grid : oracle->tpp_grid;
        const auto eb_mean = mean_curve(report.records, SimMethod::eb, grid);
        const auto oracle_mean = mean_curve(report.records, SimMethod::oracle, grid);
        double sup = 0.0;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const double d = std::abs(eb_mean[g] - oracle_mean[g]);
            if (std::isfinite(d))
                sup = std::max(sup, d);
        }
        report.eb_oracle_sup = sup;
    }
    report.seconds = seconds_since(start);
    return report;
}

void write_run_outputs(const RunReport& report, const std::string& dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto open = [&](const std::string& file) {
        std::ofstream out(fs::path(dir) / file);
        if (!out)
            throw std::runtime_error("cannot write " + (fs::path(dir) / file).string());
        out.precision(12);
        return out;
    };

    for (const auto& rec : report.records) {
        for (const auto& c : rec.curves) {
            auto out = open("rep" + std::to_string(rec.replication) + "_" + sim_method_name(c.method) + ".csv");
            out << "threshold,tpp,fdp\n";
            for (const auto& pt : c.points)
                out << json_number_or_nan(pt.threshold) << ',' << pt.tpp << ',' << pt.fdp << '\n';
        }
    }
    for (const auto& s : report.summaries) {
        auto out = open("theory_" + sim_method_name(s.method) + ".csv");
        out << "threshold,tpp,fdp\n";
        for (const auto& pt : s.theory.points)
            out << pt.threshold << ',' << pt.tpp << ',' << pt.fdp << '\n';
        auto mean = open("mean_" + sim_method_name(s.method) + ".csv");
        mean << "tpp,fdp,theory_fdp\n";
        for (std::size_t g = 0; g < s.tpp_grid.size(); ++g)
            mean << s.tpp_grid[g] << ',' << s.mean_fdp[g] << ',' << s.theory_fdp[g] << '\n';
    }

    json j;
    j["config"] = json::parse(experiment_to_json_text(report.config));
    j["n"] = report.config.n();
    j["theory_lambda"] = report.theory_lambda;
    j["theory_alpha"] = report.theory_solution.alpha;
    j["theory_tau"] = report.theory_solution.tau;
    j["seconds"] = report.seconds;
    j["failures"] = report.failures;
    j["eb_oracle_sup"] = report.eb_oracle_sup ? json(*report.eb_oracle_sup) : json(nullptr);
    j["methods"] = json::object();
    for (const auto& s : report.summaries)
        j["methods"][sim_method_name(s.method)] = {{"mean_abs_deviation", number(s.mean_abs_deviation)},
                                                   {"sup_deviation", number(s.sup_deviation)},
                                                   {"replications_used", s.replications_used}};
    j["replications"] = json::array();
    for (const auto& rec : report.records) {
        json r = {{"replication", rec.replication}, {"ok", rec.ok}, {"seconds", rec.seconds}};
        if (!rec.ok) {
            r["error"] = rec.error;
        } else {
            r["lambda"] = rec.lambda;
            if (rec.solution.tau > 0.0)
                r["solution"] = {{"alpha", rec.solution.alpha}, {"tau", rec.solution.tau}};
            if (rec.estimates.tau_hat > 0.0)
                r["estimates"] = {{"tau_hat", rec.estimates.tau_hat},
                                  {"alpha_tau_hat", rec.estimates.alpha_tau_hat},
                                  {"eps_hat", rec.estimates.eps_hat},
                                  {"w_hat", rec.estimates.w_hat},
                                  {"bandwidth", rec.estimates.bandwidth}};
        }
        j["replications"].push_back(r);
    }
    open("summary.json") << j.dump(2) << '\n';

    if (!report.config.svg)
        return;
    // Plots are drawn from the CSV files just written.
    for (const auto& s : report.summaries) {
        const std::string name = sim_method_name(s.method);
        std::vector<PlotSeries> series;
        for (const auto& rec : report.records) {
            if (!rec.ok)
                continue;
            PlotSeries rep_series;
            rep_series.color = "#bbbbbb";
            read_csv_columns((fs::path(dir) / ("rep" + std::to_string(rec.replication) + "_" + name + ".csv")).string(),
                             "tpp", "fdp", rep_series.x, rep_series.y);
            series.push_back(std::move(rep_series));
        }
        PlotSeries mean{"mean " + name, {}, {}, method_color(s.method), false, 2.0};
        read_csv_columns((fs::path(dir) / ("mean_" + name + ".csv")).string(), "tpp", "fdp", mean.x, mean.y);
        PlotSeries theory{"theory", {}, {}, "#000000", true, 1.5};
        read_csv_columns((fs::path(dir) / ("theory_" + name + ".csv")).string(), "tpp", "fdp", theory.x, theory.y);
        series.push_back(std::move(mean));
        series.push_back(std::move(theory));
        open("curves_" + name + ".svg") << render_svg(report.config.name + ": " + name, "TPP", "FDP", series);
    }
}

double windowed_fdp(const Eigen::VectorXd& beta_hat, const std::vector<bool>& is_null, double center,
                    double half_width)
{
    const double lo = center - half_width;
    const double hi = center + half_width;
    if (!(half_width > 0.0))
        throw std::invalid_argument("window half-width must be positive");
    if (lo <= 0.0 && hi >= 0.0)
        throw std::domain_error("window [" + std::to_string(lo) + ", " + std::to_string(hi) + "] contains zero");
    if (static_cast<std::size_t>(beta_hat.size()) != is_null.size())
        throw std::invalid_argument("estimates and truth labels differ in length");
    long inside = 0;
    long nulls = 0;
    for (Eigen::Index i = 0; i < beta_hat.size(); ++i) {
        if (beta_hat[i] >= lo && beta_hat[i] <= hi) {
            ++inside;
            nulls += is_null[i] ? 1 : 0;
        }
    }
    return inside > 0 ? double(nulls) / double(inside) : 0.0;
}

}  // namespace amplasso
