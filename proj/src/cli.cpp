#include "amplasso/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "amplasso/eb_select.hpp"
#include "amplasso/lasso.hpp"
#include "amplasso/log.hpp"
#include "amplasso/prior.hpp"
#include "amplasso/sim.hpp"
#include "amplasso/state_evolution.hpp"
#include "amplasso/theory.hpp"
#include "amplasso/tolerances.hpp"
#include "json.hpp"

namespace amplasso {

using nlohmann::json;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::string tol_config;
    bool verbose = false;
    bool quiet = false;
    Tolerances tol;

    std::uint64_t seed_or(std::uint64_t fallback) const { return seed.value_or(fallback); }
};

struct ModelArgs {
    std::string prior_path;
    double sigma = 1.0;
    double delta = 0.0;
};

void add_model_options(CLI::App* cmd, ModelArgs& m)
{
    cmd->add_option("--prior", m.prior_path, "Prior JSON file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--sigma", m.sigma, "Noise level")->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd->add_option("--delta", m.delta, "Sampling ratio n/p")->required()->check(CLI::PositiveNumber);
}

SeModel load_model(const ModelArgs& m)
{
    return {load_prior(m.prior_path), m.sigma, m.delta};
}

json number(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

/// "lo,hi,count" as an evenly spaced grid.
std::vector<double> parse_grid(const std::string& text)
{
    std::stringstream ss(text);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, ','))
        parts.push_back(part);
    if (parts.size() != 3)
        throw std::invalid_argument("grid must be given as lo,hi,count");
    try {
        const double lo = std::stod(parts[0]);
        const double hi = std::stod(parts[1]);
        const int count = std::stoi(parts[2]);
        if (!(hi > lo) || count < 2)
            throw std::invalid_argument("grid needs hi > lo and count >= 2");
        return linear_grid(lo, hi, count);
    } catch (const std::logic_error&) {
        throw std::invalid_argument("grid must be given as lo,hi,count");
    }
}

/// A fixed positive value or "cv".
struct LambdaChoice {
    double lambda = 0.0;
    bool from_cv = false;
};

LambdaChoice choose_lambda(const std::string& text, const DesignProblem& problem, int folds, const Globals& g)
{
    if (text == "cv") {
        const auto cv = cross_validate(problem, folds, default_cv_grid(), g.seed_or(1), g.tol.lasso);
        return {cv.lambda_cv, true};
    }
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &used);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used != text.size() || !(value > 0.0))
        throw std::invalid_argument("--lambda must be a positive number or 'cv'");
    return {value, false};
}

std::vector<bool> read_truth(const std::string& path, Eigen::Index p)
{
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open truth file " + path);
    std::vector<bool> is_null;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        try {
            std::size_t used = 0;
            const double b = std::stod(line, &used);
            is_null.push_back(b == 0.0);
        } catch (const std::logic_error&) {
            if (!first)
                throw std::invalid_argument("truth file has a non-numeric row: " + line);
        }
        first = false;
    }
    if (static_cast<Eigen::Index>(is_null.size()) != p)
        throw std::invalid_argument("truth file has " + std::to_string(is_null.size()) + " values, data has p = " +
                                    std::to_string(p));
    return is_null;
}

/// Output to a file when a path is given, else to the command's stream.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback)
    {
        if (!path.empty()) {
            file_.open(path);
            if (!file_)
                throw std::runtime_error("cannot write " + path);
            stream_ = &file_;
        }
        stream_->precision(12);
    }
    std::ostream& operator*() { return *stream_; }

private:
    std::ofstream file_;
    std::ostream* stream_;
};

void write_curve(std::ostream& os, const TradeoffCurve& curve)
{
    os << "threshold,tpp,fdp\n";
    for (const auto& pt : curve.points)
        os << pt.threshold << ',' << pt.tpp << ',' << pt.fdp << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"AMP analysis of Lasso variable selection", "amplasso"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    Globals g;
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Master seed for random streams");
    app.add_option("--threads", g.threads, "Worker cap for simulations")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--tol-config", g.tol_config, "JSON file overriding numerical tolerances")
        ->check(CLI::ExistingFile);
    app.add_flag("-v,--verbose", g.verbose, "Progress messages on stderr");
    app.add_flag("-q,--quiet", g.quiet, "Suppress warnings");

    std::function<void()> action;
    auto configure = [&](CLI::App* cmd) { cmd->fallthrough(); };

    // se
    auto* se = app.add_subcommand("se", "State-evolution fixed point");
    se->require_subcommand(1);
    configure(se);

    ModelArgs solve_model;
    double solve_lambda = 0.0;
    auto* se_solve = se->add_subcommand("solve", "Solve for (alpha, tau) at a lambda");
    configure(se_solve);
    add_model_options(se_solve, solve_model);
    se_solve->add_option("--lambda", solve_lambda, "Regularization")->required()->check(CLI::PositiveNumber);
    se_solve->callback([&] {
        action = [&] {
            const auto model = load_model(solve_model);
            const auto sol = solve({model.prior, model.sigma, model.delta, solve_lambda}, g.tol.se);
            json j = {{"lambda", solve_lambda},
                      {"alpha", sol.alpha},
                      {"tau", sol.tau},
                      {"residuals", {{"tau", sol.residual_tau}, {"lambda", sol.residual_lambda}}}};
            out << j.dump(2) << '\n';
        };
    });

    ModelArgs opt_model;
    std::optional<int> opt_folds;
    auto* se_opt = se->add_subcommand("optimal-lambda", "Lambda minimizing tau, or its K-fold CV limit");
    configure(se_opt);
    add_model_options(se_opt, opt_model);
    se_opt->add_option("--kfold", opt_folds, "Report the K-fold cross-validation limit")->check(CLI::Range(2, 1000000));
    se_opt->add_option("--lambda-lo", g.tol.se.opt_lambda_lo, "Lower end of the search bracket")
        ->capture_default_str();
    se_opt->add_option("--lambda-hi", g.tol.se.opt_lambda_hi, "Upper end of the search bracket")
        ->capture_default_str();
    se_opt->callback([&] {
        action = [&] {
            const auto model = load_model(opt_model);
            const double eff = opt_folds ? cv_effective_delta(model.delta, *opt_folds) : model.delta;
            const auto r = optimal_lambda(model, eff, g.tol.se);
            json j = {{"lambda", r.lambda},
                      {"alpha", r.alpha},
                      {"tau", r.tau},
                      {"effective_delta", r.effective_delta},
                      {"kfold", opt_folds ? json(*opt_folds) : json(nullptr)},
                      {"mse", asymptotic_mse({model.prior, model.sigma, eff}, r.alpha, r.tau)},
                      {"stationarity_residual", r.stationarity_residual}};
            out << j.dump(2) << '\n';
        };
    });

    // theory
    auto* theory = app.add_subcommand("theory", "Limiting tradeoff curves and lfdr");
    theory->require_subcommand(1);
    configure(theory);

    ModelArgs curve_model;
    std::string curve_method;
    std::optional<double> curve_lambda;
    int curve_points = 200;
    double curve_lambda_min = 1e-3;
    double curve_lambda_max = 50.0;
    std::string curve_out;
    auto* theory_curve_cmd = theory->add_subcommand("curve", "Limiting (tpp, fdp) curve as CSV");
    configure(theory_curve_cmd);
    add_model_options(theory_curve_cmd, curve_model);
    theory_curve_cmd->add_option("--method", curve_method, "lasso, tlasso, eb or oracle")
        ->required()
        ->check(CLI::IsMember({"lasso", "tlasso", "eb", "oracle"}));
    theory_curve_cmd->add_option("--lambda", curve_lambda, "Regularization (not used by lasso)")
        ->check(CLI::PositiveNumber);
    theory_curve_cmd->add_option("--grid", curve_points, "Number of curve points")
        ->capture_default_str()
        ->check(CLI::Range(2, 1000000));
    theory_curve_cmd->add_option("--lambda-min", curve_lambda_min, "Smallest lambda of the lasso path")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    theory_curve_cmd->add_option("--lambda-max", curve_lambda_max, "Largest lambda of the lasso path")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    theory_curve_cmd->add_option("--out", curve_out, "CSV file (default stdout)");
    theory_curve_cmd->callback([&] {
        action = [&] {
            if (curve_method != "lasso" && !curve_lambda)
                throw std::invalid_argument("--lambda is required for method " + curve_method);
            if (curve_method == "lasso" && !(curve_lambda_max > curve_lambda_min))
                throw std::invalid_argument("--lambda-max must exceed --lambda-min");
            const auto model = load_model(curve_model);
            TradeoffCurve curve;
            if (curve_method == "lasso") {
                curve = lasso_curve(model, log_grid_descending(curve_lambda_max, curve_lambda_min, curve_points),
                                    g.tol.se);
            } else {
                const auto sol = solve({model.prior, model.sigma, model.delta, *curve_lambda}, g.tol.se);
                if (curve_method == "tlasso")
                    curve = thresholded_lasso_curve(model.prior, sol, *curve_lambda, curve_points);
                else
                    curve = oracle_curve(DensityPair::from_solution(model.prior, sol), *curve_lambda, curve_points,
                                         g.tol.level_set);
            }
            Sink sink(curve_out, out);
            write_curve(*sink, curve);
        };
    });

    ModelArgs lfdr_model;
    double lfdr_lambda = 0.0;
    std::string lfdr_grid = "-8,8,161";
    std::string lfdr_out;
    auto* theory_lfdr = theory->add_subcommand("lfdr", "Limiting lfdr and plug-in limit on an x grid");
    configure(theory_lfdr);
    add_model_options(theory_lfdr, lfdr_model);
    theory_lfdr->add_option("--lambda", lfdr_lambda, "Regularization")->required()->check(CLI::PositiveNumber);
    theory_lfdr->add_option("--x-grid", lfdr_grid, "lo,hi,count; zero is skipped")->capture_default_str();
    theory_lfdr->add_option("--out", lfdr_out, "CSV file (default stdout)");
    theory_lfdr->callback([&] {
        action = [&] {
            const auto grid = parse_grid(lfdr_grid);
            const auto model = load_model(lfdr_model);
            const auto sol = solve({model.prior, model.sigma, model.delta, lfdr_lambda}, g.tol.se);
            const auto dens = DensityPair::from_solution(model.prior, sol);
            Sink sink(lfdr_out, out);
            *sink << "x,lfdr,lfdr_hat_limit\n";
            for (double x : grid)
                if (x != 0.0)
                    *sink << x << ',' << lfdr(x, dens) << ',' << lfdr_hat_limit(x, dens) << '\n';
        };
    });

    // lasso
    auto* lasso = app.add_subcommand("lasso", "Lasso fits on CSV data");
    lasso->require_subcommand(1);
    configure(lasso);
    std::string fit_data;
    std::string fit_lambda;
    int fit_folds = 10;
    auto* lasso_fit = lasso->add_subcommand("fit", "Fit at one lambda; JSON summary with coefficients");
    configure(lasso_fit);
    lasso_fit->add_option("--data", fit_data, "CSV with y then the columns of X")
        ->required()
        ->check(CLI::ExistingFile);
    lasso_fit->add_option("--lambda", fit_lambda, "Positive value or 'cv'")->required();
    lasso_fit->add_option("--folds", fit_folds, "Folds when --lambda cv")->capture_default_str();
    lasso_fit->callback([&] {
        action = [&] {
            const auto problem = read_design_csv(fit_data);
            const auto choice = choose_lambda(fit_lambda, problem, fit_folds, g);
            const auto f = fit(problem, choice.lambda, g.tol.lasso);
            json j = {{"lambda", f.lambda},
                      {"lambda_source", choice.from_cv ? "cv" : "fixed"},
                      {"n", problem.n()},
                      {"p", problem.p()},
                      {"support_size", f.support_size},
                      {"objective", f.objective},
                      {"duality_gap", f.duality_gap},
                      {"kkt_violation", kkt_violation(problem, f.beta_hat, f.lambda)},
                      {"sweeps", f.sweeps},
                      {"beta_hat", std::vector<double>(f.beta_hat.begin(), f.beta_hat.end())}};
            out << j.dump(2) << '\n';
        };
    });

    // eb
    auto* eb = app.add_subcommand("eb", "Empirical-Bayes lfdr selection");
    eb->require_subcommand(1);
    configure(eb);
    std::string eb_data;
    std::string eb_lambda;
    int eb_folds = 10;
    std::optional<double> eb_bandwidth;
    std::string eb_truth;
    std::string eb_emit;
    auto* eb_select = eb->add_subcommand("select", "Selection path ordered by the estimated lfdr");
    configure(eb_select);
    eb_select->add_option("--data", eb_data, "CSV with y then the columns of X")
        ->required()
        ->check(CLI::ExistingFile);
    eb_select->add_option("--lambda", eb_lambda, "Positive value or 'cv'")->required();
    eb_select->add_option("--folds", eb_folds, "Folds when --lambda cv")->capture_default_str();
    eb_select->add_option("--bandwidth", eb_bandwidth, "Kernel bandwidth (default rule otherwise)")
        ->check(CLI::PositiveNumber);
    eb_select->add_option("--truth", eb_truth, "True coefficients, one per line, to label nulls")
        ->check(CLI::ExistingFile);
    eb_select->add_option("--emit", eb_emit, "Path CSV (default stdout); estimates then go to stdout as JSON");
    eb_select->callback([&] {
        action = [&] {
            const auto problem = read_design_csv(eb_data);
            const bool labelled = !eb_truth.empty();
            const auto truth = labelled ? read_truth(eb_truth, problem.p()) : std::vector<bool>(problem.p(), false);
            const auto choice = choose_lambda(eb_lambda, problem, eb_folds, g);
            const auto f = fit(problem, choice.lambda, g.tol.lasso);
            const auto est = estimate(problem, f, eb_bandwidth);
            const KernelDensity q_hat(f.beta_hat, est.bandwidth);
            const auto path = eb_path(f.beta_hat, est, q_hat, truth);
            {
                Sink sink(eb_emit, out);
                *sink << "index,beta_hat,statistic,is_null\n";
                for (auto i : path.order) {
                    *sink << i << ',' << f.beta_hat[i] << ',' << path.statistic[i] << ',';
                    if (labelled)
                        *sink << (truth[i] ? 1 : 0);
                    else
                        *sink << "NA";
                    *sink << '\n';
                }
            }
            if (!eb_emit.empty()) {
                json j = {{"lambda", est.lambda},
                          {"lambda_source", choice.from_cv ? "cv" : "fixed"},
                          {"support_size", est.support_size},
                          {"w_hat", est.w_hat},
                          {"tau_hat", est.tau_hat},
                          {"alpha_tau_hat", est.alpha_tau_hat},
                          {"alpha_hat", est.alpha_hat},
                          {"w0_hat", est.w0_hat},
                          {"eps_hat", est.eps_hat},
                          {"eps_hat_raw", number(est.eps_hat_raw)},
                          {"bandwidth", est.bandwidth},
                          {"path", eb_emit}};
                out << j.dump(2) << '\n';
            }
        };
    });

    // lfdr on data
    std::string ld_data;
    std::string ld_lambda;
    int ld_folds = 10;
    std::optional<double> ld_bandwidth;
    std::string ld_grid = "-8,8,161";
    std::string ld_out;
    auto* lfdr_cmd = app.add_subcommand("lfdr", "Estimated lfdr and densities from data on an x grid");
    configure(lfdr_cmd);
    lfdr_cmd->add_option("--data", ld_data, "CSV with y then the columns of X")
        ->required()
        ->check(CLI::ExistingFile);
    lfdr_cmd->add_option("--lambda", ld_lambda, "Positive value or 'cv'")->required();
    lfdr_cmd->add_option("--folds", ld_folds, "Folds when --lambda cv")->capture_default_str();
    lfdr_cmd->add_option("--bandwidth", ld_bandwidth, "Kernel bandwidth")->check(CLI::PositiveNumber);
    lfdr_cmd->add_option("--x-grid", ld_grid, "lo,hi,count; zero is skipped")->capture_default_str();
    lfdr_cmd->add_option("--out", ld_out, "CSV file (default stdout)");
    lfdr_cmd->callback([&] {
        action = [&] {
            const auto grid = parse_grid(ld_grid);
            const auto problem = read_design_csv(ld_data);
            const auto choice = choose_lambda(ld_lambda, problem, ld_folds, g);
            const auto f = fit(problem, choice.lambda, g.tol.lasso);
            const auto est = estimate(problem, f, ld_bandwidth);
            const KernelDensity q_hat(f.beta_hat, est.bandwidth);
            Sink sink(ld_out, out);
            *sink << "x,lfdr_hat,q_hat,q0_hat\n";
            for (double x : grid) {
                if (x == 0.0)
                    continue;
                const double q = q_hat(x);
                *sink << x << ',';
                if (q > 0.0)
                    *sink << lfdr_hat(est, q_hat, x);
                else
                    *sink << "nan";
                *sink << ',' << q << ',' << q0_hat(est, x) << '\n';
            }
        };
    });

    // sim
    auto* sim = app.add_subcommand("sim", "Monte Carlo experiments");
    sim->require_subcommand(1);
    configure(sim);
    std::string run_config;
    std::string run_out;
    std::optional<int> run_reps;
    bool run_svg = false;
    auto* sim_run = sim->add_subcommand("run", "Run an experiment config and write its outputs");
    configure(sim_run);
    sim_run->add_option("--config", run_config, "Experiment JSON")->required()->check(CLI::ExistingFile);
    sim_run->add_option("--out", run_out, "Output directory (default runs/<name>)");
    sim_run->add_option("--replications", run_reps, "Override the replication count")->check(CLI::PositiveNumber);
    sim_run->add_flag("--svg", run_svg, "Also write SVG plots");
    sim_run->callback([&] {
        action = [&] {
            auto config = load_experiment(run_config);
            config.seed = g.seed_or(config.seed);
            if (run_reps)
                config.replications = *run_reps;
            config.svg = config.svg || run_svg;
            const std::string dir = run_out.empty() ? "runs/" + config.name : run_out;
            const auto report = run(config, g.threads, g.tol);
            write_run_outputs(report, dir);
            std::ifstream in(std::filesystem::path(dir) / "summary.json");
            auto summary = json::parse(in);
            summary.erase("replications");
            summary["out"] = dir;
            out << summary.dump(2) << '\n';
            if (!report.failures.empty() && report.failures.size() == report.records.size())
                throw std::runtime_error("every replication failed");
        };
    });

    std::string gen_config;
    int gen_rep = 0;
    std::string gen_out;
    std::string gen_truth;
    auto* sim_gen = sim->add_subcommand("generate", "Write one replication's data as CSV");
    configure(sim_gen);
    sim_gen->add_option("--config", gen_config, "Experiment JSON")->required()->check(CLI::ExistingFile);
    sim_gen->add_option("--replication", gen_rep, "Replication index")->capture_default_str()->check(
        CLI::NonNegativeNumber);
    sim_gen->add_option("--out", gen_out, "Data CSV (y then the columns of X)")->required();
    sim_gen->add_option("--truth", gen_truth, "Also write the true coefficients");
    sim_gen->callback([&] {
        action = [&] {
            auto config = load_experiment(gen_config);
            config.seed = g.seed_or(config.seed);
            const auto data = generate(config, gen_rep);
            write_design_csv(gen_out, data.problem);
            if (!gen_truth.empty()) {
                Sink sink(gen_truth, out);
                *sink << "beta\n";
                for (double b : data.beta)
                    *sink << std::setprecision(17) << b << '\n';
            }
            json j = {{"data", gen_out},
                      {"n", data.problem.n()},
                      {"p", data.problem.p()},
                      {"seed", config.seed},
                      {"replication", gen_rep}};
            if (!gen_truth.empty())
                j["truth"] = gen_truth;
            out << j.dump(2) << '\n';
        };
    });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }
    if (seed_opt->count() > 0)
        g.seed = seed_value;
    set_verbose(g.verbose);
    set_quiet(g.quiet);

    try {
        if (!g.tol_config.empty()) {
            // Bracket flags given on the command line win over the file.
            const auto from_cli = g.tol.se;
            g.tol = load_tolerances(g.tol_config);
            if (se_opt->parsed()) {
                if (se_opt->count("--lambda-lo") > 0)
                    g.tol.se.opt_lambda_lo = from_cli.opt_lambda_lo;
                if (se_opt->count("--lambda-hi") > 0)
                    g.tol.se.opt_lambda_hi = from_cli.opt_lambda_hi;
            }
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    }

    if (!action) {
        err << app.help();
        return exit_usage;
    }
    try {
        action();
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_numerical;
    }
    return exit_ok;
}

}  // namespace amplasso
