#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "amplasso/eb_select.hpp"
#include "amplasso/lasso.hpp"
#include "amplasso/prior.hpp"
#include "amplasso/state_evolution.hpp"
#include "amplasso/theory.hpp"
#include "amplasso/tolerances.hpp"

namespace amplasso {

enum class SimMethod { lasso_max, thresholded_lasso, oracle, eb };

std::string sim_method_name(SimMethod m);
/// Accepts the names above; throws std::invalid_argument otherwise.
SimMethod sim_method_from_name(const std::string& name);

struct LambdaPolicy {
    enum class Kind { fixed, cv };
    Kind kind = Kind::fixed;
    double value = 1.0;
    int folds = 10;
    /// Empty means default_cv_grid().
    std::vector<double> grid;
};

struct ExperimentConfig {
    std::string name = "experiment";
    PriorSpec prior;
    double sigma = 1.0;
    double delta = 1.0;
    Eigen::Index p = 1000;
    LambdaPolicy lambda;
    int replications = 1;
    std::uint64_t seed = 1;
    std::vector<SimMethod> methods = {SimMethod::eb, SimMethod::oracle};
    /// Points on the common tpp grid used for aggregation.
    int tpp_grid_points = 200;
    /// Top of the tpp grid as a fraction of the smaller of the limiting
    /// maximum tpp and the lowest maximum reached by any replication.
    double tpp_grid_fraction = 0.95;
    int lasso_max_grid_points = 100;
    double lasso_max_min_ratio = 1e-3;
    std::optional<double> bandwidth;
    /// Multiplier on the default bandwidth rule; ignored when bandwidth is set.
    double bandwidth_scale = 1.0;
    bool svg = false;

    /// round(delta p)
    Eigen::Index n() const;
    /// Throws std::invalid_argument when the configuration is unusable.
    void validate() const;
};

ExperimentConfig experiment_from_json_text(const std::string& text);
ExperimentConfig load_experiment(const std::string& path);
std::string experiment_to_json_text(const ExperimentConfig& config);

struct Dataset {
    DesignProblem problem;
    Eigen::VectorXd beta;
};

/// X with N(0, 1/n) entries, beta from the prior, Y = X beta + sigma noise.
/// Each replication draws from its own streams.
Dataset generate(const ExperimentConfig& config, int replication);

struct MethodCurve {
    SimMethod method = SimMethod::eb;
    std::vector<EmpiricalPoint> points;
};

struct RunRecord {
    int replication = 0;
    bool ok = false;
    std::string error;
    /// Lambda used for the fit (the CV choice under the cv policy).
    double lambda = 0.0;
    SeSolution solution;
    EbEstimates estimates;
    std::vector<MethodCurve> curves;
    double seconds = 0.0;
};

struct MethodSummary {
    SimMethod method = SimMethod::eb;
    std::vector<double> tpp_grid;
    /// Mean over replications of the step-interpolated empirical fdp. The
    /// grid stops below every replication's largest tpp.
    std::vector<double> mean_fdp;
    std::vector<double> theory_fdp;
    TradeoffCurve theory;
    double mean_abs_deviation = 0.0;
    double sup_deviation = 0.0;
    int replications_used = 0;
};

struct RunReport {
    ExperimentConfig config;
    /// Lambda at which theory curves are evaluated: the fixed value, or
    /// argmin tau(lambda; (K-1) delta / K) under the cv policy.
    double theory_lambda = 0.0;
    SeSolution theory_solution;
    std::vector<RunRecord> records;
    std::vector<MethodSummary> summaries;
    /// Sup distance between mean EB and oracle curves when both ran.
    std::optional<double> eb_oracle_sup;
    std::vector<std::string> failures;
    double seconds = 0.0;

    const MethodSummary* summary(SimMethod m) const;
};

/// Runs one replication end to end. Errors are captured in the record.
RunRecord run_replication(const ExperimentConfig& config, int replication, const Tolerances& tol = {});

/// All replications, spread over up to `threads` workers, then aggregated in
/// replication order. Each worker holds one dataset in memory at a time.
RunReport run(const ExperimentConfig& config, int threads = 1, const Tolerances& tol = {});

/// fdp of the first prefix whose tpp reaches the level; NaN if none does.
double step_fdp_at(const std::vector<EmpiricalPoint>& curve, double tpp);

/// Mean step-interpolated fdp of one method over the successful
/// replications; NaN at levels no replication reaches.
std::vector<double> mean_curve(const std::vector<RunRecord>& records, SimMethod method,
                               const std::vector<double>& tpp_grid);

/// Theory curve matching a simulation method at a solved pair.
TradeoffCurve theory_curve(SimMethod method, const SeModel& model, const SeSolution& sol, double lambda,
                           int points, const Tolerances& tol = {});

/// Writes rep<k>_<method>.csv, theory_<method>.csv, summary.json and, when
/// configured, curves_<method>.svg into dir.
void write_run_outputs(const RunReport& report, const std::string& dir);

/// Fraction of nulls among estimates in [center - half_width, center + half_width];
/// 0 when the window is empty. The window must exclude zero.
double windowed_fdp(const Eigen::VectorXd& beta_hat, const std::vector<bool>& is_null, double center,
                    double half_width);

}  // namespace amplasso
