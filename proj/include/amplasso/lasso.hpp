#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "amplasso/tolerances.hpp"

namespace amplasso {

/// Y = X beta + noise, with X stored column-major.
struct DesignProblem {
    Eigen::MatrixXd X;
    Eigen::VectorXd Y;

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index p() const { return X.cols(); }
    /// Throws std::invalid_argument on inconsistent sizes or non-finite entries.
    void validate() const;
};

struct LassoFit {
    double lambda = 0.0;
    Eigen::VectorXd beta_hat;
    Eigen::Index support_size = 0;
    double duality_gap = 0.0;
    double objective = 0.0;
    long sweeps = 0;
    /// Objective after every sweep, when requested.
    std::vector<double> objective_history;
};

class LassoError : public std::runtime_error {
public:
    LassoError(const std::string& what, double gap) : std::runtime_error(what), gap(gap) {}
    double gap;
};

/// Coordinate-descent solver for (1/2)||Y - Xb||^2 + lambda ||b||_1.
/// Keeps column norms between fits so warm-started paths are cheap.
class LassoSolver {
public:
    explicit LassoSolver(const DesignProblem& problem, const LassoOptions& opts = {});

    LassoFit fit(double lambda) const;
    LassoFit fit(double lambda, const Eigen::VectorXd& warm_start) const;

    const DesignProblem& problem() const { return problem_; }

private:
    const DesignProblem& problem_;
    LassoOptions opts_;
    Eigen::VectorXd col_sq_;
};

LassoFit fit(const DesignProblem& problem, double lambda, const LassoOptions& opts = {});
LassoFit fit(const DesignProblem& problem, double lambda, const Eigen::VectorXd& warm_start,
             const LassoOptions& opts = {});

double lasso_objective(const DesignProblem& problem, const Eigen::VectorXd& beta, double lambda);

/// Largest violation of the optimality conditions: |x_j'r| <= lambda off the
/// support, x_j'r = lambda sign(b_j) on it.
double kkt_violation(const DesignProblem& problem, const Eigen::VectorXd& beta, double lambda);

/// ||X'Y||_inf, the smallest lambda with an all-zero solution.
double lambda_max(const DesignProblem& problem);

/// Log-spaced descending grid from lambda_max down to min_ratio * lambda_max.
std::vector<double> lasso_path_grid(const DesignProblem& problem, int points = 100, double min_ratio = 1e-3);

/// Per variable, the largest grid lambda at which it is active along a
/// warm-started path; 0 when it never enters.
std::vector<double> lasso_max_statistic(const DesignProblem& problem, const std::vector<double>& lambda_grid,
                                        const LassoOptions& opts = {});

struct CvResult {
    double lambda_cv = 0.0;
    /// Ascending lambda grid and the matching mean held-out squared error per observation.
    std::vector<double> lambdas;
    std::vector<double> cv_error;
};

/// 50 log-spaced points on [1e-2, 4].
std::vector<double> default_cv_grid();

/// K-fold cross-validation over the grid. Folds are contiguous blocks of a
/// seeded permutation. Each training design is rescaled to unit expected
/// column norm so the fit is an AMP problem with n_train rows. A fold's
/// descending path stops once its held-out error has failed to improve for
/// `patience` consecutive grid points (0 disables); lambdas it skips get an
/// infinite error and cannot be selected.
CvResult cross_validate(const DesignProblem& problem, int folds, const std::vector<double>& lambda_grid,
                        std::uint64_t seed, const LassoOptions& opts = {}, int patience = 10);

/// CSV with Y in the first column and X in the rest. A non-numeric first line
/// is treated as a header.
DesignProblem read_design_csv(const std::string& path);
void write_design_csv(const std::string& path, const DesignProblem& problem);

}  // namespace amplasso
