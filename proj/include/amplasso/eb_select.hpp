#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "amplasso/lasso.hpp"
#include "amplasso/theory.hpp"

namespace amplasso {

/// Plug-in estimates from one Lasso fit.
struct EbEstimates {
    double lambda = 0.0;
    Eigen::Index n = 0;
    Eigen::Index p = 0;
    Eigen::Index support_size = 0;
    /// Fraction of nonzero estimates.
    double w_hat = 0.0;
    double tau_hat = 0.0;
    double alpha_tau_hat = 0.0;
    double alpha_hat = 0.0;
    /// 2(1 - Phi(alpha_hat))
    double w0_hat = 0.0;
    /// Clipped to [0, 1]; eps_hat_raw keeps the unclipped value.
    double eps_hat = 0.0;
    double eps_hat_raw = 0.0;
    double bandwidth = 0.0;
};

/// 0.9 min(sd, IQR/1.34) m^(-1/5) over the given values. Throws when fewer
/// than two values are given or both spread measures vanish.
double default_bandwidth(std::vector<double> values);

/// Throws std::domain_error when the support size reaches n.
EbEstimates estimate(const DesignProblem& problem, const LassoFit& fit,
                     std::optional<double> bandwidth = std::nullopt);

/// (1/(p h)) sum over nonzero beta_hat of phi((x - beta_hat_i)/h).
double kde_q(const Eigen::VectorXd& beta_hat, double h, double x);

/// Same estimator with the nonzero estimates sorted once, so each evaluation
/// only visits points within 12 bandwidths.
class KernelDensity {
public:
    KernelDensity(const Eigen::VectorXd& beta_hat, double h);
    double operator()(double x) const;
    double bandwidth() const { return h_; }

private:
    std::vector<double> points_;
    double h_;
    double p_;
};

/// (1/tau_hat) phi((x + alpha_tau_hat sign(x)) / tau_hat). Throws at x = 0.
double q0_hat(const EbEstimates& est, double x);

/// (1 - eps_hat) q0_hat(x) / q_hat(x), clipped to [0, 1.1] with a warning.
/// Throws std::domain_error at x = 0 or where q_hat vanishes.
double lfdr_hat(const EbEstimates& est, const KernelDensity& q_hat, double x);

enum class Direction { ascending, descending };

/// Variables in selection order. Zero estimates are masked and never selected.
struct SelectionPath {
    std::vector<double> statistic;
    Direction direction = Direction::ascending;
    std::vector<bool> is_null;
    std::vector<bool> zero_mask;
    /// Unmasked variable indices, best first; ties go to the smaller index.
    std::vector<Eigen::Index> order;
};

/// Selection statistic q0_hat/q_hat at every nonzero estimate, ascending.
SelectionPath eb_path(const Eigen::VectorXd& beta_hat, const EbEstimates& est, const KernelDensity& q_hat,
                      const std::vector<bool>& is_null);
/// Oracle statistic q0/q from the limiting densities, ascending.
SelectionPath oracle_path(const Eigen::VectorXd& beta_hat, const DensityPair& dens,
                          const std::vector<bool>& is_null);
/// |beta_hat|, descending.
SelectionPath thresholded_path(const Eigen::VectorXd& beta_hat, const std::vector<bool>& is_null);
/// Lasso-max entry lambdas, descending; variables that never enter are masked.
SelectionPath lasso_max_path(const std::vector<double>& entry_lambda, const std::vector<bool>& is_null);

/// Null labels from true coefficients.
std::vector<bool> null_labels(const Eigen::VectorXd& beta);

struct EmpiricalPoint {
    /// Number of selected variables.
    Eigen::Index k = 0;
    /// Statistic of the k-th selected variable (NaN for k = 0).
    double threshold = 0.0;
    double fdp = 0.0;
    double tpp = 0.0;
};

/// FDP and TPP of every prefix of the path, from k = 0 up to all unmasked
/// variables. Tied statistics are still split one variable at a time.
std::vector<EmpiricalPoint> empirical_tradeoff(const SelectionPath& path);

/// FDP and TPP of an explicit selection; 0/0 counts as 0.
FdpTpp selection_fdp_tpp(const std::vector<Eigen::Index>& selected, const std::vector<bool>& is_null);

}  // namespace amplasso
