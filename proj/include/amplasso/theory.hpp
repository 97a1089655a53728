#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "amplasso/prior.hpp"
#include "amplasso/state_evolution.hpp"
#include "amplasso/tolerances.hpp"

namespace amplasso {

/// Unnormalized densities of the nonzero part of eta_{alpha tau}(Pi + tau Z)
/// under the two-groups view: q0 for null coordinates, q1 for non-null ones,
/// and q = (1 - eps) q0 + eps q1 for the mixture. All are defined for x != 0
/// and integrate to the probability of a nonzero estimate.
class DensityPair {
public:
    DensityPair(PriorSpec prior, double alpha, double tau);
    static DensityPair from_solution(const PriorSpec& prior, const SeSolution& sol)
    {
        return DensityPair(prior, sol.alpha, sol.tau);
    }

    double q0(double x) const;
    double q1(double x) const;
    double q(double x) const;
    /// q0(x) / q(x)
    double ratio(double x) const;

    /// Integrals over (a, b); the interval must not contain zero.
    double q0_mass(double a, double b) const;
    double q1_mass(double a, double b) const;
    double q_mass(double a, double b) const;

    /// 2 Phi(-alpha), the null probability of a nonzero estimate.
    double w0() const;
    /// P(|Pi_1 + tau Z| > alpha tau)
    double w1() const;
    /// Marginal probability of a nonzero estimate.
    double w() const;

    double epsilon() const { return prior_.epsilon; }
    double alpha() const { return alpha_; }
    double tau() const { return tau_; }
    const PriorSpec& prior() const { return prior_; }

private:
    // Pre-image of x under the soft threshold, away from the dead zone.
    double unshrink(double x) const;
    void check_interval(double a, double b) const;

    PriorSpec prior_;
    double alpha_;
    double tau_;
};

struct Interval {
    double lo;
    double hi;
    bool contains(double x) const { return x > lo && x < hi; }
};

/// {x : q0(x)/q(x) <= t} as disjoint intervals, each outside (-band, band).
struct LevelSet {
    double threshold = 0.0;
    double zero_band = 0.0;
    std::vector<Interval> intervals;

    bool contains(double x) const;
};

/// Evaluates q0 and q on a dense grid once so level sets for many
/// thresholds of the same DensityPair are cheap.
class LevelSetScanner {
public:
    explicit LevelSetScanner(const DensityPair& dens, const LevelSetConfig& cfg = {});

    LevelSet at(double t) const;
    /// Largest ratio on the scan grid; every nonzero estimate qualifies above it.
    double max_ratio() const { return max_ratio_; }
    double reach() const { return reach_; }
    double zero_band() const { return band_; }
    const DensityPair& densities() const { return dens_; }

private:
    void scan_side(double t, int sign, std::vector<Interval>& out) const;

    DensityPair dens_;
    LevelSetConfig cfg_;
    double band_;
    double reach_;
    std::vector<double> grid_;
    std::vector<double> ratio_pos_;
    std::vector<double> ratio_neg_;
    double max_ratio_ = 0.0;
};

LevelSet level_set(const DensityPair& dens, double t, const LevelSetConfig& cfg = {});

/// (1 - eps) q0(x) / q(x). Throws std::domain_error at x = 0.
double lfdr(double x, const DensityPair& dens);

enum class Method { lasso, thresholded_lasso, oracle_lfdr };

std::string method_name(Method m);

struct TradeoffPoint {
    double threshold = 0.0;
    double tpp = 0.0;
    double fdp = 0.0;
};

/// Points are ordered by increasing tpp.
struct TradeoffCurve {
    Method method = Method::oracle_lfdr;
    double lambda = 0.0;
    std::vector<TradeoffPoint> points;
};

struct FdpTpp {
    double fdp = 0.0;
    double tpp = 0.0;
};

/// Lasso selection limits at the solved pair.
FdpTpp lasso_tradeoff(const PriorSpec& prior, const SeSolution& sol);
FdpTpp lasso_tradeoff(const SeProblem& problem, const SeConfig& cfg = {});

/// Thresholded-Lasso limits: select |beta_hat| > t at fixed lambda.
FdpTpp thresholded_lasso_tradeoff(const PriorSpec& prior, const SeSolution& sol, double t);

/// Oracle (and EB) limits: select q0/q <= t among nonzero estimates.
FdpTpp oracle_tradeoff(const DensityPair& dens, double t, const LevelSetConfig& cfg = {});
FdpTpp oracle_tradeoff(const LevelSetScanner& scanner, double t);

class UnreachableTarget : public std::runtime_error {
public:
    UnreachableTarget(const std::string& what, double max_tpp)
        : std::runtime_error(what), max_tpp(max_tpp)
    {
    }
    double max_tpp;
};

/// Threshold t with tpp*(t) = target, by bisection.
double calibrate_threshold(const DensityPair& dens, double target_tpp, const LevelSetConfig& cfg = {});
double calibrate_threshold(const LevelSetScanner& scanner, double target_tpp, double tol);

/// Largest attainable tpp* (every nonzero estimate selected).
double max_oracle_tpp(const LevelSetScanner& scanner);

/// Curves with n points, evenly spaced in tpp up to the attainable maximum.
TradeoffCurve oracle_curve(const DensityPair& dens, double lambda, int n, const LevelSetConfig& cfg = {});
TradeoffCurve thresholded_lasso_curve(const PriorSpec& prior, const SeSolution& sol, double lambda, int n);
/// Lasso path limits over a lambda grid; lambdas the solver cannot handle are skipped.
TradeoffCurve lasso_curve(const SeModel& model, const std::vector<double>& lambdas,
                          const SeConfig& cfg = {});

/// Linear interpolation of fdp at a tpp value; NaN outside the curve's range.
double fdp_at_tpp(const TradeoffCurve& curve, double tpp);

struct FdpLambdaPoint {
    double lambda = 0.0;
    double fdp = std::numeric_limits<double>::quiet_NaN();
    double threshold = std::numeric_limits<double>::quiet_NaN();
    double alpha = 0.0;
    double tau = 0.0;
    bool ok = false;
    std::string error;
};

/// fdp*(t(lambda); lambda) where t(lambda) calibrates tpp* to the target.
/// A failure at one lambda is recorded and the sweep continues.
std::vector<FdpLambdaPoint> fdp_vs_lambda(const SeModel& model, double target_tpp,
                                          const std::vector<double>& lambdas,
                                          const Tolerances& tol = {});

/// Limit of the plug-in lfdr estimate: lfdr(x) plus a small nonnegative bias.
double lfdr_hat_limit(double x, const DensityPair& dens);

/// Limiting fraction of nulls among estimates falling in [s, t] (same sign).
double interval_fdp_limit(const DensityPair& dens, double s, double t);

/// Log-spaced grid from hi down to lo (n >= 2 points).
std::vector<double> log_grid_descending(double hi, double lo, int n);
/// Evenly spaced grid on [lo, hi].
std::vector<double> linear_grid(double lo, double hi, int n);

}  // namespace amplasso
