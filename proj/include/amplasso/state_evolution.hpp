#pragma once

#include <stdexcept>
#include <string>

#include "amplasso/prior.hpp"
#include "amplasso/tolerances.hpp"

namespace amplasso {

/// Everything the state evolution depends on except lambda.
struct SeModel {
    PriorSpec prior;
    double sigma = 1.0;
    double delta = 1.0;
};

struct SeProblem {
    PriorSpec prior;
    double sigma = 1.0;
    double delta = 1.0;
    double lambda = 1.0;

    SeModel model() const { return {prior, sigma, delta}; }
};

/// Solved (alpha, tau) with the absolute residuals of the tau equation
/// (in tau^2 units) and of the lambda equation.
struct SeSolution {
    double alpha = 0.0;
    double tau = 0.0;
    double residual_tau = 0.0;
    double residual_lambda = 0.0;
};

class SeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The tau fixed-point iteration did not settle.
class FixedPointError : public SeError {
public:
    FixedPointError(const std::string& what, double last_tau, double residual, int iterations)
        : SeError(what), last_tau(last_tau), residual(residual), iterations(iterations)
    {
    }
    double last_tau;
    double residual;
    int iterations;
};

/// sign(x) * max(|x| - t, 0)
double soft_threshold(double x, double t);

/// Root of (a^2 + 1) Phi(-a) - a phi(a) = delta / 2 for delta < 1; 0 for delta >= 1.
double alpha_min(double delta, const SeConfig& cfg = {});

// Closed-form scalar-channel quantities for X = Pi + tau Z thresholded at alpha*tau.

/// E[(eta_{alpha tau}(Pi + tau Z) - Pi)^2]
double channel_mse(const PriorSpec& prior, double alpha, double tau);
/// P(|Pi + tau Z| > alpha tau)
double channel_active_prob(const PriorSpec& prior, double alpha, double tau);
/// E(Z + alpha; X < -alpha tau) - E(Z - alpha; X > alpha tau), the derivative
/// condition satisfied where tau is minimized over lambda.
double cv_stationarity(const PriorSpec& prior, double alpha, double tau);

/// Solves tau^2 = sigma^2 + E[(eta - Pi)^2] / delta for fixed alpha by
/// iterating the right-hand side. Throws FixedPointError on non-convergence.
double tau_fixed_point(const SeModel& model, double alpha, const SeConfig& cfg = {});

/// alpha tau (1 - P(|Pi + tau Z| > alpha tau) / delta) for a given pair.
double lambda_from_pair(const SeModel& model, double alpha, double tau);

/// lambda(alpha), with tau from tau_fixed_point.
double lambda_of_alpha(const SeModel& model, double alpha, const SeConfig& cfg = {});

/// Absolute residuals of both state-evolution equations at (alpha, tau).
SeSolution residuals(const SeProblem& problem, double alpha, double tau);

/// Solves the state-evolution pair for the problem's lambda. Scans a
/// geometric alpha grid above alpha_min for sign changes of lambda(alpha) -
/// lambda and bisects each bracket; if several are found the one with the
/// smallest residuals wins and a warning is logged.
SeSolution solve(const SeProblem& problem, const SeConfig& cfg = {});

/// Bisection for lambda(alpha) = lambda inside a caller-chosen bracket.
SeSolution solve_in_bracket(const SeProblem& problem, double alpha_lo, double alpha_hi,
                            const SeConfig& cfg = {});

/// E[(eta_{alpha tau}(Pi + tau Z) - Pi)^2], closed form.
double asymptotic_mse(const SeModel& model, double alpha, double tau);
/// The same expectation evaluated through expect_psi.
double asymptotic_mse_quadrature(const SeModel& model, double alpha, double tau,
                                 const QuadratureOptions& opts = {});

struct OptimalLambda {
    double lambda = 0.0;
    double alpha = 0.0;
    double tau = 0.0;
    /// Golden-section estimate before stationarity refinement.
    double lambda_golden = 0.0;
    double tau_golden = 0.0;
    double stationarity_residual = 0.0;
    double effective_delta = 0.0;
};

/// Minimizer of tau(lambda) at the given sampling ratio. Pass delta for
/// lambda*, or (K-1) delta / K for the K-fold cross-validation limit.
///
/// Golden-section search over [opt_lambda_lo, opt_lambda_hi] locates the
/// minimum; because tau is flat there, the result is then polished by
/// solving the stationarity condition in alpha. Throws SeError when the
/// minimizer sits at a bracket end.
OptimalLambda optimal_lambda(const SeModel& model, double effective_delta,
                             const SeConfig& cfg = {});

/// (K - 1) delta / K
double cv_effective_delta(double delta, int folds);

}  // namespace amplasso
