#include "amplasso/state_evolution.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "amplasso/log.hpp"
#include "amplasso/normal.hpp"

namespace amplasso {

namespace {

struct Part {
    double weight;
    double mean;
    double var;
};

std::vector<Part> parts_of(const PriorSpec& prior)
{
    std::vector<Part> out;
    if (prior.epsilon < 1.0)
        out.push_back({1.0 - prior.epsilon, 0.0, 0.0});
    if (prior.epsilon > 0.0)
        for (const auto& c : prior.components)
            out.push_back({prior.epsilon * c.weight, c.mean(), c.var()});
    return out;
}

double quad_form(const PartialMoments& m, double slope, double offset)
{
    return slope * slope * m.m2 + 2.0 * slope * offset * m.m1 + offset * offset * m.m0;
}

std::string fmt(double x)
{
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

}  // namespace

double soft_threshold(double x, double t)
{
    const double mag = std::abs(x) - t;
    return mag > 0.0 ? std::copysign(mag, x) : 0.0;
}

double alpha_min(double delta, const SeConfig& cfg)
{
    if (!(delta > 0.0))
        throw std::invalid_argument("alpha_min requires delta > 0");
    if (delta >= 1.0)
        return 0.0;
    auto lhs = [](double a) { return (a * a + 1.0) * normal_cdf(-a) - a * normal_pdf(a); };
    double lo = 0.0;
    double hi = 1.0;
    while (lhs(hi) > 0.5 * delta)
        hi *= 2.0;
    while (hi - lo > cfg.alpha_min_tol) {
        const double mid = 0.5 * (lo + hi);
        if (lhs(mid) > 0.5 * delta)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double channel_mse(const PriorSpec& prior, double alpha, double tau)
{
    const double theta = alpha * tau;
    const double inf = std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (const auto& c : parts_of(prior)) {
        // D = X - m ~ N(0, s^2); E[Pi | X] = m + gain * D.
        const double s = std::sqrt(c.var + tau * tau);
        const double gain = c.var / (s * s);
        const double upper = theta - c.mean;
        const double lower = -theta - c.mean;
        double part = quad_form(gaussian_partial_moments(s, upper, inf), 1.0 - gain, -theta);
        part += quad_form(gaussian_partial_moments(s, -inf, lower), 1.0 - gain, theta);
        part += quad_form(gaussian_partial_moments(s, lower, upper), -gain, -c.mean);
        part += c.var * (1.0 - gain);
        total += c.weight * part;
    }
    return total;
}

double channel_active_prob(const PriorSpec& prior, double alpha, double tau)
{
    double total = 0.0;
    for (const auto& c : parts_of(prior))
        total += c.weight * gaussian_two_sided_tail(c.mean, std::sqrt(c.var + tau * tau), alpha * tau);
    return total;
}

double cv_stationarity(const PriorSpec& prior, double alpha, double tau)
{
    const double theta = alpha * tau;
    double total = 0.0;
    for (const auto& c : parts_of(prior)) {
        const double s = std::sqrt(c.var + tau * tau);
        const double u_lo = (-theta - c.mean) / s;
        const double u_hi = (theta - c.mean) / s;
        // E[Z 1{X < a}] = -(tau / s) phi((a - m) / s), and symmetrically above.
        const double below = -(tau / s) * normal_pdf(u_lo) + alpha * normal_cdf(u_lo);
        const double above = (tau / s) * normal_pdf(u_hi) - alpha * normal_cdf(-u_hi);
        total += c.weight * (below - above);
    }
    return total;
}

double tau_fixed_point(const SeModel& model, double alpha, const SeConfig& cfg)
{
    if (!(model.sigma > 0.0) || !(model.delta > 0.0))
        throw std::invalid_argument("tau_fixed_point requires sigma > 0 and delta > 0");
    const double sigma2 = model.sigma * model.sigma;
    auto rhs = [&](double tau2) {
        return sigma2 + channel_mse(model.prior, alpha, std::sqrt(tau2)) / model.delta;
    };
    auto diverged = [&](double tau2, int iter) {
        return FixedPointError("tau fixed point diverged at alpha = " + fmt(alpha), std::sqrt(tau2),
                               std::numeric_limits<double>::infinity(), iter);
    };

    // Plain iteration tau^2 <- rhs(tau^2), with an Aitken extrapolation after
    // every pair of steps. Near alpha_min the map's slope approaches 1 and the
    // unaccelerated sequence needs far more than the iteration cap.
    double tau2 = 100.0 * sigma2 * (1.0 + 1.0 / model.delta);
    int iter = 0;
    bool converged = false;
    while (iter < cfg.fixed_point_max_iter) {
        const double s1 = rhs(tau2);
        ++iter;
        if (!std::isfinite(s1) || s1 > 1e30)
            throw diverged(tau2, iter);
        if (std::abs(s1 - tau2) < cfg.fixed_point_rel_tol * s1) {
            tau2 = s1;
            converged = true;
            break;
        }
        const double s2 = rhs(s1);
        ++iter;
        if (!std::isfinite(s2) || s2 > 1e30)
            throw diverged(s1, iter);
        if (std::abs(s2 - s1) < cfg.fixed_point_rel_tol * s2) {
            tau2 = s2;
            converged = true;
            break;
        }
        const double curvature = s2 - 2.0 * s1 + tau2;
        double next = s2;
        if (curvature != 0.0) {
            const double extrapolated = tau2 - (s1 - tau2) * (s1 - tau2) / curvature;
            if (std::isfinite(extrapolated) && extrapolated >= sigma2)
                next = extrapolated;
        }
        tau2 = next;
    }
    const double residual = std::abs(tau2 - rhs(tau2));
    if (!converged || residual > cfg.residual_tol)
        throw FixedPointError("tau fixed point did not converge at alpha = " + fmt(alpha) +
                                  " (last tau " + fmt(std::sqrt(tau2)) + ", residual " +
                                  fmt(residual) + ")",
                              std::sqrt(tau2), residual, iter);
    return std::sqrt(tau2);
}

double lambda_from_pair(const SeModel& model, double alpha, double tau)
{
    return alpha * tau * (1.0 - channel_active_prob(model.prior, alpha, tau) / model.delta);
}

double lambda_of_alpha(const SeModel& model, double alpha, const SeConfig& cfg)
{
    return lambda_from_pair(model, alpha, tau_fixed_point(model, alpha, cfg));
}

SeSolution residuals(const SeProblem& problem, double alpha, double tau)
{
    const SeModel model = problem.model();
    SeSolution out;
    out.alpha = alpha;
    out.tau = tau;
    out.residual_tau = std::abs(tau * tau - problem.sigma * problem.sigma -
                                channel_mse(problem.prior, alpha, tau) / problem.delta);
    out.residual_lambda = std::abs(lambda_from_pair(model, alpha, tau) - problem.lambda);
    return out;
}

SeSolution solve_in_bracket(const SeProblem& problem, double alpha_lo, double alpha_hi,
                            const SeConfig& cfg)
{
    const SeModel model = problem.model();
    auto gap = [&](double a) { return lambda_of_alpha(model, a, cfg) - problem.lambda; };
    double f_lo = gap(alpha_lo);
    double f_hi = gap(alpha_hi);
    if (f_lo * f_hi > 0.0)
        throw SeError("lambda(alpha) - lambda does not change sign on [" + fmt(alpha_lo) + ", " +
                      fmt(alpha_hi) + "]");
    double lo = alpha_lo;
    double hi = alpha_hi;
    double best = std::abs(f_lo) < std::abs(f_hi) ? lo : hi;
    double best_gap = std::min(std::abs(f_lo), std::abs(f_hi));
    for (int i = 0; i < cfg.bisection_max_iter && best_gap > cfg.lambda_tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi))
            break;
        const double f_mid = gap(mid);
        if (std::abs(f_mid) < best_gap) {
            best_gap = std::abs(f_mid);
            best = mid;
        }
        if ((f_mid < 0.0) == (f_lo < 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    const double tau = tau_fixed_point(model, best, cfg);
    return residuals(problem, best, tau);
}

SeSolution solve(const SeProblem& problem, const SeConfig& cfg)
{
    if (!(problem.lambda > 0.0))
        throw std::invalid_argument("solve requires lambda > 0");
    validate(problem.prior);
    const SeModel model = problem.model();
    const double a_min = alpha_min(problem.delta, cfg);
    const int n = std::max(cfg.alpha_grid_points, 2);
    const double span = cfg.alpha_upper - a_min;
    std::vector<double> alphas(n);
    std::vector<double> gaps(n, std::numeric_limits<double>::quiet_NaN());
    for (int k = 0; k < n; ++k) {
        alphas[k] = a_min + cfg.alpha_offset * std::pow(span / cfg.alpha_offset, double(k) / (n - 1));
        try {
            gaps[k] = lambda_of_alpha(model, alphas[k], cfg) - problem.lambda;
        } catch (const FixedPointError&) {
            // Close to alpha_min the fixed point escapes to infinity.
        }
    }

    std::vector<SeSolution> found;
    for (int k = 0; k + 1 < n; ++k) {
        if (!std::isfinite(gaps[k]) || !std::isfinite(gaps[k + 1]))
            continue;
        const bool crosses = gaps[k] * gaps[k + 1] < 0.0 || gaps[k + 1] == 0.0 ||
                             (k == 0 && gaps[k] == 0.0);
        if (!crosses)
            continue;
        found.push_back(solve_in_bracket(problem, alphas[k], alphas[k + 1], cfg));
    }
    if (found.empty()) {
        double lo_val = std::numeric_limits<double>::quiet_NaN();
        double hi_val = lo_val;
        for (int k = 0; k < n; ++k)
            if (std::isfinite(gaps[k])) {
                if (!std::isfinite(lo_val))
                    lo_val = gaps[k] + problem.lambda;
                hi_val = gaps[k] + problem.lambda;
            }
        throw SeError("no bracket for lambda = " + fmt(problem.lambda) + " on alpha in [" +
                      fmt(alphas.front()) + ", " + fmt(alphas.back()) + "]; lambda(alpha) ranges from " +
                      fmt(lo_val) + " to " + fmt(hi_val));
    }
    std::size_t best = 0;
    auto score = [](const SeSolution& s) { return s.residual_tau + s.residual_lambda; };
    for (std::size_t i = 1; i < found.size(); ++i)
        if (score(found[i]) < score(found[best]))
            best = i;
    if (found.size() > 1)
        log_warning("state evolution: " + std::to_string(found.size()) +
                    " brackets found for lambda = " + fmt(problem.lambda) +
                    "; keeping the smallest-residual solution");
    const SeSolution& sol = found[best];
    if (sol.residual_tau > cfg.residual_tol || sol.residual_lambda > cfg.residual_tol)
        throw SeError("state evolution residuals too large for lambda = " + fmt(problem.lambda) +
                      " (tau: " + fmt(sol.residual_tau) + ", lambda: " + fmt(sol.residual_lambda) +
                      ")");
    return sol;
}

double asymptotic_mse(const SeModel& model, double alpha, double tau)
{
    return channel_mse(model.prior, alpha, tau);
}

double asymptotic_mse_quadrature(const SeModel& model, double alpha, double tau,
                                 const QuadratureOptions& opts)
{
    return expect_psi(
        model.prior, alpha, tau, [](double x, double y) { return (x - y) * (x - y); }, opts);
}

double cv_effective_delta(double delta, int folds)
{
    if (folds < 2)
        throw std::invalid_argument("cross-validation needs at least 2 folds");
    return delta * (folds - 1) / folds;
}

OptimalLambda optimal_lambda(const SeModel& model, double effective_delta, const SeConfig& cfg)
{
    if (!(effective_delta > 0.0))
        throw std::invalid_argument("optimal_lambda requires effective_delta > 0");
    const SeModel eff{model.prior, model.sigma, effective_delta};
    auto tau_at = [&](double lambda) {
        try {
            return solve({eff.prior, eff.sigma, eff.delta, lambda}, cfg).tau;
        } catch (const SeError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = cfg.opt_lambda_lo;
    double b = cfg.opt_lambda_hi;
    double c = b - golden * (b - a);
    double d = a + golden * (b - a);
    double fc = tau_at(c);
    double fd = tau_at(d);
    while (b - a > cfg.opt_lambda_tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = tau_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + golden * (b - a);
            fd = tau_at(d);
        }
    }
    const double lambda_g = 0.5 * (a + b);
    const double edge = 1e-3 * (cfg.opt_lambda_hi - cfg.opt_lambda_lo);
    if (lambda_g - cfg.opt_lambda_lo < edge || cfg.opt_lambda_hi - lambda_g < edge)
        throw SeError("tau(lambda) is minimized at the edge of [" + fmt(cfg.opt_lambda_lo) + ", " +
                      fmt(cfg.opt_lambda_hi) + "]; widen the lambda bracket");
    const SeSolution sol_g = solve({eff.prior, eff.sigma, eff.delta, lambda_g}, cfg);

    OptimalLambda out;
    out.effective_delta = effective_delta;
    out.lambda_golden = lambda_g;
    out.tau_golden = sol_g.tau;
    out.lambda = lambda_g;
    out.alpha = sol_g.alpha;
    out.tau = sol_g.tau;
    out.stationarity_residual = std::abs(cv_stationarity(eff.prior, sol_g.alpha, sol_g.tau));

    // Polish: root of the stationarity condition in alpha near the golden estimate.
    auto station = [&](double alpha) {
        return cv_stationarity(eff.prior, alpha, tau_fixed_point(eff, alpha, cfg));
    };
    try {
        const double a_min = alpha_min(effective_delta, cfg);
        double lo = sol_g.alpha;
        double hi = sol_g.alpha;
        double f_lo = station(lo);
        double f_hi = f_lo;
        double step = 0.01 * (1.0 + sol_g.alpha);
        for (int i = 0; i < 60 && f_lo * f_hi > 0.0; ++i) {
            lo = std::max(a_min + cfg.alpha_offset, lo - step);
            hi = hi + step;
            f_lo = station(lo);
            f_hi = station(hi);
            step *= 1.5;
        }
        if (f_lo * f_hi > 0.0)
            throw SeError("no sign change of the stationarity condition");
        for (int i = 0; i < cfg.bisection_max_iter; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (!(mid > lo && mid < hi))
                break;
            const double f_mid = station(mid);
            if ((f_mid < 0.0) == (f_lo < 0.0)) {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
            if (std::abs(f_mid) < cfg.stationarity_tol)
                break;
        }
        const double alpha = 0.5 * (lo + hi);
        const double tau = tau_fixed_point(eff, alpha, cfg);
        const double lambda = lambda_from_pair(eff, alpha, tau);
        if (std::abs(lambda - lambda_g) > 5e-3 * (1.0 + lambda_g)) {
            log_warning("optimal_lambda: stationarity root " + fmt(lambda) +
                        " disagrees with golden-section estimate " + fmt(lambda_g));
        } else {
            out.lambda = lambda;
            out.alpha = alpha;
            out.tau = tau;
            out.stationarity_residual = std::abs(cv_stationarity(eff.prior, alpha, tau));
        }
    } catch (const SeError& e) {
        log_warning(std::string("optimal_lambda: stationarity refinement skipped: ") + e.what());
    }
    return out;
}

}  // namespace amplasso
