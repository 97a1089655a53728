#include "amplasso/theory.hpp"

#include <algorithm>
#include <cmath>

#include "amplasso/log.hpp"
#include "amplasso/normal.hpp"

namespace amplasso {

namespace {

double ratio_or_zero(double num, double den)
{
    return den > 0.0 ? num / den : 0.0;
}

}  // namespace

DensityPair::DensityPair(PriorSpec prior, double alpha, double tau)
    : prior_(std::move(prior)), alpha_(alpha), tau_(tau)
{
    if (!(tau > 0.0) || !(alpha >= 0.0))
        throw std::invalid_argument("DensityPair requires tau > 0 and alpha >= 0");
}

double DensityPair::unshrink(double x) const
{
    if (x == 0.0)
        throw std::domain_error("densities of nonzero estimates are undefined at x = 0");
    return x + std::copysign(alpha_ * tau_, x);
}

double DensityPair::q0(double x) const
{
    return gaussian_density(unshrink(x), 0.0, tau_);
}

double DensityPair::q1(double x) const
{
    const double y = unshrink(x);
    double out = 0.0;
    for (const auto& c : prior_.components)
        out += c.weight * gaussian_density(y, c.mean(), std::sqrt(c.var() + tau_ * tau_));
    return out;
}

double DensityPair::q(double x) const
{
    return (1.0 - prior_.epsilon) * q0(x) + prior_.epsilon * q1(x);
}

double DensityPair::ratio(double x) const
{
    const double y = unshrink(x);
    const double null = gaussian_density(y, 0.0, tau_);
    double alt = 0.0;
    for (const auto& c : prior_.components)
        alt += c.weight * gaussian_density(y, c.mean(), std::sqrt(c.var() + tau_ * tau_));
    const double mix = (1.0 - prior_.epsilon) * null + prior_.epsilon * alt;
    if (mix > 0.0)
        return null / mix;
    // Both densities underflowed: compare log densities of the dominant terms.
    double best_log_alt = -std::numeric_limits<double>::infinity();
    for (const auto& c : prior_.components) {
        const double sd = std::sqrt(c.var() + tau_ * tau_);
        const double u = (y - c.mean()) / sd;
        best_log_alt = std::max(best_log_alt, std::log(c.weight) - 0.5 * u * u - std::log(sd));
    }
    const double log_null = -0.5 * (y / tau_) * (y / tau_) - std::log(tau_);
    const double log_eps = prior_.epsilon > 0.0 ? std::log(prior_.epsilon) : -INFINITY;
    const double log_alt_term = log_eps + best_log_alt;
    const double log_null_term = std::log1p(-prior_.epsilon) + log_null;
    if (log_alt_term > log_null_term)
        return std::exp(log_null - log_alt_term);
    return 1.0 / (1.0 - prior_.epsilon);
}

void DensityPair::check_interval(double a, double b) const
{
    if (!(a <= b))
        throw std::invalid_argument("interval endpoints out of order");
    if (a < 0.0 && b > 0.0)
        throw std::domain_error("interval must not contain zero");
}

double DensityPair::q0_mass(double a, double b) const
{
    check_interval(a, b);
    if (a == b)
        return 0.0;
    const double shift = (a >= 0.0 ? 1.0 : -1.0) * alpha_ * tau_;
    return gaussian_interval_prob(0.0, tau_, a + shift, b + shift);
}

double DensityPair::q1_mass(double a, double b) const
{
    check_interval(a, b);
    if (a == b)
        return 0.0;
    const double shift = (a >= 0.0 ? 1.0 : -1.0) * alpha_ * tau_;
    double out = 0.0;
    for (const auto& c : prior_.components)
        out += c.weight * gaussian_interval_prob(c.mean(), std::sqrt(c.var() + tau_ * tau_), a + shift, b + shift);
    return out;
}

double DensityPair::q_mass(double a, double b) const
{
    return (1.0 - prior_.epsilon) * q0_mass(a, b) + prior_.epsilon * q1_mass(a, b);
}

double DensityPair::w0() const { return 2.0 * normal_cdf(-alpha_); }
double DensityPair::w1() const { return tail_prob_nonnull(prior_, alpha_, tau_, 0.0); }
double DensityPair::w() const { return (1.0 - prior_.epsilon) * w0() + prior_.epsilon * w1(); }

bool LevelSet::contains(double x) const
{
    return std::any_of(intervals.begin(), intervals.end(), [&](const Interval& iv) { return iv.contains(x); });
}

LevelSetScanner::LevelSetScanner(const DensityPair& dens, const LevelSetConfig& cfg)
    : dens_(dens), cfg_(cfg)
{
    const double tau = dens_.tau();
    band_ = cfg_.zero_band_factor * tau;
    reach_ = std::max(10.0 * tau, furthest_mean(dens_.prior()) + 10.0 * tau);
    const double step = cfg_.grid_step_factor * tau;
    const auto n = static_cast<std::size_t>(std::ceil((reach_ - band_) / step)) + 1;
    grid_.resize(n);
    ratio_pos_.resize(n);
    ratio_neg_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        grid_[k] = std::min(band_ + static_cast<double>(k) * step, reach_);
        ratio_pos_[k] = dens_.ratio(grid_[k]);
        ratio_neg_[k] = dens_.ratio(-grid_[k]);
        max_ratio_ = std::max({max_ratio_, ratio_pos_[k], ratio_neg_[k]});
    }
}

void LevelSetScanner::scan_side(double t, int sign, std::vector<Interval>& out) const
{
    const auto& ratios = sign > 0 ? ratio_pos_ : ratio_neg_;
    auto inside = [&](double r) { return r <= t; };
    // Bisection for the crossing of q0/q = t between magnitudes a and b.
    auto refine = [&](double a, double b) {
        const bool a_in = inside(dens_.ratio(sign * a));
        while (b - a > cfg_.endpoint_tol) {
            const double mid = 0.5 * (a + b);
            if (!(mid > a && mid < b))
                break;
            if (inside(dens_.ratio(sign * mid)) == a_in)
                a = mid;
            else
                b = mid;
        }
        return 0.5 * (a + b);
    };

    std::vector<Interval> mags;
    bool in = inside(ratios[0]);
    double start = band_;
    for (std::size_t k = 1; k < grid_.size(); ++k) {
        const bool now = inside(ratios[k]);
        if (now == in)
            continue;
        const double edge = refine(grid_[k - 1], grid_[k]);
        if (in)
            mags.push_back({start, edge});
        else
            start = edge;
        in = now;
    }
    if (in)
        mags.push_back({start, std::numeric_limits<double>::infinity()});

    for (const auto& m : mags) {
        if (sign > 0)
            out.push_back({m.lo, m.hi});
        else
            out.push_back({-m.hi, -m.lo});
    }
}

LevelSet LevelSetScanner::at(double t) const
{
    if (!(t > 0.0))
        throw std::invalid_argument("level set threshold must be positive");
    LevelSet out;
    out.threshold = t;
    out.zero_band = band_;
    scan_side(t, -1, out.intervals);
    scan_side(t, +1, out.intervals);
    std::sort(out.intervals.begin(), out.intervals.end(),
              [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    return out;
}

LevelSet level_set(const DensityPair& dens, double t, const LevelSetConfig& cfg)
{
    return LevelSetScanner(dens, cfg).at(t);
}

double lfdr(double x, const DensityPair& dens)
{
    if (x == 0.0)
        throw std::domain_error("lfdr is only defined for nonzero estimates");
    return (1.0 - dens.epsilon()) * dens.ratio(x);
}

std::string method_name(Method m)
{
    switch (m) {
    case Method::lasso:
        return "lasso";
    case Method::thresholded_lasso:
        return "thresholded_lasso";
    case Method::oracle_lfdr:
        return "oracle_lfdr";
    }
    return "unknown";
}

FdpTpp lasso_tradeoff(const PriorSpec& prior, const SeSolution& sol)
{
    const double tpp = tail_prob_nonnull(prior, sol.alpha, sol.tau, 0.0);
    const double nulls = 2.0 * (1.0 - prior.epsilon) * normal_cdf(-sol.alpha);
    return {ratio_or_zero(nulls, nulls + prior.epsilon * tpp), tpp};
}

FdpTpp lasso_tradeoff(const SeProblem& problem, const SeConfig& cfg)
{
    return lasso_tradeoff(problem.prior, solve(problem, cfg));
}

FdpTpp thresholded_lasso_tradeoff(const PriorSpec& prior, const SeSolution& sol, double t)
{
    if (!(t >= 0.0))
        throw std::invalid_argument("threshold must be nonnegative");
    const double tpp = tail_prob_nonnull(prior, sol.alpha, sol.tau, t);
    const double nulls = 2.0 * (1.0 - prior.epsilon) * normal_cdf(-sol.alpha - t / sol.tau);
    return {ratio_or_zero(nulls, nulls + prior.epsilon * tpp), tpp};
}

FdpTpp oracle_tradeoff(const LevelSetScanner& scanner, double t)
{
    const DensityPair& dens = scanner.densities();
    const LevelSet set = scanner.at(t);
    double p0 = 0.0;
    double p1 = 0.0;
    for (const auto& iv : set.intervals) {
        p0 += dens.q0_mass(iv.lo, iv.hi);
        p1 += dens.q1_mass(iv.lo, iv.hi);
    }
    const double nulls = (1.0 - dens.epsilon()) * p0;
    return {ratio_or_zero(nulls, nulls + dens.epsilon() * p1), p1};
}

FdpTpp oracle_tradeoff(const DensityPair& dens, double t, const LevelSetConfig& cfg)
{
    return oracle_tradeoff(LevelSetScanner(dens, cfg), t);
}

namespace {

double top_threshold(const LevelSetScanner& scanner)
{
    return scanner.max_ratio() * (1.0 + 1e-9) + 1e-300;
}

}  // namespace

double max_oracle_tpp(const LevelSetScanner& scanner)
{
    return oracle_tradeoff(scanner, top_threshold(scanner)).tpp;
}

double calibrate_threshold(const LevelSetScanner& scanner, double target_tpp, double tol)
{
    if (!(target_tpp > 0.0 && target_tpp < 1.0))
        throw std::invalid_argument("target tpp must lie in (0, 1)");
    double hi = top_threshold(scanner);
    const double top = oracle_tradeoff(scanner, hi).tpp;
    if (top < target_tpp)
        throw UnreachableTarget("target tpp " + std::to_string(target_tpp) +
                                    " exceeds the attainable maximum " + std::to_string(top),
                                top);
    double lo = 0.0;
    double best = hi;
    double best_gap = top - target_tpp;
    for (int i = 0; i < 300 && best_gap > tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi))
            break;
        const double tpp = oracle_tradeoff(scanner, mid).tpp;
        if (std::abs(tpp - target_tpp) < best_gap) {
            best_gap = std::abs(tpp - target_tpp);
            best = mid;
        }
        if (tpp < target_tpp)
            lo = mid;
        else
            hi = mid;
    }
    if (best_gap > tol)
        log_warning("calibrate_threshold: tpp* jumps near the target; gap " + std::to_string(best_gap));
    return best;
}

double calibrate_threshold(const DensityPair& dens, double target_tpp, const LevelSetConfig& cfg)
{
    return calibrate_threshold(LevelSetScanner(dens, cfg), target_tpp, cfg.calibrate_tol);
}

TradeoffCurve oracle_curve(const DensityPair& dens, double lambda, int n, const LevelSetConfig& cfg)
{
    const LevelSetScanner scanner(dens, cfg);
    TradeoffCurve curve{Method::oracle_lfdr, lambda, {}};
    const double t_top = top_threshold(scanner);
    const FdpTpp full = oracle_tradeoff(scanner, t_top);
    for (int k = 1; k <= n; ++k) {
        if (k == n) {
            curve.points.push_back({t_top, full.tpp, full.fdp});
            break;
        }
        const double target = full.tpp * k / n;
        const double t = calibrate_threshold(scanner, target, cfg.calibrate_tol);
        const FdpTpp v = oracle_tradeoff(scanner, t);
        curve.points.push_back({t, v.tpp, v.fdp});
    }
    return curve;
}

TradeoffCurve thresholded_lasso_curve(const PriorSpec& prior, const SeSolution& sol, double lambda, int n)
{
    // Largest threshold of interest: where essentially nothing is selected.
    double t_max = sol.tau;
    while (thresholded_lasso_tradeoff(prior, sol, t_max).tpp > 1e-4)
        t_max *= 1.5;
    TradeoffCurve curve{Method::thresholded_lasso, lambda, {}};
    for (int k = n - 1; k >= 0; --k) {
        const double t = t_max * k / std::max(n - 1, 1);
        const FdpTpp v = thresholded_lasso_tradeoff(prior, sol, t);
        curve.points.push_back({t, v.tpp, v.fdp});
    }
    return curve;
}

TradeoffCurve lasso_curve(const SeModel& model, const std::vector<double>& lambdas, const SeConfig& cfg)
{
    TradeoffCurve curve{Method::lasso, 0.0, {}};
    for (double lambda : lambdas) {
        try {
            const SeSolution sol = solve({model.prior, model.sigma, model.delta, lambda}, cfg);
            const FdpTpp v = lasso_tradeoff(model.prior, sol);
            curve.points.push_back({lambda, v.tpp, v.fdp});
        } catch (const SeError& e) {
            log_info(std::string("lasso_curve: skipping lambda: ") + e.what());
        }
    }
    std::sort(curve.points.begin(), curve.points.end(),
              [](const TradeoffPoint& a, const TradeoffPoint& b) { return a.tpp < b.tpp; });
    return curve;
}

double fdp_at_tpp(const TradeoffCurve& curve, double tpp)
{
    const auto& pts = curve.points;
    if (pts.empty() || tpp < pts.front().tpp || tpp > pts.back().tpp)
        return std::numeric_limits<double>::quiet_NaN();
    auto it = std::lower_bound(pts.begin(), pts.end(), tpp,
                               [](const TradeoffPoint& p, double v) { return p.tpp < v; });
    if (it == pts.begin())
        return it->fdp;
    const auto& right = *it;
    const auto& left = *(it - 1);
    if (right.tpp == left.tpp)
        return right.fdp;
    const double w = (tpp - left.tpp) / (right.tpp - left.tpp);
    return left.fdp + w * (right.fdp - left.fdp);
}

std::vector<FdpLambdaPoint> fdp_vs_lambda(const SeModel& model, double target_tpp,
                                          const std::vector<double>& lambdas, const Tolerances& tol)
{
    std::vector<FdpLambdaPoint> out;
    for (double lambda : lambdas) {
        FdpLambdaPoint pt;
        pt.lambda = lambda;
        try {
            const SeSolution sol = solve({model.prior, model.sigma, model.delta, lambda}, tol.se);
            pt.alpha = sol.alpha;
            pt.tau = sol.tau;
            const DensityPair dens = DensityPair::from_solution(model.prior, sol);
            const LevelSetScanner scanner(dens, tol.level_set);
            pt.threshold = calibrate_threshold(scanner, target_tpp, tol.level_set.calibrate_tol);
            pt.fdp = oracle_tradeoff(scanner, pt.threshold).fdp;
            pt.ok = true;
        } catch (const std::exception& e) {
            pt.error = e.what();
        }
        out.push_back(pt);
    }
    return out;
}

double lfdr_hat_limit(double x, const DensityPair& dens)
{
    const double eps = dens.epsilon();
    const double kept_null = 1.0 - dens.w0();
    double bias = 0.0;
    if (eps > 0.0) {
        if (!(kept_null > 0.0))
            throw std::domain_error("lfdr_hat_limit needs alpha > 0");
        bias = eps * (1.0 - dens.w1()) / kept_null * dens.ratio(x);
    }
    return lfdr(x, dens) + bias;
}

double interval_fdp_limit(const DensityPair& dens, double s, double t)
{
    const double lo = std::min(s, t);
    const double hi = std::max(s, t);
    if (lo < 0.0 && hi > 0.0)
        throw std::domain_error("interval must not straddle zero");
    if (lo == 0.0 || hi == 0.0)
        throw std::domain_error("interval must exclude zero");
    const double nulls = (1.0 - dens.epsilon()) * dens.q0_mass(lo, hi);
    return ratio_or_zero(nulls, dens.q_mass(lo, hi));
}

std::vector<double> log_grid_descending(double hi, double lo, int n)
{
    if (n < 2 || !(hi > lo) || !(lo > 0.0))
        throw std::invalid_argument("log grid needs n >= 2 and hi > lo > 0");
    std::vector<double> out(n);
    for (int k = 0; k < n; ++k)
        out[k] = hi * std::pow(lo / hi, double(k) / (n - 1));
    return out;
}

std::vector<double> linear_grid(double lo, double hi, int n)
{
    if (n < 2)
        return {lo};
    std::vector<double> out(n);
    for (int k = 0; k < n; ++k)
        out[k] = lo + (hi - lo) * k / (n - 1);
    return out;
}

}  // namespace amplasso
