#include "amplasso/eb_select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "amplasso/log.hpp"
#include "amplasso/normal.hpp"

namespace amplasso {

namespace {

constexpr double kernel_reach = 12.0;
constexpr double lfdr_clip = 1.1;

double quantile_sorted(const std::vector<double>& v, double q)
{
    const double pos = q * double(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

SelectionPath make_path(std::vector<double> statistic, Direction direction, std::vector<bool> zero_mask,
                        const std::vector<bool>& is_null)
{
    if (statistic.size() != is_null.size())
        throw std::invalid_argument("statistics and truth labels differ in length");
    SelectionPath path;
    path.direction = direction;
    path.is_null = is_null;
    for (std::size_t i = 0; i < statistic.size(); ++i)
        if (!zero_mask[i])
            path.order.push_back(static_cast<Eigen::Index>(i));
    const auto& s = statistic;
    std::stable_sort(path.order.begin(), path.order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return direction == Direction::ascending ? s[a] < s[b] : s[a] > s[b];
    });
    path.statistic = std::move(statistic);
    path.zero_mask = std::move(zero_mask);
    return path;
}

std::vector<bool> zeros_of(const Eigen::VectorXd& beta_hat)
{
    std::vector<bool> mask(beta_hat.size());
    for (Eigen::Index i = 0; i < beta_hat.size(); ++i)
        mask[i] = beta_hat[i] == 0.0;
    return mask;
}

}  // namespace

double default_bandwidth(std::vector<double> values)
{
    if (values.size() < 2)
        throw std::invalid_argument("bandwidth rule needs at least two nonzero estimates");
    const double m = double(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / m;
    double ss = 0.0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (m - 1.0));
    std::sort(values.begin(), values.end());
    const double iqr = quantile_sorted(values, 0.75) - quantile_sorted(values, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0.0))
        spread = std::max(sd, iqr / 1.34);
    if (!(spread > 0.0))
        throw std::invalid_argument("bandwidth rule: nonzero estimates have no spread");
    return 0.9 * spread * std::pow(m, -0.2);
}

EbEstimates estimate(const DesignProblem& problem, const LassoFit& fit, std::optional<double> bandwidth)
{
    const Eigen::Index n = problem.n();
    const Eigen::Index p = problem.p();
    if (fit.beta_hat.size() != p)
        throw std::invalid_argument("fit does not match the design");
    EbEstimates est;
    est.lambda = fit.lambda;
    est.n = n;
    est.p = p;
    est.support_size = (fit.beta_hat.array() != 0.0).count();
    if (est.support_size >= n)
        throw std::domain_error("support size " + std::to_string(est.support_size) + " reaches n = " +
                                std::to_string(n) + "; tau_hat is undefined");
    const double keep = 1.0 - double(est.support_size) / double(n);
    const double rss = (problem.Y - problem.X * fit.beta_hat).squaredNorm();
    est.w_hat = double(est.support_size) / double(p);
    est.tau_hat = std::sqrt(rss / (double(n) * keep * keep));
    if (!(est.tau_hat > 0.0))
        throw std::domain_error("tau_hat is zero: the fit interpolates the response");
    est.alpha_tau_hat = fit.lambda / keep;
    est.alpha_hat = est.alpha_tau_hat / est.tau_hat;
    est.w0_hat = 2.0 * (1.0 - normal_cdf(est.alpha_hat));

    const double zeros = double(p - est.support_size);
    const double kept_null = 1.0 - 2.0 * normal_cdf(-est.alpha_hat);
    const double null_share = kept_null > 0.0 ? zeros / (double(p) * kept_null) : 1.0;
    est.eps_hat_raw = 1.0 - null_share;
    est.eps_hat = std::clamp(est.eps_hat_raw, 0.0, 1.0);
    if (est.eps_hat != est.eps_hat_raw)
        log_warning("estimate: eps_hat " + std::to_string(est.eps_hat_raw) + " clipped to [0, 1]");

    if (bandwidth) {
        if (!(*bandwidth > 0.0))
            throw std::invalid_argument("bandwidth must be positive");
        est.bandwidth = *bandwidth;
    } else if (est.support_size >= 2) {
        std::vector<double> nz;
        nz.reserve(est.support_size);
        for (Eigen::Index i = 0; i < p; ++i)
            if (fit.beta_hat[i] != 0.0)
                nz.push_back(fit.beta_hat[i]);
        est.bandwidth = default_bandwidth(std::move(nz));
    } else {
        // Too few estimates for the rule; the density estimate is degenerate anyway.
        est.bandwidth = est.tau_hat;
    }
    return est;
}

double kde_q(const Eigen::VectorXd& beta_hat, double h, double x)
{
    if (!(h > 0.0))
        throw std::invalid_argument("bandwidth must be positive");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < beta_hat.size(); ++i)
        if (beta_hat[i] != 0.0)
            sum += normal_pdf((x - beta_hat[i]) / h);
    return sum / (double(beta_hat.size()) * h);
}

KernelDensity::KernelDensity(const Eigen::VectorXd& beta_hat, double h) : h_(h), p_(double(beta_hat.size()))
{
    if (!(h > 0.0))
        throw std::invalid_argument("bandwidth must be positive");
    for (Eigen::Index i = 0; i < beta_hat.size(); ++i)
        if (beta_hat[i] != 0.0)
            points_.push_back(beta_hat[i]);
    std::sort(points_.begin(), points_.end());
}

double KernelDensity::operator()(double x) const
{
    const auto lo = std::lower_bound(points_.begin(), points_.end(), x - kernel_reach * h_);
    const auto hi = std::upper_bound(lo, points_.end(), x + kernel_reach * h_);
    double sum = 0.0;
    for (auto it = lo; it != hi; ++it)
        sum += normal_pdf((x - *it) / h_);
    return sum / (p_ * h_);
}

double q0_hat(const EbEstimates& est, double x)
{
    if (x == 0.0)
        throw std::domain_error("q0_hat is only defined for nonzero estimates");
    return normal_pdf((x + std::copysign(est.alpha_tau_hat, x)) / est.tau_hat) / est.tau_hat;
}

double lfdr_hat(const EbEstimates& est, const KernelDensity& q_hat, double x)
{
    if (x == 0.0)
        throw std::domain_error("lfdr_hat is only defined for nonzero estimates");
    const double q = q_hat(x);
    if (!(q > 0.0))
        throw std::domain_error("lfdr_hat undefined at x = " + std::to_string(x) + ": density estimate is zero");
    const double raw = (1.0 - est.eps_hat) * q0_hat(est, x) / q;
    if (raw > lfdr_clip) {
        log_warning("lfdr_hat: value " + std::to_string(raw) + " at x = " + std::to_string(x) + " clipped to " +
                    std::to_string(lfdr_clip));
        return lfdr_clip;
    }
    return std::max(raw, 0.0);
}

SelectionPath eb_path(const Eigen::VectorXd& beta_hat, const EbEstimates& est, const KernelDensity& q_hat,
                      const std::vector<bool>& is_null)
{
    std::vector<double> stat(beta_hat.size(), 0.0);
    for (Eigen::Index i = 0; i < beta_hat.size(); ++i) {
        if (beta_hat[i] == 0.0)
            continue;
        const double q = q_hat(beta_hat[i]);
        stat[i] = q > 0.0 ? q0_hat(est, beta_hat[i]) / q : std::numeric_limits<double>::infinity();
    }
    return make_path(std::move(stat), Direction::ascending, zeros_of(beta_hat), is_null);
}

SelectionPath oracle_path(const Eigen::VectorXd& beta_hat, const DensityPair& dens, const std::vector<bool>& is_null)
{
    std::vector<double> stat(beta_hat.size(), 0.0);
    for (Eigen::Index i = 0; i < beta_hat.size(); ++i)
        if (beta_hat[i] != 0.0)
            stat[i] = dens.ratio(beta_hat[i]);
    return make_path(std::move(stat), Direction::ascending, zeros_of(beta_hat), is_null);
}

SelectionPath thresholded_path(const Eigen::VectorXd& beta_hat, const std::vector<bool>& is_null)
{
    std::vector<double> stat(beta_hat.size());
    for (Eigen::Index i = 0; i < beta_hat.size(); ++i)
        stat[i] = std::abs(beta_hat[i]);
    return make_path(std::move(stat), Direction::descending, zeros_of(beta_hat), is_null);
}

SelectionPath lasso_max_path(const std::vector<double>& entry_lambda, const std::vector<bool>& is_null)
{
    std::vector<bool> mask(entry_lambda.size());
    for (std::size_t i = 0; i < entry_lambda.size(); ++i)
        mask[i] = entry_lambda[i] == 0.0;
    return make_path(entry_lambda, Direction::descending, std::move(mask), is_null);
}

std::vector<bool> null_labels(const Eigen::VectorXd& beta)
{
    return zeros_of(beta);
}

std::vector<EmpiricalPoint> empirical_tradeoff(const SelectionPath& path)
{
    const auto signals = std::count(path.is_null.begin(), path.is_null.end(), false);
    std::vector<EmpiricalPoint> out;
    out.reserve(path.order.size() + 1);
    out.push_back({0, std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0});
    Eigen::Index false_hits = 0;
    Eigen::Index true_hits = 0;
    for (std::size_t k = 0; k < path.order.size(); ++k) {
        const Eigen::Index i = path.order[k];
        if (path.is_null[i])
            ++false_hits;
        else
            ++true_hits;
        const auto selected = static_cast<Eigen::Index>(k + 1);
        out.push_back({selected, path.statistic[i], double(false_hits) / double(selected),
                       signals > 0 ? double(true_hits) / double(signals) : 0.0});
    }
    return out;
}

FdpTpp selection_fdp_tpp(const std::vector<Eigen::Index>& selected, const std::vector<bool>& is_null)
{
    const auto signals = std::count(is_null.begin(), is_null.end(), false);
    Eigen::Index false_hits = 0;
    for (Eigen::Index i : selected)
        false_hits += is_null.at(i) ? 1 : 0;
    const auto true_hits = static_cast<Eigen::Index>(selected.size()) - false_hits;
    return {selected.empty() ? 0.0 : double(false_hits) / double(selected.size()),
            signals > 0 ? double(true_hits) / double(signals) : 0.0};
}

}  // namespace amplasso
