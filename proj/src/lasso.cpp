#include "amplasso/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "amplasso/log.hpp"
#include "amplasso/rng.hpp"

namespace amplasso {

namespace {

// Skip the direct solve when forming the support Gram matrix would cost more
// than roughly a second; coordinate descent is well conditioned in those
// regimes anyway.
constexpr double polish_flop_budget = 4e9;

double soft(double z, double t)
{
    const double m = std::abs(z) - t;
    return m > 0.0 ? std::copysign(m, z) : 0.0;
}

struct GapInfo {
    double primal;
    double gap;
};

GapInfo duality_gap(const DesignProblem& problem, const Eigen::VectorXd& beta, const Eigen::VectorXd& r,
                    double lambda)
{
    const double primal = 0.5 * r.squaredNorm() + lambda * beta.lpNorm<1>();
    const double corr = (problem.X.transpose() * r).lpNorm<Eigen::Infinity>();
    const double scale = corr > lambda ? lambda / corr : 1.0;
    const double dual = 0.5 * problem.Y.squaredNorm() - 0.5 * (problem.Y - scale * r).squaredNorm();
    return {primal, std::max(primal - dual, 0.0)};
}

}  // namespace

void DesignProblem::validate() const
{
    if (Y.size() != X.rows())
        throw std::invalid_argument("design has " + std::to_string(X.rows()) + " rows but response has " +
                                    std::to_string(Y.size()) + " entries");
    if (X.rows() == 0 || X.cols() == 0)
        throw std::invalid_argument("design must be non-empty");
    if (!X.allFinite() || !Y.allFinite())
        throw std::invalid_argument("design and response must be finite");
}

LassoSolver::LassoSolver(const DesignProblem& problem, const LassoOptions& opts)
    : problem_(problem), opts_(opts)
{
    problem_.validate();
    col_sq_ = problem_.X.colwise().squaredNorm().transpose();
}

LassoFit LassoSolver::fit(double lambda) const
{
    return fit(lambda, Eigen::VectorXd::Zero(problem_.p()));
}

LassoFit LassoSolver::fit(double lambda, const Eigen::VectorXd& warm_start) const
{
    if (!(lambda > 0.0))
        throw std::invalid_argument("lambda must be positive");
    if (warm_start.size() != problem_.p())
        throw std::invalid_argument("warm start has the wrong length");

    const auto& X = problem_.X;
    const Eigen::Index p = problem_.p();
    Eigen::VectorXd beta = warm_start;
    for (Eigen::Index j = 0; j < p; ++j)
        if (col_sq_[j] == 0.0)
            beta[j] = 0.0;
    Eigen::VectorXd r = problem_.Y - X * beta;

    LassoFit out;
    out.lambda = lambda;

    // One pass over the listed coordinates; returns the largest change.
    auto sweep = [&](const std::vector<Eigen::Index>& coords) {
        double largest = 0.0;
        for (Eigen::Index j : coords) {
            const double norm = col_sq_[j];
            if (norm == 0.0)
                continue;
            const double old = beta[j];
            const double updated = soft(old + X.col(j).dot(r) / norm, lambda / norm);
            if (updated != old) {
                r.noalias() -= (updated - old) * X.col(j);
                beta[j] = updated;
                largest = std::max(largest, std::abs(updated - old));
            }
        }
        ++out.sweeps;
        if (opts_.record_objective)
            out.objective_history.push_back(0.5 * r.squaredNorm() + lambda * beta.lpNorm<1>());
        return largest;
    };
    auto converged = [&](double change) {
        return change < opts_.change_tol * (1.0 + beta.lpNorm<Eigen::Infinity>());
    };

    std::vector<Eigen::Index> all(p);
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    std::vector<Eigen::Index> active;

    // Once the signed support settles, the optimum solves a linear system on
    // it. Coordinate descent crawls when that system is ill-conditioned, so
    // try it directly and keep the result only if every sign agrees.
    std::vector<Eigen::Index> polished_support;
    auto try_polish = [&]() {
        const auto k_est = static_cast<double>(active.size());
        if (active.empty() || static_cast<Eigen::Index>(active.size()) > problem_.n() ||
            k_est * k_est * double(problem_.n()) > polish_flop_budget)
            return false;
        if (active == polished_support)
            return false;
        polished_support = active;
        const auto k = static_cast<Eigen::Index>(active.size());
        Eigen::MatrixXd XS(problem_.n(), k);
        Eigen::VectorXd signs(k);
        for (Eigen::Index a = 0; a < k; ++a) {
            XS.col(a) = X.col(active[a]);
            signs[a] = beta[active[a]] > 0.0 ? 1.0 : -1.0;
        }
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
        gram.selfadjointView<Eigen::Lower>().rankUpdate(XS.transpose());
        const Eigen::LLT<Eigen::MatrixXd> llt(gram.selfadjointView<Eigen::Lower>());
        if (llt.info() != Eigen::Success)
            return false;
        const Eigen::VectorXd b = llt.solve(XS.transpose() * problem_.Y - lambda * signs);
        if (!b.allFinite())
            return false;
        for (Eigen::Index a = 0; a < k; ++a)
            if (b[a] * signs[a] <= 0.0)
                return false;
        Eigen::VectorXd candidate = beta;
        for (Eigen::Index a = 0; a < k; ++a)
            candidate[active[a]] = b[a];
        const Eigen::VectorXd cand_r = problem_.Y - X * candidate;
        const double before = 0.5 * r.squaredNorm() + lambda * beta.lpNorm<1>();
        const double after = 0.5 * cand_r.squaredNorm() + lambda * candidate.lpNorm<1>();
        if (!(after <= before))
            return false;
        beta = std::move(candidate);
        r = cand_r;
        if (opts_.record_objective)
            out.objective_history.push_back(after);
        return true;
    };
    auto collect_active = [&]() {
        active.clear();
        for (Eigen::Index j = 0; j < p; ++j)
            if (beta[j] != 0.0)
                active.push_back(j);
    };

    GapInfo gap{0.0, 0.0};
    while (true) {
        if (out.sweeps >= opts_.max_sweeps) {
            gap = duality_gap(problem_, beta, r, lambda);
            throw LassoError("lasso did not converge in " + std::to_string(opts_.max_sweeps) +
                                 " sweeps at lambda=" + std::to_string(lambda) +
                                 " (duality gap " + std::to_string(gap.gap) + ")",
                             gap.gap);
        }
        const double change = sweep(all);
        if (converged(change)) {
            // Refresh the residual to shed accumulated rounding before judging the gap.
            r = problem_.Y - X * beta;
            gap = duality_gap(problem_, beta, r, lambda);
            if (gap.gap <= opts_.gap_tol * (1.0 + gap.primal))
                break;
            collect_active();
            if (!try_polish())
                for (int k = 0; k < 50 && out.sweeps < opts_.max_sweeps; ++k)
                    sweep(active);
            continue;
        }
        collect_active();
        for (long inner = 1; out.sweeps < opts_.max_sweeps; ++inner) {
            if (converged(sweep(active)))
                break;
            if (inner % 10 == 0) {
                const auto before = active;
                collect_active();
                if (active == before && try_polish())
                    break;
            }
        }
    }

    for (Eigen::Index j = 0; j < p; ++j) {
        if (beta[j] != 0.0 && std::abs(beta[j]) < opts_.zero_snap) {
            r.noalias() += beta[j] * X.col(j);
            beta[j] = 0.0;
        }
    }
    gap = duality_gap(problem_, beta, r, lambda);
    out.beta_hat = std::move(beta);
    out.support_size = (out.beta_hat.array() != 0.0).count();
    out.duality_gap = gap.gap;
    out.objective = gap.primal;
    return out;
}

LassoFit fit(const DesignProblem& problem, double lambda, const LassoOptions& opts)
{
    return LassoSolver(problem, opts).fit(lambda);
}

LassoFit fit(const DesignProblem& problem, double lambda, const Eigen::VectorXd& warm_start,
             const LassoOptions& opts)
{
    return LassoSolver(problem, opts).fit(lambda, warm_start);
}

double lasso_objective(const DesignProblem& problem, const Eigen::VectorXd& beta, double lambda)
{
    return 0.5 * (problem.Y - problem.X * beta).squaredNorm() + lambda * beta.lpNorm<1>();
}

double kkt_violation(const DesignProblem& problem, const Eigen::VectorXd& beta, double lambda)
{
    const Eigen::VectorXd corr = problem.X.transpose() * (problem.Y - problem.X * beta);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < corr.size(); ++j) {
        const double v = beta[j] == 0.0 ? std::max(std::abs(corr[j]) - lambda, 0.0)
                                        : std::abs(corr[j] - std::copysign(lambda, beta[j]));
        worst = std::max(worst, v);
    }
    return worst;
}

double lambda_max(const DesignProblem& problem)
{
    return (problem.X.transpose() * problem.Y).lpNorm<Eigen::Infinity>();
}

std::vector<double> lasso_path_grid(const DesignProblem& problem, int points, double min_ratio)
{
    if (points < 2 || !(min_ratio > 0.0 && min_ratio < 1.0))
        throw std::invalid_argument("path grid needs at least 2 points and a ratio in (0, 1)");
    const double top = lambda_max(problem);
    if (!(top > 0.0))
        throw std::invalid_argument("X'Y is zero; the lasso path is empty");
    std::vector<double> grid(points);
    for (int k = 0; k < points; ++k)
        grid[k] = top * std::pow(min_ratio, double(k) / (points - 1));
    return grid;
}

std::vector<double> lasso_max_statistic(const DesignProblem& problem, const std::vector<double>& lambda_grid,
                                        const LassoOptions& opts)
{
    if (lambda_grid.size() < 50)
        log_warning("lasso_max_statistic: grids under 50 points give a coarse statistic");
    for (std::size_t k = 1; k < lambda_grid.size(); ++k)
        if (!(lambda_grid[k] < lambda_grid[k - 1]))
            throw std::invalid_argument("lasso_max_statistic needs a strictly descending grid");

    const LassoSolver solver(problem, opts);
    std::vector<double> stat(problem.p(), 0.0);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(problem.p());
    for (double lambda : lambda_grid) {
        beta = solver.fit(lambda, beta).beta_hat;
        for (Eigen::Index j = 0; j < problem.p(); ++j)
            if (beta[j] != 0.0 && stat[j] == 0.0)
                stat[j] = lambda;
    }
    return stat;
}

std::vector<double> default_cv_grid()
{
    std::vector<double> grid(50);
    for (int k = 0; k < 50; ++k)
        grid[k] = 1e-2 * std::pow(400.0, k / 49.0);
    return grid;
}

CvResult cross_validate(const DesignProblem& problem, int folds, const std::vector<double>& lambda_grid,
                        std::uint64_t seed, const LassoOptions& opts, int patience)
{
    problem.validate();
    const Eigen::Index n = problem.n();
    if (folds < 2)
        throw std::invalid_argument("cross-validation needs at least 2 folds");
    if (n < folds)
        throw std::invalid_argument("cross-validation has empty folds: n=" + std::to_string(n) +
                                    " < K=" + std::to_string(folds));
    if (lambda_grid.empty())
        throw std::invalid_argument("cross-validation needs a lambda grid");

    const double inf = std::numeric_limits<double>::infinity();
    CvResult out;
    out.lambdas = lambda_grid;
    std::sort(out.lambdas.begin(), out.lambdas.end());
    out.lambdas.erase(std::unique(out.lambdas.begin(), out.lambdas.end()), out.lambdas.end());
    out.cv_error.assign(out.lambdas.size(), 0.0);

    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng = make_rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    for (int f = 0; f < folds; ++f) {
        const Eigen::Index begin = n * f / folds;
        const Eigen::Index end = n * (f + 1) / folds;
        const Eigen::Index n_test = end - begin;
        const Eigen::Index n_train = n - n_test;
        const double scale = std::sqrt(double(n) / double(n_train));

        DesignProblem train{Eigen::MatrixXd(n_train, problem.p()), Eigen::VectorXd(n_train)};
        Eigen::MatrixXd X_test(n_test, problem.p());
        Eigen::VectorXd Y_test(n_test);
        for (Eigen::Index k = 0, tr = 0, te = 0; k < n; ++k) {
            const Eigen::Index row = order[k];
            if (k >= begin && k < end) {
                X_test.row(te) = problem.X.row(row) * scale;
                Y_test[te++] = problem.Y[row];
            } else {
                train.X.row(tr) = problem.X.row(row) * scale;
                train.Y[tr++] = problem.Y[row];
            }
        }

        const LassoSolver solver(train, opts);
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(problem.p());
        double fold_best = std::numeric_limits<double>::infinity();
        int worse_in_a_row = 0;
        for (std::size_t k = out.lambdas.size(); k-- > 0;) {
            try {
                beta = solver.fit(out.lambdas[k], beta).beta_hat;
            } catch (const LassoError& e) {
                log_warning("cross_validate: fold " + std::to_string(f + 1) + " path stops early: " + e.what());
                std::fill(out.cv_error.begin(), out.cv_error.begin() + k + 1, inf);
                break;
            }
            const double err = (Y_test - X_test * beta).squaredNorm();
            out.cv_error[k] += err;
            worse_in_a_row = err < fold_best ? 0 : worse_in_a_row + 1;
            fold_best = std::min(fold_best, err);
            if (patience > 0 && worse_in_a_row >= patience) {
                // Smaller lambdas in this fold are left unevaluated.
                std::fill(out.cv_error.begin(), out.cv_error.begin() + k, inf);
                break;
            }
        }
    }
    for (auto& e : out.cv_error)
        e /= double(n);

    // Ties resolve toward the larger lambda.
    std::size_t best = out.lambdas.size() - 1;
    for (std::size_t k = out.lambdas.size(); k-- > 0;)
        if (out.cv_error[k] < out.cv_error[best])
            best = k;
    out.lambda_cv = out.lambdas[best];
    return out;
}

DesignProblem read_design_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open data file " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t", used) != std::string::npos)
                    numeric = false;
            } catch (const std::exception&) {
                numeric = false;
            }
            if (!numeric)
                break;
        }
        if (!numeric) {
            if (rows.empty() && line_no == 1)
                continue;
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": non-numeric entry");
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                                     std::to_string(rows.front().size()) + " columns, found " +
                                     std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty() || rows.front().size() < 2)
        throw std::runtime_error(path + ": need at least one row with Y and one predictor column");

    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(rows.front().size() - 1);
    DesignProblem out{Eigen::MatrixXd(n, p), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        out.Y[i] = rows[i][0];
        for (Eigen::Index j = 0; j < p; ++j)
            out.X(i, j) = rows[i][j + 1];
    }
    out.validate();
    return out;
}

void write_design_csv(const std::string& path, const DesignProblem& problem)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out.precision(17);
    out << "y";
    for (Eigen::Index j = 0; j < problem.p(); ++j)
        out << ",x" << j + 1;
    out << '\n';
    for (Eigen::Index i = 0; i < problem.n(); ++i) {
        out << problem.Y[i];
        for (Eigen::Index j = 0; j < problem.p(); ++j)
            out << ',' << problem.X(i, j);
        out << '\n';
    }
}

}  // namespace amplasso
