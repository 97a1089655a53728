#include <algorithm>
#include <cmath>
#include <random>

#include "amplasso/normal.hpp"
#include "amplasso/theory.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace amplasso;

namespace {

SeSolution solved(const PriorSpec& prior, double delta, double lambda, double sigma = 1.0)
{
    return solve({prior, sigma, delta, lambda});
}

// Tail probability of a Gaussian mixture, P(|Pi_1 + tau Z| > c), from the
// component formulas written out directly.
double mixture_tail(const PriorSpec& prior, double tau, double c)
{
    double out = 0.0;
    for (const auto& comp : prior.components) {
        const double sd = std::sqrt(comp.var() + tau * tau);
        out += comp.weight * (oracle::Phi((-c - comp.mean()) / sd) + oracle::Phi((comp.mean() - c) / sd));
    }
    return out;
}

double q_formula(const PriorSpec& prior, double alpha, double tau, double x)
{
    const double y = x + std::copysign(alpha * tau, x);
    double alt = 0.0;
    for (const auto& comp : prior.components) {
        const double sd = std::sqrt(comp.var() + tau * tau);
        alt += comp.weight * oracle::phi((y - comp.mean()) / sd) / sd;
    }
    return (1.0 - prior.epsilon) * oracle::phi(y / tau) / tau + prior.epsilon * alt;
}

}  // namespace

TEST_CASE("DensityPair: q0 closed form and masses")
{
    const auto prior = fixtures::bimodal();
    const auto sol = solved(prior, 1.0, 1.0);
    const auto dens = DensityPair::from_solution(prior, sol);
    const double a = sol.alpha, tau = sol.tau;

    for (double x : {-6.0, -1.3, -1e-3, 1e-4, 0.7, 2.2, 9.0}) {
        const double expect = oracle::phi((x + std::copysign(a * tau, x)) / tau) / tau;
        CHECK(dens.q0(x) == doctest::Approx(expect).epsilon(1e-13));
        CHECK(dens.q(x) == doctest::Approx(q_formula(prior, a, tau, x)).epsilon(1e-13));
    }
    CHECK_THROWS_AS(dens.q0(0.0), std::domain_error);

    // Independent Simpson integrals over each half line.
    const double hi = 40.0;
    auto q0f = [&](double x) { return oracle::phi((x + a * tau) / tau) / tau; };
    const double q0_int = 2.0 * oracle::simpson(q0f, 0.0, hi, 200000);
    CHECK(q0_int == doctest::Approx(2.0 * oracle::Phi(-a)).epsilon(1e-9));
    CHECK(dens.q0_mass(-INFINITY, 0.0) + dens.q0_mass(0.0, INFINITY) == doctest::Approx(q0_int).epsilon(1e-8));

    auto qf_pos = [&](double x) { return q_formula(prior, a, tau, x); };
    auto qf_neg = [&](double x) { return q_formula(prior, a, tau, -x); };
    const double q_int = oracle::simpson(qf_pos, 1e-14, hi, 200000) + oracle::simpson(qf_neg, 1e-14, hi, 200000);
    const double w0 = 2.0 * oracle::Phi(-a);
    const double w1 = mixture_tail(prior, tau, a * tau);
    const double w = 1.0 - ((1.0 - prior.epsilon) * (1.0 - w0) + prior.epsilon * (1.0 - w1));
    CHECK(q_int == doctest::Approx(w).epsilon(1e-8));
    CHECK(std::abs(dens.w() - w) < 1e-8);
    CHECK(std::abs(dens.q_mass(-INFINITY, 0.0) + dens.q_mass(0.0, INFINITY) - w) < 1e-8);

    // Mixture consistency of the masses.
    const double mix = (1 - prior.epsilon) * dens.q0_mass(0.5, 3.0) + prior.epsilon * dens.q1_mass(0.5, 3.0);
    CHECK(std::abs(mix - dens.q_mass(0.5, 3.0)) < 1e-15);
    CHECK_THROWS_AS(dens.q_mass(-1.0, 1.0), std::domain_error);
}

TEST_CASE("DensityPair: ratio stays finite far in the tails")
{
    const auto prior = fixtures::sparse_gaussian();
    const DensityPair dens(prior, 1.2, 1.1);
    for (double x : {60.0, -60.0, 200.0}) {
        const double r = dens.ratio(x);
        CHECK(std::isfinite(r));
        CHECK(r >= 0.0);
    }
    CHECK(dens.ratio(200.0) < 1e-100);
    // Null side far out: q1 from N(3.5, 1) also vanishes, but relative to the null it dominates.
    CHECK(dens.ratio(-60.0) < 1e-10);
}

TEST_CASE("lfdr basics")
{
    const DensityPair null_only(PriorSpec::gaussian(0.0, 3.0, 1.0), 1.0, 1.3);
    for (double x : {-4.0, -0.2, 0.1, 3.3})
        CHECK(lfdr(x, null_only) == doctest::Approx(1.0));

    PriorSpec sym{0.2,
                  {MixtureComponent{0.5, GaussianComponent{-2.0, 1.0}},
                   MixtureComponent{0.5, GaussianComponent{2.0, 1.0}}}};
    const DensityPair dens(sym, 1.1, 1.4);
    for (double x : {0.05, 0.8, 2.5, 7.0}) {
        CHECK(lfdr(x, dens) == doctest::Approx(lfdr(-x, dens)).epsilon(1e-14));
        CHECK(lfdr(x, dens) >= 0.0);
        CHECK(lfdr(x, dens) <= 1.0);
    }
    CHECK_THROWS_AS(lfdr(0.0, dens), std::domain_error);
}

TEST_CASE("lfdr matches a binned Monte Carlo posterior")
{
    const auto prior = fixtures::bimodal();
    const auto sol = solved(prior, 1.0, 1.0);
    const auto dens = DensityPair::from_solution(prior, sol);
    const double thr = sol.alpha * sol.tau;

    const double width = 0.02;
    const double lo = -10.0;
    const int bins = 1000;
    std::vector<double> total(bins, 0.0), nulls(bins, 0.0);
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> z(0.0, 1.0);
    const std::size_t draws = 100'000'000;
    const auto beta = sample_prior(prior, draws, rng());
    for (double b : beta) {
        const double x = oracle::soft(b + sol.tau * z(rng), thr);
        if (x == 0.0)
            continue;
        const auto k = static_cast<long>(std::floor((x - lo) / width));
        if (k < 0 || k >= bins)
            continue;
        total[k] += 1.0;
        if (b == 0.0)
            nulls[k] += 1.0;
    }
    int checked = 0;
    double worst = 0.0;
    for (int k = 0; k < bins; ++k) {
        const double x = lo + (k + 0.5) * width;
        if (std::abs(x) < width || dens.q(x) <= 1e-3)
            continue;
        const double dev = std::abs(nulls[k] / total[k] - lfdr(x, dens));
        worst = std::max(worst, dev);
        CHECK(dev < 0.02);
        ++checked;
    }
    CHECK(checked > 200);
    MESSAGE("worst binned deviation " << worst);
}

TEST_CASE("level sets")
{
    const auto prior = fixtures::bimodal();
    const auto sol = solved(prior, 1.0, 1.0);
    const auto dens = DensityPair::from_solution(prior, sol);
    const LevelSetScanner scanner(dens);

    SUBCASE("finite endpoints sit on the threshold")
    {
        for (double t : {0.05, 0.3, 0.6, 0.95, 1.05}) {
            const auto set = scanner.at(t);
            REQUIRE(!set.intervals.empty());
            for (const auto& iv : set.intervals) {
                CHECK(iv.lo < iv.hi);
                CHECK((iv.hi <= -set.zero_band || iv.lo >= set.zero_band));
                for (double e : {iv.lo, iv.hi}) {
                    if (std::isfinite(e) && std::abs(e) > set.zero_band * 1.0001)
                        CHECK(std::abs(dens.ratio(e) - t) < 1e-8);
                }
                const double mid = std::isfinite(iv.hi) && std::isfinite(iv.lo) ? 0.5 * (iv.lo + iv.hi)
                                   : std::isfinite(iv.lo)                       ? iv.lo + 1.0
                                                                                : iv.hi - 1.0;
                CHECK(dens.ratio(mid) < t);
            }
            for (std::size_t k = 1; k < set.intervals.size(); ++k)
                CHECK(set.intervals[k - 1].hi <= set.intervals[k].lo);
        }
    }

    SUBCASE("small thresholds give the empty set")
    {
        CHECK(scanner.at(1e-300).intervals.empty());
        CHECK(oracle_tradeoff(scanner, 1e-300).tpp == 0.0);
        CHECK(oracle_tradeoff(scanner, 1e-300).fdp == 0.0);
    }

    SUBCASE("nesting")
    {
        std::vector<double> ts = {0.02, 0.1, 0.25, 0.5, 0.8, 1.0, 1.1};
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(-12.0, 12.0);
        std::vector<double> probes(4000);
        for (auto& x : probes)
            x = u(rng);
        for (std::size_t k = 1; k < ts.size(); ++k) {
            const auto small = scanner.at(ts[k - 1]);
            const auto large = scanner.at(ts[k]);
            for (double x : probes)
                if (small.contains(x))
                    CHECK(large.contains(x));
        }
    }

    SUBCASE("matches the one-shot helper")
    {
        const auto a = scanner.at(0.4);
        const auto b = level_set(dens, 0.4);
        REQUIRE(a.intervals.size() == b.intervals.size());
        for (std::size_t k = 0; k < a.intervals.size(); ++k) {
            CHECK(a.intervals[k].lo == b.intervals[k].lo);
            CHECK(a.intervals[k].hi == b.intervals[k].hi);
        }
    }
}

TEST_CASE("lasso and thresholded-lasso limits")
{
    const auto prior = fixtures::sparse_gaussian();
    const auto sol = solved(prior, 2.0, 1.0);
    const auto lasso = lasso_tradeoff(prior, sol);
    const double tpp = mixture_tail(prior, sol.tau, sol.alpha * sol.tau);
    const double nulls = 2.0 * 0.9 * oracle::Phi(-sol.alpha);
    CHECK(lasso.tpp == doctest::Approx(tpp).epsilon(1e-10));
    CHECK(lasso.fdp == doctest::Approx(nulls / (nulls + 0.1 * tpp)).epsilon(1e-10));

    const auto tl0 = thresholded_lasso_tradeoff(prior, sol, 0.0);
    CHECK(tl0.tpp == lasso.tpp);
    CHECK(tl0.fdp == lasso.fdp);

    const auto tl_inf = thresholded_lasso_tradeoff(prior, sol, 1e3);
    CHECK(tl_inf.tpp == 0.0);
    CHECK(tl_inf.fdp == 0.0);
    CHECK_THROWS(thresholded_lasso_tradeoff(prior, sol, -1.0));

    // eps -> 1: no nulls, so no false discoveries.
    const auto dense = PriorSpec::gaussian(1.0 - 1e-12, 3.5, 1.0);
    CHECK(lasso_tradeoff(dense, solved(dense, 2.0, 1.0)).fdp < 1e-10);

    // A far-away point mass is always detected.
    const auto far = PriorSpec::point(0.1, 60.0);
    CHECK(lasso_tradeoff(far, solved(far, 2.0, 1.0)).tpp == doctest::Approx(1.0).epsilon(1e-12));

    const auto curve = thresholded_lasso_curve(prior, sol, 1.0, 200);
    REQUIRE(curve.points.size() == 200);
    CHECK(curve.points.back().threshold == 0.0);
    CHECK(curve.points.front().tpp <= 1e-4);
    for (std::size_t k = 1; k < curve.points.size(); ++k) {
        CHECK(curve.points[k].threshold < curve.points[k - 1].threshold);
        CHECK(curve.points[k].tpp >= curve.points[k - 1].tpp);
    }
}

TEST_CASE("oracle limits")
{
    SUBCASE("all nulls at t = 1")
    {
        const DensityPair dens(PriorSpec::gaussian(0.0, 3.5, 1.0), 1.0, 1.2);
        const auto v = oracle_tradeoff(dens, 1.0);
        CHECK(v.fdp == doctest::Approx(1.0));
    }

    const auto prior = fixtures::sparse_gaussian();
    const auto sol = solved(prior, 2.0, 1.0);
    const auto dens = DensityPair::from_solution(prior, sol);
    const LevelSetScanner scanner(dens);

    SUBCASE("tpp nondecreasing in t and all selected at the top")
    {
        double prev = -1.0;
        for (double t = 0.01; t < scanner.max_ratio() * 1.01; t += 0.01) {
            const auto v = oracle_tradeoff(scanner, t);
            CHECK(v.tpp >= prev - 1e-12);
            CHECK(v.fdp >= 0.0);
            CHECK(v.fdp <= 1.0);
            prev = v.tpp;
        }
        // Everything outside the zero band.
        const double band = scanner.zero_band();
        const double outside = dens.w1() - dens.q1_mass(-band, 0.0) - dens.q1_mass(0.0, band);
        CHECK(max_oracle_tpp(scanner) == doctest::Approx(outside).epsilon(1e-9));
    }

    SUBCASE("two tails for a one-sided Gaussian prior")
    {
        // The wider non-null spread also claims the far negative tail.
        const auto set = scanner.at(0.5);
        REQUIRE(set.intervals.size() == 2);
        CHECK(std::isinf(set.intervals[0].lo));
        CHECK(std::isinf(set.intervals[1].hi));
        const auto v = oracle_tradeoff(scanner, 0.5);
        const double shift = sol.alpha * sol.tau;
        const double up = set.intervals[1].lo + shift;
        const double down = set.intervals[0].hi - shift;
        const double sd1 = std::sqrt(1.0 + sol.tau * sol.tau);
        const double p0 = oracle::Phi(-up / sol.tau) + oracle::Phi(down / sol.tau);
        const double p1 = oracle::Phi((3.5 - up) / sd1) + oracle::Phi((down - 3.5) / sd1);
        CHECK(v.tpp == doctest::Approx(p1).epsilon(1e-10));
        CHECK(v.fdp == doctest::Approx(0.9 * p0 / (0.9 * p0 + 0.1 * p1)).epsilon(1e-10));
    }

    SUBCASE("calibration round trip")
    {
        for (double t : {0.1, 0.4, 0.7}) {
            const double target = oracle_tradeoff(scanner, t).tpp;
            const double back = calibrate_threshold(scanner, target, 1e-8);
            CHECK(std::abs(oracle_tradeoff(scanner, back).tpp - target) <= 1e-8);
        }
        CHECK_THROWS_AS(calibrate_threshold(scanner, std::min(0.999, max_oracle_tpp(scanner) + 0.01), 1e-8),
                        UnreachableTarget);
    }

    SUBCASE("curve is evenly spaced in tpp")
    {
        const auto curve = oracle_curve(dens, 1.0, 50);
        REQUIRE(curve.points.size() == 50);
        const double top = curve.points.back().tpp;
        for (std::size_t k = 0; k + 1 < curve.points.size(); ++k)
            CHECK(std::abs(curve.points[k].tpp - top * (k + 1) / 50.0) < 1e-7);
    }
}

TEST_CASE("calibration at tpp 0.7 for the bimodal prior")
{
    const auto prior = fixtures::bimodal();
    const auto dens = DensityPair::from_solution(prior, solved(prior, 1.0, 1.0));
    const double t = calibrate_threshold(dens, 0.7);
    CHECK(std::abs(oracle_tradeoff(dens, t).tpp - 0.7) <= 1e-8);
}

TEST_CASE("oracle dominates thresholded lasso at lambda = 1")
{
    for (double delta : {0.5, 1.8}) {
        for (const auto& prior : fixtures::reference_priors()) {
            const auto sol = solved(prior, delta, 1.0);
            const auto dens = DensityPair::from_solution(prior, sol);
            const auto oracle_c = oracle_curve(dens, 1.0, 200);
            const auto tl = thresholded_lasso_curve(prior, sol, 1.0, 200);
            const auto lasso = lasso_tradeoff(prior, sol);
            for (const auto& pt : tl.points) {
                const double f = fdp_at_tpp(oracle_c, pt.tpp);
                if (std::isnan(f) || pt.tpp < 1e-3)
                    continue;
                CHECK(f <= pt.fdp + 1e-6);
            }
            const double at_lasso = fdp_at_tpp(oracle_c, lasso.tpp);
            if (!std::isnan(at_lasso))
                CHECK(at_lasso <= lasso.fdp + 1e-6);
        }
    }
}

TEST_CASE("thresholded lasso at the optimal lambda dominates the lasso path")
{
    // The ordering is a property of lambda*; at lambda = 1 it fails by up to
    // 1e-3 near the top of the thresholded curve for some of these priors.
    for (double delta : {0.5, 1.8}) {
        for (const auto& prior : fixtures::reference_priors()) {
            const SeModel model{prior, 1.0, delta};
            const auto best = optimal_lambda(model, delta);
            const auto sol = solved(prior, delta, best.lambda);
            const auto tl = thresholded_lasso_curve(prior, sol, best.lambda, 400);
            const auto lasso = lasso_curve(model, log_grid_descending(50.0, 1e-3, 2000));
            int compared = 0;
            for (double tpp = 0.005; tpp <= 0.95; tpp += 0.005) {
                const double a = fdp_at_tpp(tl, tpp);
                const double b = fdp_at_tpp(lasso, tpp);
                if (std::isnan(a) || std::isnan(b))
                    continue;
                ++compared;
                CHECK(a <= b + 1e-6);
            }
            CHECK(compared > 100);
        }
    }
}

TEST_CASE("fdp_at_tpp interpolation")
{
    TradeoffCurve c{Method::oracle_lfdr, 1.0, {{0, 0.1, 0.0}, {0, 0.3, 0.2}, {0, 0.5, 0.6}}};
    CHECK(fdp_at_tpp(c, 0.2) == doctest::Approx(0.1));
    CHECK(fdp_at_tpp(c, 0.5) == doctest::Approx(0.6));
    CHECK(fdp_at_tpp(c, 0.1) == doctest::Approx(0.0));
    CHECK(std::isnan(fdp_at_tpp(c, 0.05)));
    CHECK(std::isnan(fdp_at_tpp(c, 0.6)));
}

TEST_CASE("fdp versus lambda is minimized near the optimal lambda")
{
    const auto prior = fixtures::bimodal();
    const SeModel model{prior, 1.0, 1.0};
    const auto best = optimal_lambda(model, model.delta);
    const auto grid = linear_grid(0.1, 3.0, 40);
    const auto sweep = fdp_vs_lambda(model, 0.7, grid);
    std::size_t arg = 0;
    for (std::size_t k = 0; k < sweep.size(); ++k) {
        if (!sweep[k].ok)
            continue;
        CHECK(sweep[k].fdp >= 0.0);
        CHECK(sweep[k].fdp <= 1.0);
        if (!sweep[arg].ok || sweep[k].fdp < sweep[arg].fdp)
            arg = k;
    }
    const double step = grid[1] - grid[0];
    CHECK(std::abs(grid[arg] - best.lambda) <= step + 1e-12);

    // The cross-validation target costs little.
    const auto cv = optimal_lambda(model, cv_effective_delta(model.delta, 10));
    const auto at_cv = fdp_vs_lambda(model, 0.7, {cv.lambda, best.lambda});
    REQUIRE(at_cv[0].ok);
    REQUIRE(at_cv[1].ok);
    CHECK(at_cv[0].fdp >= at_cv[1].fdp - 1e-9);
    CHECK(at_cv[0].fdp - at_cv[1].fdp < 0.01);
}

TEST_CASE("lfdr_hat_limit and interval limits")
{
    const auto prior = fixtures::bimodal();
    const auto sol = solved(prior, 1.0, 1.0);
    const auto dens = DensityPair::from_solution(prior, sol);
    for (double x = -8.0; x <= 8.0; x += 0.37) {
        CHECK(lfdr_hat_limit(x, dens) >= lfdr(x, dens));
        CHECK(lfdr_hat_limit(x, dens) - lfdr(x, dens) < 0.05);
    }
    const DensityPair null_only(PriorSpec::gaussian(0.0, 3.0, 1.0), 1.0, 1.3);
    CHECK(lfdr_hat_limit(0.7, null_only) == lfdr(0.7, null_only));
    CHECK(interval_fdp_limit(null_only, 0.3, 2.0) == doctest::Approx(1.0));

    for (double x : {-3.0, 0.8, 2.5}) {
        const double wide = interval_fdp_limit(dens, x - 5e-5, x + 5e-5);
        const double narrow = interval_fdp_limit(dens, x - 5e-7, x + 5e-7);
        CHECK(std::abs(wide - narrow) < 1e-3);
        CHECK(std::abs(narrow - lfdr(x, dens)) < 1e-3);
    }
    CHECK_THROWS_AS(interval_fdp_limit(dens, -0.5, 0.5), std::domain_error);
}

TEST_CASE("grids")
{
    const auto g = log_grid_descending(4.0, 0.01, 50);
    CHECK(g.size() == 50);
    CHECK(g.front() == doctest::Approx(4.0));
    CHECK(g.back() == doctest::Approx(0.01));
    CHECK(std::is_sorted(g.rbegin(), g.rend()));
    const auto l = linear_grid(0.1, 3.0, 40);
    CHECK(l[39] == doctest::Approx(3.0));
    CHECK_THROWS(log_grid_descending(1.0, 2.0, 5));
}
