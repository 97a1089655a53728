#include <cmath>
#include <filesystem>
#include <random>

#include "amp_instance.hpp"
#include "amplasso/lasso.hpp"
#include "amplasso/state_evolution.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace amplasso;

TEST_CASE("zero solution above lambda_max")
{
    const auto inst = testdata::amp_instance(fixtures::sparse_gaussian(), 60, 80, 1.0, 3);
    const double top = lambda_max(inst.problem);
    const auto f = fit(inst.problem, top * 1.0001);
    CHECK(f.support_size == 0);
    CHECK(f.beta_hat.isZero(0.0));
    CHECK(fit(inst.problem, top * 0.9).support_size > 0);
}

TEST_CASE("orthonormal design has the soft-threshold solution")
{
    std::mt19937_64 rng(11);
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::MatrixXd A(50, 20);
    for (Eigen::Index i = 0; i < A.size(); ++i)
        A.data()[i] = z(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    DesignProblem prob{qr.householderQ() * Eigen::MatrixXd::Identity(50, 20), Eigen::VectorXd(50)};
    for (Eigen::Index i = 0; i < 50; ++i)
        prob.Y[i] = 3.0 * z(rng);
    const Eigen::VectorXd corr = prob.X.transpose() * prob.Y;
    for (double lambda : {0.1, 1.0, 2.5}) {
        const auto f = fit(prob, lambda);
        for (Eigen::Index j = 0; j < 20; ++j)
            CHECK(std::abs(f.beta_hat[j] - oracle::soft(corr[j], lambda)) <= 1e-10);
    }
}

TEST_CASE("KKT, duality gap and support size on random instances")
{
    std::mt19937_64 seeds(99);
    for (int rep = 0; rep < 10; ++rep) {
        const Eigen::Index n = 40 + rep * 7;
        const Eigen::Index p = 30 + rep * 13;
        const auto inst = testdata::amp_instance(fixtures::bimodal(), n, p, 1.0, seeds());
        const double lambda = lambda_max(inst.problem) * (0.02 + 0.09 * rep);
        const auto f = fit(inst.problem, lambda);
        CHECK(kkt_violation(inst.problem, f.beta_hat, lambda) <= 1e-6);
        CHECK(f.duality_gap <= 1e-8 * (1.0 + f.objective));
        CHECK(f.support_size <= n);
        CHECK(f.objective == doctest::Approx(lasso_objective(inst.problem, f.beta_hat, lambda)).epsilon(1e-12));
    }
}

TEST_CASE("objective never increases across sweeps")
{
    const auto inst = testdata::amp_instance(fixtures::sparse_gaussian(), 100, 200, 0.5, 7);
    LassoOptions opts;
    opts.record_objective = true;
    const auto f = fit(inst.problem, 0.3, opts);
    REQUIRE(f.objective_history.size() >= 2);
    for (std::size_t k = 1; k < f.objective_history.size(); ++k)
        CHECK(f.objective_history[k] <= f.objective_history[k - 1] * (1.0 + 1e-13));
}

TEST_CASE("warm-started path matches cold fits")
{
    const auto inst = testdata::amp_instance(fixtures::two_points(), 120, 200, 1.0, 21);
    const LassoSolver solver(inst.problem);
    const auto grid = lasso_path_grid(inst.problem, 20, 0.05);
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(200);
    for (double lambda : grid) {
        warm = solver.fit(lambda, warm).beta_hat;
        const auto cold = solver.fit(lambda);
        CHECK((warm - cold.beta_hat).lpNorm<Eigen::Infinity>() <= 1e-6);
    }
}

TEST_CASE("sweep cap reports the gap")
{
    const auto inst = testdata::amp_instance(fixtures::sparse_gaussian(), 50, 100, 1.0, 5);
    LassoOptions opts;
    opts.max_sweeps = 2;
    try {
        fit(inst.problem, 0.01, opts);
        FAIL("expected LassoError");
    } catch (const LassoError& e) {
        CHECK(e.gap > 0.0);
        CHECK(std::string(e.what()).find("duality gap") != std::string::npos);
    }
    CHECK_THROWS_AS(fit(inst.problem, 0.0), std::invalid_argument);
}

TEST_CASE("AMP-regime estimation error matches state evolution")
{
    const auto prior = fixtures::sparse_gaussian();
    const auto sol = solve({prior, 1.0, 2.0, 1.0});
    const double predicted = 2.0 * (sol.tau * sol.tau - 1.0);
    // One instance at p = 500 scatters by about 13%, so compare the replicate mean.
    double total = 0.0;
    const int reps = 12;
    for (int rep = 0; rep < reps; ++rep) {
        const auto inst = testdata::amp_instance(prior, 1000, 500, 1.0, 400 + rep);
        const auto f = fit(inst.problem, 1.0);
        total += (f.beta_hat - inst.beta).squaredNorm() / 500.0;
    }
    CHECK(std::abs(total / reps / predicted - 1.0) < 0.15);
}

TEST_CASE("lasso-max statistic")
{
    auto inst = testdata::amp_instance(fixtures::sparse_gaussian(), 150, 100, 1.0, 8);
    inst.problem.X.col(4).setZero();
    const auto grid = lasso_path_grid(inst.problem, 60, 1e-2);
    const auto stat = lasso_max_statistic(inst.problem, grid);
    CHECK(stat[4] == 0.0);
    int active = 0;
    for (double s : stat) {
        CHECK((s == 0.0 || std::find(grid.begin(), grid.end(), s) != grid.end()));
        active += s > 0.0;
    }
    CHECK(active > 10);
    // Nothing is active at lambda_max itself.
    CHECK(*std::max_element(stat.begin(), stat.end()) == grid[1]);
    CHECK_THROWS(lasso_max_statistic(inst.problem, {1.0, 2.0}));
}

TEST_CASE("cross-validation")
{
    SUBCASE("noiseless recovery prefers the smallest lambda")
    {
        const auto inst = testdata::amp_instance(PriorSpec::point(1.0, 5.0), 200, 100, 0.0, 31);
        const auto cv = cross_validate(inst.problem, 5, {1e-3, 0.1, 1.0, 3.0}, 1);
        CHECK(cv.lambda_cv <= 0.1);
        CHECK(cv.cv_error.size() == 4);
    }
    SUBCASE("deterministic per seed")
    {
        const auto inst = testdata::amp_instance(fixtures::bimodal(), 150, 150, 1.0, 32);
        const auto grid = default_cv_grid();
        const auto a = cross_validate(inst.problem, 5, grid, 9);
        const auto b = cross_validate(inst.problem, 5, grid, 9);
        CHECK(a.lambda_cv == b.lambda_cv);
        CHECK(a.cv_error == b.cv_error);
        CHECK(a.lambdas.front() == doctest::Approx(1e-2));
        CHECK(a.lambdas.back() == doctest::Approx(4.0));
    }
    SUBCASE("invalid fold counts")
    {
        const auto inst = testdata::amp_instance(fixtures::sparse_gaussian(), 4, 10, 1.0, 33);
        CHECK_THROWS_AS(cross_validate(inst.problem, 1, {1.0}, 0), std::invalid_argument);
        CHECK_THROWS_AS(cross_validate(inst.problem, 5, {1.0}, 0), std::invalid_argument);
    }
    SUBCASE("fold count changes the limit through the effective delta")
    {
        const SeModel model{fixtures::bimodal(), 1.0, 1.0};
        const auto two = optimal_lambda(model, cv_effective_delta(1.0, 2));
        const auto ten = optimal_lambda(model, cv_effective_delta(1.0, 10));
        CHECK(two.effective_delta == doctest::Approx(0.5));
        CHECK(ten.effective_delta == doctest::Approx(0.9));
        CHECK(std::abs(two.lambda - ten.lambda) > 1e-3);
    }
}

TEST_CASE("CSV round trip")
{
    const auto inst = testdata::amp_instance(fixtures::sparse_gaussian(), 7, 4, 1.0, 1);
    const auto path = (std::filesystem::temp_directory_path() / "amplasso_design_test.csv").string();
    write_design_csv(path, inst.problem);
    const auto back = read_design_csv(path);
    CHECK(back.X == inst.problem.X);
    CHECK(back.Y == inst.problem.Y);
    std::filesystem::remove(path);
}
