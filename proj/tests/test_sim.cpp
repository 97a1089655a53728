#include <cmath>
#include <filesystem>
#include <fstream>

#include "amplasso/sim.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace amplasso;

namespace {

ExperimentConfig small_config()
{
    ExperimentConfig c;
    c.name = "small";
    c.prior = fixtures::sparse_gaussian();
    c.delta = 0.8;
    c.p = 300;
    c.replications = 3;
    c.seed = 17;
    return c;
}

}  // namespace

TEST_CASE("config JSON round trip and validation")
{
    auto c = small_config();
    c.lambda.kind = LambdaPolicy::Kind::cv;
    c.lambda.folds = 5;
    c.lambda.grid = {0.5, 1.0, 2.0};
    c.methods = {SimMethod::lasso_max, SimMethod::eb};
    c.bandwidth = 0.25;
    const auto back = experiment_from_json_text(experiment_to_json_text(c));
    CHECK(back.name == "small");
    CHECK(back.p == 300);
    CHECK(back.n() == 240);
    CHECK(back.lambda.kind == LambdaPolicy::Kind::cv);
    CHECK(back.lambda.folds == 5);
    CHECK(back.lambda.grid == c.lambda.grid);
    CHECK(back.methods == c.methods);
    CHECK(*back.bandwidth == 0.25);
    CHECK(back.prior.epsilon == doctest::Approx(0.1));

    const std::string prior = R"("prior": {"epsilon": 0.1, "components": [{"w": 1, "point": 2}]})";
    CHECK_NOTHROW(experiment_from_json_text("{" + prior + R"(, "delta": 1, "p": 100})"));
    CHECK_THROWS_AS(experiment_from_json_text("{" + prior + R"(, "delta": 1, "p": 10})"), std::invalid_argument);
    CHECK_THROWS_AS(experiment_from_json_text("{" + prior + R"(, "delta": 1, "p": 100, "colour": 1})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(experiment_from_json_text("{" + prior + R"(, "delta": 1, "p": 100, "methods": ["magic"]})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        experiment_from_json_text("{" + prior + R"(, "delta": 1, "p": 100, "lambda": {"policy": "cv", "value": 1}})"),
        std::invalid_argument);
    CHECK_THROWS_AS(experiment_from_json_text("{" + prior + R"(, "delta": 1, "p": 100, "replications": 0})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(experiment_from_json_text("{not json"), std::invalid_argument);
}

TEST_CASE("data generation")
{
    auto c = small_config();

    SUBCASE("same seed and replication give identical data")
    {
        const auto a = generate(c, 1);
        const auto b = generate(c, 1);
        CHECK(a.problem.X == b.problem.X);
        CHECK(a.problem.Y == b.problem.Y);
        CHECK(a.beta == b.beta);
    }

    SUBCASE("replications draw independent data")
    {
        const auto a = generate(c, 0);
        const auto b = generate(c, 1);
        CHECK(a.problem.X != b.problem.X);
        // Entries of two independent designs are uncorrelated.
        const auto x = a.problem.X.reshaped();
        const auto y = b.problem.X.reshaped();
        const double corr = x.dot(y) / (x.norm() * y.norm());
        CHECK(std::abs(corr) < 4.0 / std::sqrt(double(x.size())));
    }

    SUBCASE("noiseless data satisfy Y = X beta")
    {
        c.sigma = 0.0;
        const auto d = generate(c, 2);
        CHECK((d.problem.Y - d.problem.X * d.beta).norm() == 0.0);
    }

    SUBCASE("column norms concentrate at one")
    {
        c.p = 2000;
        c.delta = 1.0;
        const auto d = generate(c, 0);
        const Eigen::VectorXd norms = d.problem.X.colwise().squaredNorm();
        // ||X_j||^2 ~ chi^2_n / n has sd sqrt(2/n).
        const double sd = std::sqrt(2.0 / double(c.n()));
        CHECK(std::abs(norms.mean() - 1.0) < 4.0 * sd / std::sqrt(double(c.p)));
        CHECK((norms.array() - 1.0).abs().maxCoeff() < 6.0 * sd);
    }

    SUBCASE("zero fraction of beta matches the prior")
    {
        c.p = 5000;
        const auto d = generate(c, 0);
        const double zeros = double((d.beta.array() == 0.0).count());
        const double mean = 0.9 * c.p;
        const double sd = std::sqrt(c.p * 0.9 * 0.1);
        CHECK(std::abs(zeros - mean) < 4.0 * sd);
    }

    SUBCASE("changing the seed changes the data")
    {
        auto other = c;
        other.seed = 18;
        CHECK(generate(c, 0).problem.X != generate(other, 0).problem.X);
    }
}

TEST_CASE("step interpolation of empirical curves")
{
    const std::vector<EmpiricalPoint> curve = {
        {0, std::nan(""), 0.0, 0.0}, {1, 0.1, 0.0, 0.25}, {2, 0.2, 0.5, 0.25}, {3, 0.3, 1.0 / 3, 0.5}};
    CHECK(step_fdp_at(curve, 0.1) == 0.0);
    CHECK(step_fdp_at(curve, 0.25) == 0.0);
    CHECK(step_fdp_at(curve, 0.3) == doctest::Approx(1.0 / 3));
    CHECK(std::isnan(step_fdp_at(curve, 0.6)));
}

TEST_CASE("windowed fdp")
{
    Eigen::VectorXd beta_hat(6);
    beta_hat << 0.0, 1.0, 1.2, 1.5, -1.0, 3.0;
    const std::vector<bool> is_null = {true, true, false, true, true, false};
    CHECK(windowed_fdp(beta_hat, is_null, 1.2, 0.4) == doctest::Approx(2.0 / 3));
    CHECK(windowed_fdp(beta_hat, is_null, -1.0, 0.4) == 1.0);
    CHECK(windowed_fdp(beta_hat, is_null, 2.2, 0.1) == 0.0);
    // Closed window edges.
    CHECK(windowed_fdp(beta_hat, is_null, 2.5, 0.5) == 0.0);
    CHECK_THROWS_AS(windowed_fdp(beta_hat, is_null, 0.2, 0.4), std::domain_error);
    CHECK_THROWS_AS(windowed_fdp(beta_hat, is_null, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(windowed_fdp(beta_hat, {true}, 1.0, 0.4), std::invalid_argument);
}

TEST_CASE("end-to-end run")
{
    auto c = small_config();
    c.methods = {SimMethod::eb, SimMethod::oracle, SimMethod::thresholded_lasso, SimMethod::lasso_max};
    c.lasso_max_grid_points = 60;
    c.svg = true;
    const auto report = run(c, 2);
    REQUIRE(report.failures.empty());
    REQUIRE(report.records.size() == 3);
    CHECK(report.theory_lambda == 1.0);
    CHECK(report.eb_oracle_sup.has_value());
    for (const auto& rec : report.records) {
        CHECK(rec.ok);
        CHECK(rec.curves.size() == 4);
        for (const auto& curve : rec.curves) {
            REQUIRE(!curve.points.empty());
            CHECK(curve.points.front().k == 0);
            for (std::size_t i = 1; i < curve.points.size(); ++i)
                CHECK(curve.points[i].tpp >= curve.points[i - 1].tpp);
        }
    }
    for (const auto& s : report.summaries) {
        CHECK(s.replications_used == 3);
        CHECK(s.tpp_grid.size() == 200);
        CHECK(std::isfinite(s.mean_abs_deviation));
        CHECK(s.sup_deviation >= s.mean_abs_deviation);
    }

    SUBCASE("thread count does not change results")
    {
        const auto serial = run(c, 1);
        for (std::size_t m = 0; m < report.summaries.size(); ++m)
            CHECK(serial.summaries[m].mean_fdp == report.summaries[m].mean_fdp);
    }

    SUBCASE("outputs")
    {
        const auto dir = std::filesystem::temp_directory_path() / "amplasso_test_sim";
        std::filesystem::remove_all(dir);
        write_run_outputs(report, dir.string());
        for (const char* f : {"summary.json", "rep0_eb.csv", "rep2_lasso_max.csv", "theory_oracle.csv",
                              "mean_thresholded_lasso.csv", "curves_eb.svg"})
            CHECK_MESSAGE(std::filesystem::exists(dir / f), f);
        std::ifstream in(dir / "rep1_oracle.csv");
        std::string header;
        std::getline(in, header);
        CHECK(header == "threshold,tpp,fdp");
        std::filesystem::remove_all(dir);
    }
}

TEST_CASE("a failing replication is recorded, not fatal")
{
    auto c = small_config();
    c.replications = 2;
    c.lambda.kind = LambdaPolicy::Kind::cv;
    c.lambda.folds = 5;
    c.lambda.grid = {1.0};
    Tolerances tol;
    tol.lasso.max_sweeps = 1;
    const auto report = run(c, 1, tol);
    CHECK(report.failures.size() == 2);
    for (const auto& rec : report.records)
        CHECK(!rec.ok);
}
