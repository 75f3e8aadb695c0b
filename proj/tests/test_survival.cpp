#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"

#include "censelect/errors.hpp"
#include "censelect/lasso.hpp"
#include "censelect/rng.hpp"
#include "censelect/survival.hpp"
#include "cox_core.hpp"
#include "oracle_helpers.hpp"

using namespace censelect;

namespace {

Dataset rows_only(const std::vector<std::array<double, 3>>& rows) {
  Dataset d;
  for (const auto& r : rows) {
    SurvivalRow row;
    row.time = r[0];
    row.status = static_cast<int>(r[1]);
    row.treatment = static_cast<int>(r[2]);
    d.rows.push_back(row);
  }
  return d;
}

}  // namespace

TEST_CASE("dataset validation catches every structural violation") {
  Dataset d = oracle::random_dataset(10, 2, 1);
  CHECK_NOTHROW(d.validate());

  Dataset bad = d;
  bad.rows[3].time = 0.0;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = d;
  bad.rows[3].time = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = d;
  bad.rows[0].status = 2;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = d;
  bad.rows[0].treatment = -1;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = d;
  bad.rows[5].covariates.pop_back();
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = d;
  bad.rows[5].covariates[0] = std::nan("");
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = d;
  bad.covariate_names[1] = bad.covariate_names[0];
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = d;
  bad.covariate_names[0] = "";
  CHECK_THROWS_AS(bad.validate(), DataError);

  CHECK(d.covariate_index("X2") == 1);
  CHECK_THROWS_AS(d.covariate_index("nope"), DataError);
}

TEST_CASE("step function is right-continuous with the declared initial value") {
  StepFunction f;
  f.initial_value = 1.0;
  f.knots = {1.0, 3.0};
  f.values = {0.5, 0.25};
  CHECK(f(0.0) == 1.0);
  CHECK(f(0.999) == 1.0);
  CHECK(f(1.0) == 0.5);
  CHECK(f(2.5) == 0.5);
  CHECK(f(3.0) == 0.25);
  CHECK(f(100.0) == 0.25);
}

TEST_CASE("kaplan-meier matches hand-computed product limits") {
  // no censoring: S(1) = 1/2, S(2) = 0
  StepFunction km = kaplan_meier(rows_only({{1, 1, 0}, {2, 1, 0}}));
  CHECK(km(0.5) == 1.0);
  CHECK(km(1.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(km(2.0) == doctest::Approx(0.0).epsilon(1e-12));

  // censored middle observation: risk sets 3 then 1
  km = kaplan_meier(rows_only({{1, 1, 0}, {2, 0, 0}, {3, 1, 0}}));
  CHECK(km(1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(km(2.5) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(km(3.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("kaplan-meier equals one minus the empirical cdf without censoring") {
  Dataset d = oracle::random_dataset(60, 0, 7, /*censor_prob=*/0.0, /*with_ties=*/true);
  StepFunction km = kaplan_meier(d);
  CHECK(km.initial_value == 1.0);
  for (std::size_t k = 0; k < km.knots.size(); ++k) {
    double below_or_equal = 0.0;
    for (const auto& row : d.rows) {
      if (row.time <= km.knots[k]) below_or_equal += 1.0;
    }
    CHECK(km.values[k] == doctest::Approx(1.0 - below_or_equal / d.size()).epsilon(1e-12));
    if (k > 0) CHECK(km.values[k] <= km.values[k - 1]);
    CHECK(km.values[k] >= 0.0);
    CHECK(km.values[k] <= 1.0);
  }
}

TEST_CASE("kaplan-meier stays near the exponential truth on a seeded draw") {
  std::mt19937_64 engine(make_engine(99)());
  std::exponential_distribution<double> expo(1.0);
  Dataset d;
  for (int i = 0; i < 200; ++i) {
    SurvivalRow row;
    row.time = expo(engine) + 1e-12;
    row.status = 1;
    d.rows.push_back(row);
  }
  StepFunction km = kaplan_meier(d);
  double worst = 0.0;
  for (std::size_t k = 0; k < km.knots.size(); ++k) {
    worst = std::max(worst, std::abs(km.values[k] - std::exp(-km.knots[k])));
  }
  CHECK(worst < 0.12);
}

TEST_CASE("kaplan-meier group filter and empty-group error") {
  Dataset d = rows_only({{1, 1, 1}, {2, 1, 1}, {3, 1, 0}});
  StepFunction treated = kaplan_meier(d, 1);
  CHECK(treated(1.0) == doctest::Approx(0.5));
  CHECK_THROWS_WITH_AS(kaplan_meier(rows_only({{1, 1, 1}}), 0), "empty group", DataError);
}

TEST_CASE("logrank is exactly zero for mirror-image arms") {
  Dataset d = rows_only({{1, 1, 0}, {2, 0, 0}, {3, 1, 0}, {1, 1, 1}, {2, 0, 1}, {3, 1, 1}});
  TestResult r = logrank_test(d);
  CHECK(r.score == 0.0);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("logrank matches 2x2 table enumeration on tie-free data") {
  Dataset d = rows_only({{1, 1, 1}, {2, 0, 0}, {3, 1, 0}, {4, 1, 1}, {5, 0, 1}, {6, 1, 0}});
  oracle::LogrankTables tables = oracle::logrank_by_tables(d);
  TestResult model = logrank_test(d, VarianceFlavor::model);
  CHECK(model.score == doctest::Approx(tables.score).epsilon(1e-12));
  CHECK(model.variance == doctest::Approx(tables.variance).epsilon(1e-12));
  CHECK(model.statistic ==
        doctest::Approx(tables.score / std::sqrt(tables.variance)).epsilon(1e-12));
  CHECK(model.p_value == doctest::Approx(two_sided_p(model.statistic)).epsilon(1e-15));

  // larger random tie-free instance
  Dataset big = oracle::random_dataset(40, 0, 11, 0.25);
  oracle::LogrankTables big_tables = oracle::logrank_by_tables(big);
  TestResult big_model = logrank_test(big, VarianceFlavor::model);
  CHECK(big_model.score == doctest::Approx(big_tables.score).epsilon(1e-10));
  CHECK(big_model.variance == doctest::Approx(big_tables.variance).epsilon(1e-10));
}

TEST_CASE("logrank equals the treatment-only cox score test at zero") {
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    Dataset d = oracle::random_dataset(50, 0, seed, 0.3);
    detail::CoxProblem problem = detail::make_problem(d, {}, true);
    detail::CoxEval eval = detail::evaluate(problem, Eigen::VectorXd::Zero(1), true);
    TestResult r = logrank_test(d, VarianceFlavor::model);
    CHECK(std::abs(r.score - eval.grad[0]) <= 1e-10 * std::max(1.0, std::abs(r.score)));
    CHECK(std::abs(r.variance - eval.info(0, 0)) <= 1e-10 * eval.info(0, 0));
  }
}

TEST_CASE("logrank is bitwise invariant to row permutation") {
  Dataset d = oracle::random_dataset(30, 0, 21, 0.3, true);
  TestResult base = logrank_test(d);
  std::mt19937_64 engine(5);
  for (int rep = 0; rep < 5; ++rep) {
    std::shuffle(d.rows.begin(), d.rows.end(), engine);
    TestResult shuffled = logrank_test(d);
    CHECK(shuffled.statistic == base.statistic);
    CHECK(shuffled.score == base.score);
    CHECK(shuffled.variance == base.variance);
  }
}

TEST_CASE("logrank rejects degenerate inputs") {
  CHECK_THROWS_AS(logrank_test(rows_only({{1, 1, 1}, {2, 1, 1}})), DataError);
  CHECK_THROWS_AS(logrank_test(rows_only({{1, 0, 1}, {2, 0, 0}})), DataError);
  // every event happens while only one arm is at risk -> zero variance
  Dataset degenerate = rows_only({{0.5, 0, 0}, {0.6, 0, 0}, {1, 1, 1}, {2, 1, 1}});
  CHECK_THROWS_AS(logrank_test(degenerate), NumericalError);
}

TEST_CASE("censoring dataset flips status and is an involution") {
  Dataset d = oracle::random_dataset(15, 2, 31, 0.4);
  Dataset flipped = censoring_dataset(d);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(flipped.rows[i].status == 1 - d.rows[i].status);
    CHECK(flipped.rows[i].time == d.rows[i].time);
    CHECK(flipped.rows[i].treatment == d.rows[i].treatment);
    CHECK(flipped.rows[i].covariates == d.rows[i].covariates);
  }
  Dataset twice = censoring_dataset(flipped);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(twice.rows[i].status == d.rows[i].status);
  }
}

TEST_CASE("fully-uncensored data yields an event-free censoring dataset") {
  Dataset d = oracle::random_dataset(20, 2, 41, 0.0);
  Dataset flipped = censoring_dataset(d);
  CHECK(flipped.n_events() == 0);
  CHECK_THROWS_WITH_AS(lambda_grid(flipped), "no events", DataError);
}

TEST_CASE("normal tail helpers agree with closed forms") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(two_sided_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(two_sided_p(0.0) == doctest::Approx(1.0).epsilon(1e-15));
}
