#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"

#include "censelect/cox.hpp"
#include "censelect/errors.hpp"
#include "censelect/rng.hpp"
#include "censelect/simulation.hpp"
#include "censelect/survival.hpp"
#include "cox_core.hpp"
#include "oracle_helpers.hpp"

using namespace censelect;

namespace {

// Fixed 8-row, one-covariate dataset used by the grid-search oracle.
Dataset eight_rows() {
  Dataset d;
  d.covariate_names = {"X1"};
  const double times[8] = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0};
  const int status[8] = {1, 1, 0, 1, 1, 0, 1, 1};
  const int arm[8] = {0, 1, 0, 1, 0, 1, 0, 1};
  const double x[8] = {0.5, -0.2, 1.3, 0.7, -1.1, 0.4, 0.9, -0.6};
  for (int i = 0; i < 8; ++i) {
    SurvivalRow row;
    row.time = times[i];
    row.status = status[i];
    row.treatment = arm[i];
    row.covariates = {x[i]};
    d.rows.push_back(row);
  }
  return d;
}

}  // namespace

TEST_CASE("null cox model reproduces the nelson-aalen baseline exactly") {
  Dataset d = oracle::random_dataset(25, 0, 13, 0.3, true);
  CoxFit fit = fit_cox(d, {}, false);
  CHECK(fit.coefficients.size() == 0);
  CHECK(fit.iterations == 0);
  for (std::size_t k = 0; k < fit.baseline_cumhaz.knots.size(); ++k) {
    const double t = fit.baseline_cumhaz.knots[k];
    CHECK(fit.baseline_cumhaz.values[k] ==
          doctest::Approx(oracle::nelson_aalen_at(d, t)).epsilon(1e-12));
  }
}

TEST_CASE("log partial likelihood matches the brute-force definition") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Dataset d = oracle::random_dataset(30, 2, seed, 0.3, true);
    Eigen::MatrixXd design = oracle::full_design(d);
    std::mt19937_64 engine(seed * 17 + 1);
    std::normal_distribution<double> normal(0.0, 0.7);
    Eigen::VectorXd beta(design.cols());
    for (int j = 0; j < beta.size(); ++j) beta[j] = normal(engine);
    const double lib = cox_log_likelihood(d, d.covariate_names, true, beta);
    const double brute = oracle::brute_log_partial_likelihood(d, design, beta);
    CHECK(lib == doctest::Approx(brute).epsilon(1e-10));
  }
}

TEST_CASE("gradient and hessian agree with finite differences") {
  Dataset d = oracle::random_dataset(40, 2, 8, 0.3, true);
  detail::CoxProblem problem = detail::make_problem(d, d.covariate_names, true);
  auto loglik_at = [&](Eigen::VectorXd b) {
    return detail::log_partial_likelihood(problem.order, problem.X * b);
  };
  std::mt19937_64 engine(99);
  std::normal_distribution<double> normal(0.0, 0.5);
  for (int rep = 0; rep < 3; ++rep) {
    Eigen::VectorXd beta(3);
    for (int j = 0; j < 3; ++j) beta[j] = normal(engine);
    detail::CoxEval eval = detail::evaluate(problem, beta, true);
    Eigen::VectorXd fd_grad = oracle::finite_difference_gradient(loglik_at, beta);
    Eigen::MatrixXd fd_hess = oracle::finite_difference_hessian(loglik_at, beta);
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(eval.grad[j] - fd_grad[j]) <= 1e-5 * std::max(1.0, std::abs(fd_grad[j])));
      for (int k = 0; k < 3; ++k) {
        CHECK(std::abs(-eval.info(j, k) - fd_hess(j, k)) <=
              1e-5 * std::max(1.0, std::abs(fd_hess(j, k))));
      }
    }
  }
}

TEST_CASE("newton solution matches an exhaustive grid search") {
  // single coefficient: covariate only, so the grid is one-dimensional
  Dataset d = eight_rows();
  CoxFit fit = fit_cox(d, {"X1"}, false);
  REQUIRE(fit.coefficients.size() == 1);

  Eigen::MatrixXd design = oracle::full_design(d, false);
  double best = -std::numeric_limits<double>::infinity();
  double best_b = 0.0;
  for (int step = -50000; step <= 50000; ++step) {
    Eigen::VectorXd b(1);
    b[0] = step * 1e-4;
    const double ll = oracle::brute_log_partial_likelihood(d, design, b);
    if (ll > best) {
      best = ll;
      best_b = b[0];
    }
  }
  CHECK(std::abs(fit.coefficients[0] - best_b) <= 2e-4);
  CHECK(fit.loglik >= best - 1e-8);
}

TEST_CASE("gradient vanishes at the optimum and information is positive definite") {
  Dataset d = oracle::random_dataset(60, 2, 15, 0.3, true);
  CoxFit fit = fit_cox(d, d.covariate_names, true);
  detail::CoxProblem problem = detail::make_problem(d, d.covariate_names, true);
  detail::CoxEval eval = detail::evaluate(problem, fit.coefficients, true);
  CHECK(eval.grad.cwiseAbs().maxCoeff() < 1e-6);
  Eigen::LLT<Eigen::MatrixXd> llt(eval.info);
  CHECK(llt.info() == Eigen::Success);
  CHECK((fit.model_variance * fit.model_information - Eigen::MatrixXd::Identity(3, 3))
            .cwiseAbs()
            .maxCoeff() < 1e-8);
}

TEST_CASE("coefficients are equivariant under affine covariate maps") {
  Dataset d = oracle::random_dataset(50, 2, 23, 0.3);
  CoxFit base = fit_cox(d, d.covariate_names, true);
  Dataset scaled = d;
  const double a1 = 2.5, c1 = -1.0, a2 = -0.5, c2 = 3.0;
  for (auto& row : scaled.rows) {
    row.covariates[0] = a1 * row.covariates[0] + c1;
    row.covariates[1] = a2 * row.covariates[1] + c2;
  }
  CoxFit rescaled = fit_cox(scaled, scaled.covariate_names, true);
  CHECK(std::abs(rescaled.coefficients[0] - base.coefficients[0]) < 1e-8);
  CHECK(std::abs(rescaled.coefficients[1] - base.coefficients[1] / a1) < 1e-8);
  CHECK(std::abs(rescaled.coefficients[2] - base.coefficients[2] / a2) < 1e-8);
}

TEST_CASE("duplicating every row halves both variance estimates") {
  Dataset d = oracle::random_dataset(40, 1, 29, 0.3);
  CoxFit base = fit_cox(d, d.covariate_names, true);
  Dataset doubled = d;
  for (const auto& row : d.rows) doubled.rows.push_back(row);
  CoxFit twice = fit_cox(doubled, doubled.covariate_names, true);
  CHECK((twice.coefficients - base.coefficients).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((twice.model_variance - 0.5 * base.model_variance).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((twice.robust_variance - 0.5 * base.robust_variance).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("wald test gives p = 1 for mirror-image arms") {
  Dataset d;
  for (int arm = 0; arm < 2; ++arm) {
    for (double t : {1.0, 2.0, 3.0, 4.0}) {
      SurvivalRow row;
      row.time = t;
      row.status = t == 2.0 ? 0 : 1;
      row.treatment = arm;
      d.rows.push_back(row);
    }
  }
  CoxFit fit = fit_cox(d, {}, true);
  CHECK(std::abs(fit.coefficients[0]) < 1e-9);
  TestResult r = wald_test(fit);
  CHECK(r.p_value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.method == TestMethod::wald_robust);
  TestResult model = wald_test(fit, VarianceFlavor::model);
  CHECK(model.variance == doctest::Approx(fit.model_variance(0, 0)).epsilon(1e-12));
  CHECK(r.variance == doctest::Approx(fit.robust_variance(0, 0)).epsilon(1e-12));
}

TEST_CASE("robust variance recomputation matches the stored sandwich") {
  Dataset d = oracle::random_dataset(45, 2, 37, 0.3, true);
  CoxFit fit = fit_cox(d, d.covariate_names, true);
  Eigen::MatrixXd recomputed = robust_variance(fit, d);
  CHECK((recomputed - fit.robust_variance).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("predictions start at one and respect linear-predictor shifts") {
  Dataset d = oracle::random_dataset(50, 1, 43, 0.3);
  CoxFit fit = fit_cox(d, {"X1"}, true);
  std::vector<double> times = {0.0, 0.5, 1.0, 2.0};
  SurvivalCurve at_zero = predict_survival(fit, {0.3}, 1, times);
  CHECK(at_zero.probabilities[0] == 1.0);
  for (std::size_t k = 1; k < times.size(); ++k) {
    CHECK(at_zero.probabilities[k] <= at_zero.probabilities[k - 1]);
    CHECK(at_zero.probabilities[k] >= 0.0);
  }
  // same eta two ways: covariate effect vs baseline-only with matching shift
  const double eta = fit.coefficients[0] * 1.0 + fit.coefficients[1] * 0.3;
  SurvivalCurve direct = predict_survival(fit, {0.3}, 1, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double manual = std::exp(-fit.baseline_cumhaz(times[k]) * std::exp(eta));
    CHECK(direct.probabilities[k] == doctest::Approx(manual).epsilon(1e-12));
  }
}

TEST_CASE("covariate shifts move the baseline but not the predictions") {
  Dataset d = oracle::random_dataset(50, 1, 47, 0.3);
  CoxFit fit = fit_cox(d, {"X1"}, true);
  Dataset shifted = d;
  for (auto& row : shifted.rows) row.covariates[0] += 2.0;
  CoxFit fit2 = fit_cox(shifted, {"X1"}, true);
  std::vector<double> times = {0.5, 1.0, 1.5};
  SurvivalCurve a = predict_survival(fit, {0.7}, 1, times);
  SurvivalCurve b = predict_survival(fit2, {0.7 + 2.0}, 1, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    CHECK(std::abs(a.probabilities[k] - b.probabilities[k]) < 1e-8);
  }
}

TEST_CASE("standardized curve with no covariates equals the plain prediction") {
  Dataset d = oracle::random_dataset(40, 0, 53, 0.3);
  CoxFit fit = fit_cox(d, {}, true);
  std::vector<double> times = {0.0, 0.3, 0.9, 2.0};
  SurvivalCurve standardized = standardized_curves(fit, d, 1, times);
  SurvivalCurve predicted = predict_survival(fit, {}, 1, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    CHECK(standardized.probabilities[k] == doctest::Approx(predicted.probabilities[k]).epsilon(1e-14));
  }
  CHECK(standardized.probabilities[0] == 1.0);
}

TEST_CASE("standardized curve averages per-row predictions") {
  Dataset d = oracle::random_dataset(30, 2, 59, 0.3);
  CoxFit fit = fit_cox(d, d.covariate_names, true);
  std::vector<double> times = {0.4, 1.1};
  SurvivalCurve standardized = standardized_curves(fit, d, 0, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    double mean = 0.0;
    for (const auto& row : d.rows) {
      mean += predict_survival(fit, row.covariates, 0, times).probabilities[k];
    }
    mean /= d.size();
    CHECK(standardized.probabilities[k] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(standardized.probabilities[k] >= 0.0);
    CHECK(standardized.probabilities[k] <= 1.0);
  }
}

TEST_CASE("fit is invariant to row order up to summation noise") {
  Dataset d = oracle::random_dataset(35, 2, 61, 0.3, true);
  CoxFit base = fit_cox(d, d.covariate_names, true);
  std::mt19937_64 engine(4);
  Dataset shuffled = d;
  std::shuffle(shuffled.rows.begin(), shuffled.rows.end(), engine);
  CoxFit other = fit_cox(shuffled, shuffled.covariate_names, true);
  CHECK((other.coefficients - base.coefficients).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(std::abs(other.loglik - base.loglik) < 1e-10);
}

TEST_CASE("separation raises a numerical error") {
  // event order perfectly aligned with the covariate: likelihood increases
  // without bound along b -> -inf
  Dataset d;
  d.covariate_names = {"X1"};
  for (int i = 0; i < 8; ++i) {
    SurvivalRow row;
    row.time = i + 1.0;
    row.status = 1;
    row.treatment = i % 2;
    row.covariates = {static_cast<double>(i)};
    d.rows.push_back(row);
  }
  CHECK_THROWS_AS(fit_cox(d, {"X1"}, false), NumericalError);
}

TEST_CASE("collinear designs raise a numerical error") {
  Dataset d = oracle::random_dataset(30, 1, 67, 0.3);
  d.covariate_names.push_back("X2");
  for (auto& row : d.rows) row.covariates.push_back(2.0 * row.covariates[0]);
  CHECK_THROWS_AS(fit_cox(d, d.covariate_names, true), NumericalError);
}

TEST_CASE("event-free data raises a data error") {
  Dataset d = oracle::random_dataset(10, 1, 71, 0.3);
  for (auto& row : d.rows) row.status = 0;
  CHECK_THROWS_AS(fit_cox(d, {"X1"}, true), DataError);
}

TEST_SUITE("slow") {

TEST_CASE("cox estimates approach truth on a large simulated sample") {
  DgpConfig dgp;
  dgp.setting = Setting::single_covariate;
  dgp.n = 10000;
  dgp.p = 1;
  dgp.beta_single = 0.7;
  dgp.gamma1 = 0.0;
  dgp.gamma2_single = 0.5;
  dgp.seed = 2026;
  Dataset d = simulate(dgp);
  CoxFit fit = fit_cox(d, {"X1"}, true);
  const double se_arm = std::sqrt(fit.robust_variance(0, 0));
  const double se_x = std::sqrt(fit.robust_variance(1, 1));
  CHECK(std::abs(fit.coefficients[0] - 0.0) < 3.0 * se_arm);
  CHECK(std::abs(fit.coefficients[1] - 0.7) < 3.0 * se_x);
}

TEST_CASE("robust standard errors track the empirical spread of estimates") {
  const int reps = 200;
  std::vector<double> estimates;
  double mean_robust_var = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    DgpConfig dgp;
    dgp.setting = Setting::single_covariate;
    dgp.n = 2000;
    dgp.p = 1;
    dgp.beta_single = 0.5;
    dgp.gamma1 = 0.0;
    dgp.gamma2_single = 0.3;
    dgp.seed = derive_seed(314159, 0, rep);
    Dataset d = simulate(dgp);
    CoxFit fit = fit_cox(d, {"X1"}, true);
    estimates.push_back(fit.coefficients[0]);
    mean_robust_var += fit.robust_variance(0, 0) / reps;

    // model-based and robust variances agree under a correctly specified model
    CHECK(fit.model_variance(0, 0) / fit.robust_variance(0, 0) > 0.75);
    CHECK(fit.model_variance(0, 0) / fit.robust_variance(0, 0) < 1.25);
  }
  double mean = 0.0;
  for (double e : estimates) mean += e / reps;
  double empirical_var = 0.0;
  for (double e : estimates) empirical_var += (e - mean) * (e - mean) / (reps - 1);
  const double ratio = mean_robust_var / empirical_var;
  CHECK(ratio > 0.8);
  CHECK(ratio < 1.2);
}

TEST_CASE("standardized curves are consistent where kaplan-meier is confounded") {
  // strong covariate effect on both event and censoring times makes the
  // naive product-limit curve biased; regression standardization is not
  DgpConfig dgp;
  dgp.setting = Setting::single_covariate;
  dgp.n = 20000;
  dgp.p = 1;
  dgp.beta_single = 1.0;
  dgp.gamma1 = 0.0;
  dgp.gamma2_single = 2.0;
  dgp.beta0 = 0.0;
  dgp.gamma0 = 0.0;
  dgp.seed = 77;
  Dataset d = simulate(dgp);

  std::vector<double> times = {0.25, 0.5, 0.75, 1.0, 1.5};
  std::vector<double> truth(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    truth[k] = oracle::normal_expectation(
        [&](double z) { return std::exp(-t * std::exp(1.0 * z)); });
  }

  CoxFit fit = fit_cox(d, {"X1"}, true);
  SurvivalCurve adjusted = standardized_curves(fit, d, 1, times);
  StepFunction km = kaplan_meier(d, 1);

  double worst_adjusted = 0.0, worst_km = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    worst_adjusted = std::max(worst_adjusted, std::abs(adjusted.probabilities[k] - truth[k]));
    worst_km = std::max(worst_km, std::abs(km(times[k]) - truth[k]));
  }
  CHECK(worst_adjusted < 0.02);
  CHECK(worst_km > 0.03);
}

}  // TEST_SUITE("slow")
