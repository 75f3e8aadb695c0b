#include "censelect/selection.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "censelect/errors.hpp"
#include "censelect/rng.hpp"
#include "censelect/survival.hpp"
#include "cox_core.hpp"

namespace censelect {

namespace {

// Full-data lasso solutions at both cross-validated penalty choices.
struct CvFit {
  CvResult cv;
  Eigen::VectorXd coef_min;
  Eigen::VectorXd coef_1se;
};

CvFit cv_lasso(const Dataset& data, int folds, std::uint64_t seed) {
  const std::vector<double> grid = lambda_grid(data);
  CvFit out;
  out.cv = cross_validate(data, folds, grid, seed);
  std::vector<double> head(grid.begin(), grid.begin() + out.cv.index_min + 1);
  PenaltyPath path = lasso_path(data, head);
  out.coef_min = path.coefficients.col(out.cv.index_min);
  out.coef_1se = path.coefficients.col(out.cv.index_1se);
  return out;
}

const Eigen::VectorXd& pick(const CvFit& fit, LambdaRule rule) {
  return rule == LambdaRule::min ? fit.coef_min : fit.coef_1se;
}

double pick_lambda(const CvFit& fit, LambdaRule rule) {
  return rule == LambdaRule::min ? fit.cv.lambda_min : fit.cv.lambda_1se;
}

// Union of supports in dataset column order; validates every name.
std::vector<std::string> ordered_union(const Dataset& data,
                                       const std::vector<const std::vector<std::string>*>& parts) {
  std::set<std::string> pool;
  for (const auto* part : parts) {
    for (const auto& name : *part) {
      data.covariate_index(name);
      pool.insert(name);
    }
  }
  std::vector<std::string> result;
  for (const auto& name : data.covariate_names) {
    if (pool.count(name)) result.push_back(name);
  }
  return result;
}

struct StrategySpec {
  bool is_double = false;
  LambdaRule rule = LambdaRule::one_se;
};

StrategySpec parse_strategy(const std::string& name) {
  if (name == "post_lasso_min") return {false, LambdaRule::min};
  if (name == "post_lasso_1se") return {false, LambdaRule::one_se};
  if (name == "double_min") return {true, LambdaRule::min};
  if (name == "double_1se") return {true, LambdaRule::one_se};
  throw ConfigError("unknown selection strategy: " + name);
}

// delta_i (x_i - weighted risk-set mean at t_i); zero rows for censored
// subjects. Rows in original order.
Eigen::MatrixXd schoenfeld_residuals(const detail::CoxProblem& problem,
                                     const Eigen::VectorXd& beta) {
  const detail::RiskOrder& ro = problem.order;
  const int n = ro.n;
  const int q = static_cast<int>(problem.X.cols());
  const int nb = static_cast<int>(ro.block_first.size());
  Eigen::MatrixXd residuals = Eigen::MatrixXd::Zero(n, q);
  if (n == 0) return residuals;

  Eigen::VectorXd eta = problem.X * beta;
  const double shift = eta.maxCoeff();

  Eigen::MatrixXd zbar(q, nb);
  double run_s0 = 0.0;
  Eigen::VectorXd run_s1 = Eigen::VectorXd::Zero(q);
  for (int b = nb - 1; b >= 0; --b) {
    const int end = b + 1 < nb ? ro.block_first[b + 1] : n;
    for (int i = ro.block_first[b]; i < end; ++i) {
      const double exi = std::exp(eta[i] - shift);
      run_s0 += exi;
      run_s1.noalias() += exi * problem.X.row(i).transpose();
    }
    if (ro.block_deaths[b] > 0) zbar.col(b) = run_s1 / run_s0;
  }
  for (int i = 0; i < n; ++i) {
    if (ro.status[i]) {
      residuals.row(ro.order[i]) = problem.X.row(i) - zbar.col(ro.block_of[i]).transpose();
    }
  }
  return residuals;
}

}  // namespace

std::vector<BatchEntry> selection_batch(const Dataset& data,
                                        const std::vector<std::string>& strategies, int folds,
                                        std::uint64_t seed,
                                        const std::vector<std::string>& forced_in) {
  std::vector<StrategySpec> specs;
  specs.reserve(strategies.size());
  bool any_double = false;
  for (const auto& name : strategies) {
    specs.push_back(parse_strategy(name));
    any_double = any_double || specs.back().is_double;
  }

  CvFit survival_step;
  std::exception_ptr shared_error;
  try {
    survival_step = cv_lasso(data, folds, seed);
  } catch (...) {
    shared_error = std::current_exception();
  }

  CvFit censoring_step;
  bool have_censoring = false;
  std::exception_ptr censoring_error;
  if (any_double && !shared_error && data.n_censored() > 0) {
    try {
      censoring_step = cv_lasso(censoring_dataset(data), folds, seed);
      have_censoring = true;
    } catch (...) {
      censoring_error = std::current_exception();
    }
  }

  std::vector<BatchEntry> batch(strategies.size());
  for (std::size_t s = 0; s < strategies.size(); ++s) {
    BatchEntry& entry = batch[s];
    entry.strategy = strategies[s];
    const StrategySpec& spec = specs[s];
    if (shared_error) {
      entry.error = shared_error;
      continue;
    }
    if (spec.is_double && censoring_error) {
      entry.error = censoring_error;
      continue;
    }
    try {
      SelectionReport report;
      report.lambda_rule = spec.rule;
      report.lambda_survival = pick_lambda(survival_step, spec.rule);
      report.survival_support =
          selected_support(pick(survival_step, spec.rule), data.covariate_names);
      if (spec.is_double && have_censoring) {
        report.lambda_censoring = pick_lambda(censoring_step, spec.rule);
        report.censoring_support =
            selected_support(pick(censoring_step, spec.rule), data.covariate_names);
      }
      report.final_adjustment_set = ordered_union(
          data, {&report.survival_support, &report.censoring_support, &forced_in});
      try {
        report.fit = fit_cox(data, report.final_adjustment_set, true);
      } catch (const NumericalError& e) {
        throw NumericalError(entry.strategy + " refit: " + e.what());
      }
      report.test = wald_test(report.fit, VarianceFlavor::robust);
      entry.report = std::move(report);
    } catch (...) {
      entry.error = std::current_exception();
    }
  }
  return batch;
}

SelectionReport post_lasso(const Dataset& data, LambdaRule rule, int folds, std::uint64_t seed,
                           const std::vector<std::string>& forced_in) {
  const std::string name = rule == LambdaRule::min ? "post_lasso_min" : "post_lasso_1se";
  auto batch = selection_batch(data, {name}, folds, seed, forced_in);
  if (batch[0].error) std::rethrow_exception(batch[0].error);
  return std::move(*batch[0].report);
}

SelectionReport double_selection(const Dataset& data, LambdaRule rule, int folds,
                                 std::uint64_t seed, const std::vector<std::string>& forced_in) {
  const std::string name = rule == LambdaRule::min ? "double_min" : "double_1se";
  auto batch = selection_batch(data, {name}, folds, seed, forced_in);
  if (batch[0].error) std::rethrow_exception(batch[0].error);
  return std::move(*batch[0].report);
}

TestResult significance_selection_single(const Dataset& data, double alpha_select) {
  if (data.n_covariates() != 1)
    throw ConfigError("single-covariate procedure requires exactly one covariate");
  if (!(alpha_select > 0.0 && alpha_select < 1.0))
    throw ConfigError("alpha_select must lie in (0,1)");

  // decision: Wald p-value of the covariate read off the fitted adjusted model
  CoxFit unrestricted = fit_cox(data, data.covariate_names, true);
  const double v_beta = unrestricted.model_variance(1, 1);
  if (!(v_beta > 0.0)) throw NumericalError("covariate variance is zero");
  const double z_beta = unrestricted.coefficients[1] / std::sqrt(v_beta);
  const bool adjust = two_sided_p(z_beta) < alpha_select;

  // adjusted analysis reports the coefficient Wald test; the unadjusted
  // analysis is the plain logrank (the score test of the restricted model)
  if (adjust) return wald_test(unrestricted, VarianceFlavor::model);
  return logrank_test(data, VarianceFlavor::model);
}

TestResult decorrelated_score_test(const Dataset& data, LambdaRule rule, int folds,
                                   std::uint64_t seed) {
  if (data.n_events() == 0) throw DataError("no events");
  const int p = static_cast<int>(data.n_covariates());
  if (p == 0) throw DataError("decorrelated score test requires covariates");
  const int n = static_cast<int>(data.size());

  CvFit step = cv_lasso(data, folds, seed);
  Eigen::VectorXd beta_null = pick(step, rule);
  beta_null[0] = 0.0;  // score is evaluated at zero treatment effect

  detail::CoxProblem problem = detail::make_problem(data, data.covariate_names, true);
  Eigen::MatrixXd residuals = schoenfeld_residuals(problem, beta_null);
  Eigen::VectorXd resid_a = residuals.col(0);
  Eigen::MatrixXd resid_x = residuals.rightCols(p);

  Eigen::VectorXd w_hat = linear_lasso_cv(resid_x, resid_a, folds, substream(seed, 1));

  Eigen::VectorXd contributions = -(resid_a - resid_x * w_hat);
  const double u_hat = contributions.mean();
  const double sigma2 = (contributions.array() - u_hat).square().sum() / n;
  if (!(sigma2 > 0.0)) throw NumericalError("decorrelated score variance is zero");

  TestResult result;
  result.method = TestMethod::decorrelated;
  result.score = u_hat;
  result.variance = sigma2 / n;
  result.statistic = u_hat / std::sqrt(result.variance);
  result.p_value = two_sided_p(result.statistic);
  result.adjustment_set = selected_support(pick(step, rule), data.covariate_names);
  return result;
}

}  // namespace censelect
