#include "censelect/survival.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "censelect/errors.hpp"
#include "cox_core.hpp"

namespace censelect {

std::size_t Dataset::covariate_index(const std::string& name) const {
  for (std::size_t i = 0; i < covariate_names.size(); ++i) {
    if (covariate_names[i] == name) return i;
  }
  throw DataError("unknown covariate: " + name);
}

void Dataset::validate() const {
  std::set<std::string> seen;
  for (const auto& name : covariate_names) {
    if (name.empty()) throw DataError("empty covariate name");
    if (!seen.insert(name).second) throw DataError("duplicate covariate name: " + name);
  }
  const std::size_t p = covariate_names.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const std::string at = " at row " + std::to_string(i + 1);
    if (!(row.time > 0.0) || !std::isfinite(row.time))
      throw DataError("time must be positive and finite" + at);
    if (row.status != 0 && row.status != 1) throw DataError("status must be 0 or 1" + at);
    if (row.treatment != 0 && row.treatment != 1)
      throw DataError("treatment must be 0 or 1" + at);
    if (row.covariates.size() != p) throw DataError("covariate count mismatch" + at);
    for (double x : row.covariates) {
      if (!std::isfinite(x)) throw DataError("non-finite covariate value" + at);
    }
  }
}

std::size_t Dataset::n_events() const {
  std::size_t count = 0;
  for (const auto& row : rows) count += row.status;
  return count;
}

double StepFunction::operator()(double t) const {
  auto it = std::upper_bound(knots.begin(), knots.end(), t);
  if (it == knots.begin()) return initial_value;
  return values[static_cast<std::size_t>(it - knots.begin()) - 1];
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double two_sided_p(double statistic) { return std::erfc(std::abs(statistic) / std::sqrt(2.0)); }

std::string to_string(TestMethod m) {
  switch (m) {
    case TestMethod::logrank: return "logrank";
    case TestMethod::wald_robust: return "wald_robust";
    case TestMethod::wald_model: return "wald_model";
    case TestMethod::score: return "score";
    case TestMethod::decorrelated: return "decorrelated";
  }
  throw ConfigError("unknown test method");
}

StepFunction kaplan_meier(const Dataset& data, std::optional<int> treatment_arm) {
  Dataset subset;
  const Dataset* view = &data;
  if (treatment_arm.has_value()) {
    subset.covariate_names = data.covariate_names;
    for (const auto& row : data.rows) {
      if (row.treatment == *treatment_arm) subset.rows.push_back(row);
    }
    view = &subset;
  }
  if (view->rows.empty()) throw DataError("empty group");

  detail::RiskOrder ro = detail::make_risk_order(*view);
  StepFunction s;
  s.initial_value = 1.0;
  double surv = 1.0;
  for (std::size_t b = 0; b < ro.block_first.size(); ++b) {
    const int d = ro.block_deaths[b];
    if (d == 0) continue;
    const int at_risk = ro.n - ro.block_first[b];
    surv *= 1.0 - static_cast<double>(d) / at_risk;
    s.knots.push_back(ro.times[ro.block_first[b]]);
    s.values.push_back(surv);
  }
  return s;
}

TestResult logrank_test(const Dataset& data, VarianceFlavor flavor) {
  int n_treated = 0;
  for (const auto& row : data.rows) n_treated += row.treatment;
  if (n_treated == 0 || n_treated == static_cast<int>(data.size()))
    throw DataError("logrank requires both treatment arms");
  if (data.n_events() == 0) throw DataError("no events");

  detail::CoxProblem problem = detail::make_problem(data, {}, true);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  detail::CoxEval eval = detail::evaluate(problem, zero, true);

  double variance = 0.0;
  if (flavor == VarianceFlavor::model) {
    variance = eval.info(0, 0);
  } else {
    detail::ResidualStats rs = detail::residual_stats(problem, zero);
    // summed in sorted order so the result is invariant to row permutation
    std::vector<double> squares(rs.score_residuals.rows());
    for (Eigen::Index i = 0; i < rs.score_residuals.rows(); ++i)
      squares[static_cast<std::size_t>(i)] = rs.score_residuals(i, 0) * rs.score_residuals(i, 0);
    std::sort(squares.begin(), squares.end());
    for (double s : squares) variance += s;
  }
  if (!(variance > 0.0)) throw NumericalError("logrank variance is zero");

  TestResult result;
  result.method = TestMethod::logrank;
  result.score = eval.grad[0];
  result.variance = variance;
  result.statistic = result.score / std::sqrt(variance);
  result.p_value = two_sided_p(result.statistic);
  return result;
}

Dataset censoring_dataset(const Dataset& data) {
  Dataset flipped = data;
  for (auto& row : flipped.rows) row.status = 1 - row.status;
  return flipped;
}

}  // namespace censelect
