#include "censelect/cox.hpp"

#include <cmath>
#include <sstream>

#include "censelect/errors.hpp"
#include "cox_core.hpp"

namespace censelect {

namespace {

std::string iterate_string(const Eigen::VectorXd& beta) {
  std::ostringstream out;
  out << "[";
  for (int j = 0; j < beta.size(); ++j) out << (j ? ", " : "") << beta[j];
  out << "]";
  return out.str();
}

StepFunction cumulative_baseline(const detail::ResidualStats& rs) {
  StepFunction h;
  h.initial_value = 0.0;
  h.knots = rs.death_times;
  h.values.reserve(rs.baseline_increments.size());
  double total = 0.0;
  for (double inc : rs.baseline_increments) {
    total += inc;
    h.values.push_back(total);
  }
  return h;
}

}  // namespace

std::vector<std::string> CoxFit::term_names() const {
  std::vector<std::string> names;
  if (includes_treatment) names.push_back("treatment");
  names.insert(names.end(), adjustment_set.begin(), adjustment_set.end());
  return names;
}

CoxFit fit_cox(const Dataset& data, const std::vector<std::string>& adjustment_set,
               bool include_treatment, const CoxOptions& options) {
  if (data.n_events() == 0) throw DataError("no events");
  detail::CoxProblem problem = detail::make_problem(data, adjustment_set, include_treatment);
  const int q = static_cast<int>(problem.X.cols());

  CoxFit fit;
  fit.adjustment_set = adjustment_set;
  fit.includes_treatment = include_treatment;
  fit.coefficients = Eigen::VectorXd::Zero(q);

  detail::CoxEval eval = detail::evaluate(problem, fit.coefficients, true);
  bool converged = q == 0;
  for (int iter = 1; !converged && iter <= options.max_iterations; ++iter) {
    Eigen::LLT<Eigen::MatrixXd> llt(eval.info);
    if (llt.info() != Eigen::Success)
      throw NumericalError("collinear design: information matrix is not positive definite");
    Eigen::VectorXd step = llt.solve(eval.grad);

    double scale = 1.0;
    Eigen::VectorXd candidate;
    detail::CoxEval next;
    bool accepted = false;
    for (int h = 0; h <= options.max_step_halvings; ++h, scale *= 0.5) {
      candidate = fit.coefficients + scale * step;
      next = detail::evaluate(problem, candidate, true);
      if (std::isfinite(next.loglik) && next.loglik >= eval.loglik) {
        accepted = true;
        break;
      }
    }
    if (!accepted)
      throw NumericalError("cox fit did not converge: step halving failed at iterate " +
                           iterate_string(fit.coefficients));

    const double previous = eval.loglik;
    const double move = (candidate - fit.coefficients).cwiseAbs().maxCoeff();
    fit.coefficients = candidate;
    eval = std::move(next);
    fit.iterations = iter;

    if (fit.coefficients.cwiseAbs().maxCoeff() > options.divergence_bound)
      throw NumericalError("separation: coefficient diverging at iterate " +
                           iterate_string(fit.coefficients));

    // A monotone likelihood flattens the gradient while the iterate is still
    // drifting, so a small gradient alone must not count as convergence; the
    // drift instead runs into the divergence bound above.
    const double rel_change =
        std::abs(eval.loglik - previous) / (std::abs(previous) + 1e-10);
    const bool settled =
        move <= options.step_tolerance * (1.0 + fit.coefficients.cwiseAbs().maxCoeff());
    if (settled && (eval.grad.cwiseAbs().maxCoeff() < options.gradient_tolerance ||
                    rel_change < options.loglik_rel_tolerance)) {
      converged = true;
    }
  }
  if (!converged)
    throw NumericalError("cox fit did not converge after " +
                         std::to_string(options.max_iterations) + " iterations, iterate " +
                         iterate_string(fit.coefficients));

  fit.loglik = eval.loglik;
  fit.model_information = eval.info;
  if (q > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(eval.info);
    if (llt.info() != Eigen::Success) throw NumericalError("singular information");
    fit.model_variance = llt.solve(Eigen::MatrixXd::Identity(q, q));
  } else {
    fit.model_variance.resize(0, 0);
  }

  detail::ResidualStats rs = detail::residual_stats(problem, fit.coefficients);
  if (q > 0) {
    Eigen::MatrixXd b = rs.score_residuals.transpose() * rs.score_residuals;
    fit.robust_variance = fit.model_variance * b * fit.model_variance;
  } else {
    fit.robust_variance.resize(0, 0);
  }
  fit.baseline_cumhaz = cumulative_baseline(rs);
  return fit;
}

double cox_log_likelihood(const Dataset& data, const std::vector<std::string>& adjustment_set,
                          bool include_treatment, const Eigen::VectorXd& beta) {
  detail::CoxProblem problem = detail::make_problem(data, adjustment_set, include_treatment);
  if (beta.size() != problem.X.cols()) throw ConfigError("coefficient length mismatch");
  return detail::log_partial_likelihood(problem.order, problem.X * beta);
}

Eigen::MatrixXd robust_variance(const CoxFit& fit, const Dataset& data) {
  const int q = static_cast<int>(fit.coefficients.size());
  if (q == 0) return Eigen::MatrixXd(0, 0);
  detail::CoxProblem problem =
      detail::make_problem(data, fit.adjustment_set, fit.includes_treatment);
  detail::CoxEval eval = detail::evaluate(problem, fit.coefficients, true);
  Eigen::LLT<Eigen::MatrixXd> llt(eval.info);
  if (llt.info() != Eigen::Success) throw NumericalError("singular information");
  detail::ResidualStats rs = detail::residual_stats(problem, fit.coefficients);
  Eigen::MatrixXd b = rs.score_residuals.transpose() * rs.score_residuals;
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(q, q));
  return inv * b * inv;
}

TestResult wald_test(const CoxFit& fit, VarianceFlavor flavor) {
  if (!fit.includes_treatment) throw ConfigError("wald test requires a treatment term");
  const Eigen::MatrixXd& v =
      flavor == VarianceFlavor::robust ? fit.robust_variance : fit.model_variance;
  if (v.rows() == 0 || !(v(0, 0) > 0.0)) throw NumericalError("treatment variance is zero");

  TestResult result;
  result.method =
      flavor == VarianceFlavor::robust ? TestMethod::wald_robust : TestMethod::wald_model;
  result.score = fit.coefficients[0];
  result.variance = v(0, 0);
  result.statistic = result.score / std::sqrt(result.variance);
  result.p_value = two_sided_p(result.statistic);
  result.adjustment_set = fit.adjustment_set;
  return result;
}

SurvivalCurve predict_survival(const CoxFit& fit, const std::vector<double>& covariates,
                               int treatment, const std::vector<double>& times) {
  if (covariates.size() != fit.adjustment_set.size())
    throw ConfigError("covariate vector length does not match the adjustment set");
  double eta = 0.0;
  int j = 0;
  if (fit.includes_treatment) eta += fit.coefficients[j++] * treatment;
  for (double x : covariates) eta += fit.coefficients[j++] * x;
  const double risk = std::exp(eta);

  SurvivalCurve curve;
  curve.times = times;
  curve.probabilities.reserve(times.size());
  for (double t : times) {
    if (t < 0.0) throw ConfigError("negative prediction time");
    curve.probabilities.push_back(std::exp(-fit.baseline_cumhaz(t) * risk));
  }
  return curve;
}

SurvivalCurve standardized_curves(const CoxFit& fit, const Dataset& data, int arm,
                                  const std::vector<double>& times) {
  std::vector<std::size_t> cols;
  cols.reserve(fit.adjustment_set.size());
  for (const auto& name : fit.adjustment_set) cols.push_back(data.covariate_index(name));

  SurvivalCurve curve;
  curve.times = times;
  curve.probabilities.assign(times.size(), 0.0);
  if (data.rows.empty()) throw DataError("empty dataset");
  for (double t : times) {
    if (t < 0.0) throw ConfigError("negative prediction time");
  }

  std::vector<double> cumhaz(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) cumhaz[k] = fit.baseline_cumhaz(times[k]);

  for (const auto& row : data.rows) {
    double eta = 0.0;
    int j = 0;
    if (fit.includes_treatment) eta += fit.coefficients[j++] * arm;
    for (std::size_t c : cols) eta += fit.coefficients[j++] * row.covariates[c];
    const double risk = std::exp(eta);
    for (std::size_t k = 0; k < times.size(); ++k) {
      curve.probabilities[k] += std::exp(-cumhaz[k] * risk);
    }
  }
  for (double& probability : curve.probabilities) probability /= data.rows.size();
  curve.label = "standardized arm " + std::to_string(arm);
  return curve;
}

}  // namespace censelect
