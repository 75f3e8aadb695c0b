#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "censelect/survival.hpp"
#include "censelect/types.hpp"

namespace censelect {

struct CoxOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-9;
  double loglik_rel_tolerance = 1e-12;
  double step_tolerance = 1e-6;  // relative Newton-move size required to stop
  int max_step_halvings = 30;
  double divergence_bound = 50.0;  // |coef| beyond this with rising loglik => separation
};

/// A fitted proportional-hazards model. Coefficient order: treatment first
/// (when included), then `adjustment_set` in the stored order.
struct CoxFit {
  std::vector<std::string> adjustment_set;  // covariate names, treatment excluded
  bool includes_treatment = true;
  Eigen::VectorXd coefficients;
  double loglik = 0.0;
  Eigen::MatrixXd model_information;  // negative Hessian at the optimum
  Eigen::MatrixXd model_variance;     // its inverse
  Eigen::MatrixXd robust_variance;    // sandwich from per-subject score residuals
  StepFunction baseline_cumhaz;       // Breslow estimator at covariates = 0
  int iterations = 0;

  std::vector<std::string> term_names() const;
};

/// Maximizes the Breslow-ties log partial likelihood by damped Newton
/// iterations from a zero start. Throws NumericalError on separation
/// (diverging coefficient with rising likelihood), collinear design
/// (information matrix not positive definite), or non-convergence.
CoxFit fit_cox(const Dataset& data, const std::vector<std::string>& adjustment_set,
               bool include_treatment = true, const CoxOptions& options = {});

/// Log partial likelihood (Breslow ties) at an arbitrary coefficient vector,
/// same term order as fit_cox. Used by cross-validation and tests.
double cox_log_likelihood(const Dataset& data, const std::vector<std::string>& adjustment_set,
                          bool include_treatment, const Eigen::VectorXd& beta);

/// Lin-Wei sandwich A^-1 B A^-1 with B the sum of outer products of
/// per-subject score residuals. Recomputes from scratch; fit_cox stores the
/// same matrix in CoxFit::robust_variance.
Eigen::MatrixXd robust_variance(const CoxFit& fit, const Dataset& data);

/// Wald test of the treatment coefficient (first term of the fit).
TestResult wald_test(const CoxFit& fit, VarianceFlavor flavor = VarianceFlavor::robust);

/// S(t | treatment, x) = exp(-Lambda0(t) exp(eta)) on the requested times.
SurvivalCurve predict_survival(const CoxFit& fit, const std::vector<double>& covariates,
                               int treatment, const std::vector<double>& times);

/// Pointwise average of predict_survival over every row's covariates with
/// treatment forced to `arm` (regression-standardized curve).
SurvivalCurve standardized_curves(const CoxFit& fit, const Dataset& data, int arm,
                                  const std::vector<double>& times);

}  // namespace censelect
