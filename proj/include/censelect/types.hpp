#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "censelect/errors.hpp"

namespace censelect {

/// One right-censored observation: observed time, event indicator,
/// randomized arm and baseline covariate values.
struct SurvivalRow {
  double time = 0.0;
  int status = 0;     // 1 = event observed, 0 = censored
  int treatment = 0;  // 1 = treated arm, 0 = control arm
  std::vector<double> covariates;
};

/// A right-censored sample with named covariate columns.
struct Dataset {
  std::vector<SurvivalRow> rows;
  std::vector<std::string> covariate_names;

  std::size_t size() const { return rows.size(); }
  std::size_t n_covariates() const { return covariate_names.size(); }

  /// Index of a covariate by name; throws DataError when absent.
  std::size_t covariate_index(const std::string& name) const;

  /// Checks all structural invariants (positive finite times, binary
  /// status/treatment, consistent covariate lengths). Throws DataError.
  void validate() const;

  std::size_t n_events() const;
  std::size_t n_censored() const { return size() - n_events(); }
};

/// Right-continuous step function: `initial_value` on [0, knots[0]),
/// `values[k]` on [knots[k], knots[k+1]).
struct StepFunction {
  std::vector<double> knots;   // strictly increasing
  std::vector<double> values;  // one per knot
  double initial_value = 0.0;

  double operator()(double t) const;
};

enum class TestMethod { logrank, wald_robust, wald_model, score, decorrelated };

std::string to_string(TestMethod m);

/// Outcome of a two-sided treatment-effect test. Always satisfies
/// statistic = score / sqrt(variance) and p_value = 2 (1 - Phi(|statistic|)).
struct TestResult {
  double statistic = 0.0;
  double score = 0.0;     // unstandardized numerator (score U, coefficient, ...)
  double variance = 0.0;  // its variance estimate
  double p_value = 1.0;
  std::vector<std::string> adjustment_set;
  TestMethod method = TestMethod::logrank;
};

/// Survival probabilities evaluated on a time grid.
struct SurvivalCurve {
  std::vector<double> times;
  std::vector<double> probabilities;
  std::string label;
};

/// Standard normal CDF.
double normal_cdf(double x);

/// Two-sided normal p-value for a standardized statistic.
double two_sided_p(double statistic);

}  // namespace censelect
