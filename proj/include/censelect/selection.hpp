#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "censelect/cox.hpp"
#include "censelect/lasso.hpp"
#include "censelect/types.hpp"

namespace censelect {

/// Everything produced by a selection-then-test strategy: the supports found
/// by the penalized step(s), the final adjustment set, and the refit + test.
struct SelectionReport {
  std::vector<std::string> survival_support;
  std::vector<std::string> censoring_support;  // empty for post_lasso
  std::vector<std::string> final_adjustment_set;
  LambdaRule lambda_rule = LambdaRule::one_se;
  double lambda_survival = 0.0;
  std::optional<double> lambda_censoring;
  TestResult test;
  CoxFit fit;
};

/// Cross-validated lasso on the survival outcome, refit of an unpenalized Cox
/// model on treatment + selected covariates + forced_in, robust Wald test.
SelectionReport post_lasso(const Dataset& data, LambdaRule rule, int folds, std::uint64_t seed,
                           const std::vector<std::string>& forced_in = {});

/// post_lasso plus a second lasso on the censoring-as-event dataset; the
/// refit adjusts for the union of both supports (and forced_in). The two
/// penalized steps share the fold seed but use independent penalty grids.
SelectionReport double_selection(const Dataset& data, LambdaRule rule, int folds,
                                 std::uint64_t seed,
                                 const std::vector<std::string>& forced_in = {});

/// One strategy's outcome inside a batch run; `error` holds the exception
/// when the strategy failed (shared-step failures mark every dependent
/// strategy).
struct BatchEntry {
  std::string strategy;
  std::optional<SelectionReport> report;
  std::exception_ptr error;
};

/// Runs several penalized strategies on one dataset while sharing the
/// survival cross-validation (and one censoring cross-validation across the
/// double-selection rules). Strategy names: post_lasso_min, post_lasso_1se,
/// double_min, double_1se. Results are identical to the one-shot functions
/// called with the same seed.
std::vector<BatchEntry> selection_batch(const Dataset& data,
                                        const std::vector<std::string>& strategies, int folds,
                                        std::uint64_t seed,
                                        const std::vector<std::string>& forced_in = {});

/// The single-covariate select-then-test procedure: adjust for the lone
/// covariate iff its Wald test in the adjusted model is significant at
/// alpha_select. When adjusting, the reported test is the treatment Wald test
/// of that model; otherwise it is the plain logrank test. Both use
/// model-based variances. adjustment_set records the branch taken. Requires
/// exactly one covariate.
TestResult significance_selection_single(const Dataset& data, double alpha_select = 0.025);

/// Decorrelated score test of zero treatment effect: lasso Cox for the
/// nuisance coefficients, integrated at-risk residuals for treatment and
/// covariates, a cross-validated linear lasso projection of the former on the
/// latter, and a studentized orthogonalized score.
TestResult decorrelated_score_test(const Dataset& data, LambdaRule rule, int folds,
                                   std::uint64_t seed);

}  // namespace censelect
