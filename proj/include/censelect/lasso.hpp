#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "censelect/types.hpp"

namespace censelect {

enum class LambdaRule { min, one_se };

std::string to_string(LambdaRule rule);
LambdaRule lambda_rule_from_string(const std::string& name);

struct LassoOptions {
  double tolerance = 1e-7;         // max standardized coefficient change
  int max_outer_iterations = 500;  // quadratic reapproximations per lambda
  int max_sweeps = 10000;          // coordinate sweeps within one approximation
};

/// Solutions of the L1-penalized Cox objective along a decreasing penalty
/// grid. Term order: treatment first, then every dataset covariate.
/// Coefficients are on the original covariate scale.
struct PenaltyPath {
  std::vector<std::string> terms;
  std::vector<double> lambdas;
  Eigen::MatrixXd coefficients;  // terms x lambdas
  Eigen::VectorXd center;        // per-term standardization used internally
  Eigen::VectorXd scale;
};

struct CvResult {
  std::vector<double> lambdas;
  std::vector<double> mean_loss;  // cross-validated deviance per lambda
  std::vector<double> se_loss;
  int index_min = -1;
  int index_1se = -1;
  double lambda_min = 0.0;
  double lambda_1se = 0.0;
};

/// Log-spaced grid of n_lambda penalties from lambda_max (smallest penalty
/// with an all-zero solution) down to ratio * lambda_max.
std::vector<double> lambda_grid(const Dataset& data, int n_lambda = 100, double ratio = 0.01);

/// Minimizes -(1/n) log PL + lambda * ||theta||_1 over standardized columns
/// (all coefficients penalized, treatment included) by cyclic coordinate
/// descent within iteratively reweighted quadratic approximations. Returns
/// coefficients on the original scale, treatment first.
Eigen::VectorXd fit_lasso_cox(const Dataset& data, double lambda,
                              const Eigen::VectorXd* warm_start = nullptr,
                              const LassoOptions& options = {});

/// Warm-started fits over a decreasing penalty grid.
PenaltyPath lasso_path(const Dataset& data, const std::vector<double>& lambdas,
                       const LassoOptions& options = {});

/// K-fold cross-validation with the Verweij-van Houwelingen partial-likelihood
/// deviance: loss_k = -2 [logPL_full(theta_-k) - logPL_-k(theta_-k)]. Folds
/// are stratified by event status and shuffled deterministically from `seed`.
CvResult cross_validate(const Dataset& data, int folds, const std::vector<double>& grid,
                        std::uint64_t seed, const LassoOptions& options = {});

/// Names of covariates with exactly nonzero coefficients; the leading
/// treatment coefficient is ignored.
std::vector<std::string> selected_support(const Eigen::VectorXd& coefficients,
                                          const std::vector<std::string>& covariate_names);

/// Cross-validated squared-error lasso (no intercept after internal
/// centering), used for the projection step of the decorrelated score test.
/// Returns coefficients on the original column scale at lambda_min.
Eigen::VectorXd linear_lasso_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int folds,
                                std::uint64_t seed, int n_lambda = 100, double ratio = 0.01);

}  // namespace censelect
