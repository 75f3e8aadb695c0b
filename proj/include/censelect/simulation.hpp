#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "censelect/lasso.hpp"
#include "censelect/types.hpp"

namespace censelect {

enum class Setting { S1, S2, S3, single_covariate };

std::string to_string(Setting s);
Setting setting_from_string(const std::string& name);

/// Randomized-trial generator: X ~ N(0, I_p), A ~ Bernoulli(1/2),
/// T ~ Exp(rate exp(beta0 + b nu_T'X)), C ~ Exp(rate exp(gamma0 + gamma1 A + g nu_C'X)).
/// Single-covariate mode replaces b nu_T'X by beta_single X and
/// g nu_C'X by gamma2_single X, with p forced to 1 and baseline log-rates
/// defaulting to beta0 = 1, gamma0 = -1 instead of 0.
struct DgpConfig {
  int n = 400;
  int p = 30;
  Setting setting = Setting::S1;
  double b = 0.0;
  double g = 0.0;
  double gamma1 = 0.0;
  std::optional<double> beta0;   // log baseline event rate
  std::optional<double> gamma0;  // log baseline censoring rate
  double beta_single = 0.0;
  double gamma2_single = 0.0;
  std::uint64_t seed = 0;

  double resolved_beta0() const;
  double resolved_gamma0() const;
  void validate() const;  // throws ConfigError
};

/// Sparse coefficient directions (nu_T, nu_C) padded with zeros to length p.
std::pair<Eigen::VectorXd, Eigen::VectorXd> nu_vectors(Setting setting, int p);

/// Draws one trial; bit-identical for identical configs.
Dataset simulate(const DgpConfig& config);

/// Rejection counts for one (cell, method) pair of a Type-I-error grid.
struct Type1Row {
  double axis1 = 0.0;  // b, or beta in single-covariate mode
  double axis2 = 0.0;  // g, or gamma2
  double gamma1 = 0.0;
  std::string method;
  int replicates = 0;
  int rejections = 0;
  int errors = 0;  // replicates where the method failed; excluded from the rate
};

struct Type1Grid {
  std::string axis1_name;  // "b" or "beta"
  std::string axis2_name;  // "g" or "gamma2"
  std::vector<Type1Row> rows;  // sorted by (gamma1, axis1, axis2, method)
};

/// Known method names: logrank, post_lasso_min, post_lasso_1se, double_min,
/// double_1se, significance_single, decorrelated.
struct Type1Config {
  DgpConfig base;  // n, p, setting, baselines; per-cell fields are overwritten
  std::vector<double> axis1{0.0};
  std::vector<double> axis2{0.0};
  std::vector<double> gamma1_values{0.0};
  int replicates = 1000;
  double level = 0.05;
  std::vector<std::string> methods{"logrank"};
  int folds = 20;
  double alpha_select = 0.025;
  std::uint64_t base_seed = 0;

  void validate() const;
};

Type1Grid type1_experiment(const Type1Config& config, int jobs = 1);

/// Monte Carlo evaluation of the expected unadjusted partial score under the
/// null in the single-covariate exponential model: inner expectations over
/// (A, X) use the closed forms P(T >= t | X) = exp(-t e^{beta0 + beta X}) and
/// P(C >= t | A, X) = exp(-t e^{gamma0 + gamma1 A + gamma2 X}); the outer
/// time integral uses the trapezoid rule.
struct BiasOracleConfig {
  double beta = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double beta0 = 0.0;
  double gamma0 = 0.0;
  long mc_draws = 100000;
  double t_max = 0.0;  // <= 0: auto so exp(-t(e^beta0 + e^gamma0)) = 1e-6
  int t_steps = 2000;
  std::uint64_t seed = 0;

  void validate() const;
  double resolved_t_max() const;
};

struct BiasEstimate {
  double value = 0.0;
  double mc_se = 0.0;  // from batch means over 10 contiguous draw batches
};

BiasEstimate score_bias_oracle(const BiasOracleConfig& config);

/// Mean estimated survival per (method, arm, time) across replicates.
/// Methods: km, post_lasso_min, post_lasso_1se, double_min, double_1se, plus
/// the truth row computed once by Monte Carlo integration over X.
struct CurveRow {
  std::string method;
  int arm = 1;
  double time = 0.0;
  double mean_survival = 0.0;
  int replicates = 0;  // successful replicates contributing
};

struct CurveTable {
  std::vector<CurveRow> rows;  // sorted by (method, arm, time)
  int failed_replicates = 0;
};

struct CurveConfig {
  DgpConfig base;
  int replicates = 200;
  std::vector<double> timepoints;
  int folds = 20;
  std::uint64_t base_seed = 0;
  long truth_draws = 1000000;

  void validate() const;
};

CurveTable curve_experiment(const CurveConfig& config, int jobs = 1);

/// E[exp(-t exp(beta0 + signal'X))] by Monte Carlo over X (no treatment
/// effect on the event time in this design, so the truth is arm-free).
std::vector<double> true_survival_curve(const DgpConfig& config, const std::vector<double>& times,
                                        long draws, std::uint64_t seed);

}  // namespace censelect
