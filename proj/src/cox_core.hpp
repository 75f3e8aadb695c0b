#pragma once

// Internal risk-set engine shared by the survival, cox and lasso layers.
// All per-eta quantities use exponentials shifted by max(eta); the shifts
// cancel in every ratio except the baseline hazard, which restores the scale.

#include <Eigen/Dense>
#include <vector>

#include "censelect/types.hpp"

namespace censelect::detail {

/// Rows sorted by ascending time (events before censorings at equal times),
/// grouped into blocks of equal time. The risk set of block b is every
/// sorted index >= block_first[b].
struct RiskOrder {
  std::vector<int> order;         // sorted position -> original row index
  Eigen::VectorXd times;          // sorted
  Eigen::VectorXi status;         // sorted
  std::vector<int> block_first;   // first sorted index of each block
  std::vector<int> block_deaths;  // events in each block
  std::vector<int> block_of;      // sorted index -> block
  int n = 0;
  int n_events = 0;
};

RiskOrder make_risk_order(const Dataset& data);

/// Design matrix rows in sorted order; columns: treatment first when
/// included, then the named covariates.
struct CoxProblem {
  RiskOrder order;
  Eigen::MatrixXd X;  // n x q
};

CoxProblem make_problem(const Dataset& data, const std::vector<std::string>& covariates,
                        bool include_treatment);

/// Log partial likelihood (Breslow ties) at linear predictor eta
/// (sorted order).
double log_partial_likelihood(const RiskOrder& order, const Eigen::VectorXd& eta);

/// First and (diagonal of the) second derivative of the log partial
/// likelihood with respect to each eta_i: martingale residuals m and
/// nonnegative curvature weights w.
struct EtaStats {
  double loglik = 0.0;
  Eigen::VectorXd m;
  Eigen::VectorXd w;
};

EtaStats eta_stats(const RiskOrder& order, const Eigen::VectorXd& eta, bool want_weights);

/// Value, gradient and observed information of the log partial likelihood
/// with respect to the coefficients.
struct CoxEval {
  double loglik = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd info;  // negative Hessian; filled when want_info
};

CoxEval evaluate(const CoxProblem& problem, const Eigen::VectorXd& beta, bool want_info);

/// Per-subject score residuals (rows in ORIGINAL order) and the Breslow
/// baseline hazard increments at the distinct event times.
struct ResidualStats {
  Eigen::MatrixXd score_residuals;         // n x q, original row order
  std::vector<double> death_times;
  std::vector<double> baseline_increments; // d_k / sum_risk exp(eta), true scale
};

ResidualStats residual_stats(const CoxProblem& problem, const Eigen::VectorXd& beta);

}  // namespace censelect::detail
