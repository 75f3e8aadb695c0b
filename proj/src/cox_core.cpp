#include "cox_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "censelect/errors.hpp"

namespace censelect::detail {

RiskOrder make_risk_order(const Dataset& data) {
  const int n = static_cast<int>(data.size());
  RiskOrder ro;
  ro.n = n;
  ro.order.resize(n);
  std::iota(ro.order.begin(), ro.order.end(), 0);
  std::stable_sort(ro.order.begin(), ro.order.end(), [&](int a, int b) {
    const auto& ra = data.rows[a];
    const auto& rb = data.rows[b];
    if (ra.time != rb.time) return ra.time < rb.time;
    return ra.status > rb.status;  // events first within a tied block
  });
  ro.times.resize(n);
  ro.status.resize(n);
  ro.block_of.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto& row = data.rows[ro.order[i]];
    ro.times[i] = row.time;
    ro.status[i] = row.status;
    ro.n_events += row.status;
  }
  for (int i = 0; i < n; ++i) {
    if (i == 0 || ro.times[i] != ro.times[i - 1]) {
      ro.block_first.push_back(i);
      ro.block_deaths.push_back(0);
    }
    const int b = static_cast<int>(ro.block_first.size()) - 1;
    ro.block_of[i] = b;
    ro.block_deaths[b] += ro.status[i];
  }
  return ro;
}

CoxProblem make_problem(const Dataset& data, const std::vector<std::string>& covariates,
                        bool include_treatment) {
  CoxProblem problem;
  problem.order = make_risk_order(data);
  const int n = problem.order.n;
  const int q = static_cast<int>(covariates.size()) + (include_treatment ? 1 : 0);
  std::vector<std::size_t> cols;
  cols.reserve(covariates.size());
  for (const auto& name : covariates) cols.push_back(data.covariate_index(name));
  problem.X.resize(n, q);
  for (int i = 0; i < n; ++i) {
    const auto& row = data.rows[problem.order.order[i]];
    int j = 0;
    if (include_treatment) problem.X(i, j++) = row.treatment;
    for (std::size_t c : cols) problem.X(i, j++) = row.covariates[c];
  }
  return problem;
}

namespace {

int n_blocks(const RiskOrder& ro) { return static_cast<int>(ro.block_first.size()); }

int block_end(const RiskOrder& ro, int b) {
  return b + 1 < n_blocks(ro) ? ro.block_first[b + 1] : ro.n;
}

}  // namespace

double log_partial_likelihood(const RiskOrder& ro, const Eigen::VectorXd& eta) {
  const int n = ro.n;
  if (n == 0) return 0.0;
  const double shift = eta.maxCoeff();
  double loglik = 0.0;
  double run_s0 = 0.0;
  for (int b = n_blocks(ro) - 1; b >= 0; --b) {
    for (int i = ro.block_first[b]; i < block_end(ro, b); ++i) {
      run_s0 += std::exp(eta[i] - shift);
      if (ro.status[i]) loglik += eta[i] - shift;
    }
    if (ro.block_deaths[b] > 0) loglik -= ro.block_deaths[b] * std::log(run_s0);
  }
  return loglik;
}

EtaStats eta_stats(const RiskOrder& ro, const Eigen::VectorXd& eta, bool want_weights) {
  const int n = ro.n;
  const int nb = n_blocks(ro);
  EtaStats stats;
  stats.m.resize(n);
  if (want_weights) stats.w.resize(n);
  if (n == 0) return stats;

  const double shift = eta.maxCoeff();
  Eigen::VectorXd ex(n);
  for (int i = 0; i < n; ++i) ex[i] = std::exp(eta[i] - shift);

  std::vector<double> s0(nb);
  double run_s0 = 0.0;
  for (int b = nb - 1; b >= 0; --b) {
    for (int i = ro.block_first[b]; i < block_end(ro, b); ++i) {
      run_s0 += ex[i];
      if (ro.status[i]) stats.loglik += eta[i] - shift;
    }
    s0[b] = run_s0;
    if (ro.block_deaths[b] > 0) stats.loglik -= ro.block_deaths[b] * std::log(run_s0);
  }

  double ch1 = 0.0;  // sum over event blocks <= t of d / s0
  double ch2 = 0.0;  // sum of d / s0^2
  for (int b = 0; b < nb; ++b) {
    if (ro.block_deaths[b] > 0) {
      ch1 += ro.block_deaths[b] / s0[b];
      ch2 += ro.block_deaths[b] / (s0[b] * s0[b]);
    }
    for (int i = ro.block_first[b]; i < block_end(ro, b); ++i) {
      const double eh = ex[i] * ch1;
      stats.m[i] = ro.status[i] - eh;
      if (want_weights) stats.w[i] = std::max(0.0, eh - ex[i] * ex[i] * ch2);
    }
  }
  return stats;
}

CoxEval evaluate(const CoxProblem& problem, const Eigen::VectorXd& beta, bool want_info) {
  const RiskOrder& ro = problem.order;
  const int n = ro.n;
  const int q = static_cast<int>(problem.X.cols());
  const int nb = n_blocks(ro);

  CoxEval eval;
  eval.grad = Eigen::VectorXd::Zero(q);
  if (want_info) eval.info = Eigen::MatrixXd::Zero(q, q);
  if (n == 0) return eval;

  Eigen::VectorXd eta = problem.X * beta;
  const double shift = eta.maxCoeff();

  double run_s0 = 0.0;
  Eigen::VectorXd run_s1 = Eigen::VectorXd::Zero(q);
  Eigen::MatrixXd run_s2;
  if (want_info) run_s2 = Eigen::MatrixXd::Zero(q, q);

  for (int b = nb - 1; b >= 0; --b) {
    for (int i = ro.block_first[b]; i < block_end(ro, b); ++i) {
      const double exi = std::exp(eta[i] - shift);
      const auto xi = problem.X.row(i);
      run_s0 += exi;
      run_s1.noalias() += exi * xi.transpose();
      if (want_info) run_s2.selfadjointView<Eigen::Lower>().rankUpdate(xi.transpose(), exi);
      if (ro.status[i]) {
        eval.loglik += eta[i] - shift;
        eval.grad.noalias() += xi.transpose();
      }
    }
    const int d = ro.block_deaths[b];
    if (d > 0) {
      eval.loglik -= d * std::log(run_s0);
      Eigen::VectorXd zbar = run_s1 / run_s0;
      eval.grad.noalias() -= d * zbar;
      if (want_info) {
        eval.info.selfadjointView<Eigen::Lower>().rankUpdate(zbar, -static_cast<double>(d));
        eval.info += (d / run_s0) * run_s2;
      }
    }
  }
  if (want_info) {
    eval.info.triangularView<Eigen::Upper>() = eval.info.transpose();
  }
  return eval;
}

ResidualStats residual_stats(const CoxProblem& problem, const Eigen::VectorXd& beta) {
  const RiskOrder& ro = problem.order;
  const int n = ro.n;
  const int q = static_cast<int>(problem.X.cols());
  const int nb = n_blocks(ro);

  ResidualStats stats;
  stats.score_residuals = Eigen::MatrixXd::Zero(n, q);
  if (n == 0) return stats;

  Eigen::VectorXd eta = problem.X * beta;
  const double shift = eta.maxCoeff();
  Eigen::VectorXd ex(n);
  for (int i = 0; i < n; ++i) ex[i] = std::exp(eta[i] - shift);

  std::vector<double> s0(nb, 0.0);
  Eigen::MatrixXd zbar(q, nb);  // per-block risk-set means (event blocks only)
  double run_s0 = 0.0;
  Eigen::VectorXd run_s1 = Eigen::VectorXd::Zero(q);
  for (int b = nb - 1; b >= 0; --b) {
    for (int i = ro.block_first[b]; i < block_end(ro, b); ++i) {
      run_s0 += ex[i];
      run_s1.noalias() += ex[i] * problem.X.row(i).transpose();
    }
    s0[b] = run_s0;
    if (ro.block_deaths[b] > 0) zbar.col(b) = run_s1 / run_s0;
  }

  double ch1 = 0.0;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(q);  // sum of (d/s0) * zbar
  for (int b = 0; b < nb; ++b) {
    const int d = ro.block_deaths[b];
    if (d > 0) {
      const double inc = d / s0[b];
      ch1 += inc;
      g.noalias() += inc * zbar.col(b);
      stats.death_times.push_back(ro.times[ro.block_first[b]]);
      stats.baseline_increments.push_back(inc * std::exp(-shift));
    }
    for (int i = ro.block_first[b]; i < block_end(ro, b); ++i) {
      const auto xi = problem.X.row(i).transpose();
      Eigen::VectorXd u = -ex[i] * (xi * ch1 - g);
      if (ro.status[i]) u.noalias() += xi - zbar.col(b);
      stats.score_residuals.row(ro.order[i]) = u.transpose();
    }
  }
  return stats;
}

}  // namespace censelect::detail
