#include "censelect/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "censelect/cox.hpp"
#include "censelect/errors.hpp"
#include "censelect/rng.hpp"
#include "cox_core.hpp"

namespace censelect {

namespace {

double soft_threshold(double x, double lambda) {
  if (x > lambda) return x - lambda;
  if (x < -lambda) return x + lambda;
  return 0.0;
}

// Centered, unit-population-variance penalized design in risk-set order.
// Zero-variance columns are zeroed out and never receive a coefficient.
struct Workspace {
  detail::RiskOrder order;
  Eigen::MatrixXd xs;  // n x q standardized
  Eigen::VectorXd center;
  Eigen::VectorXd scale;  // 0 marks a disabled column
  int n = 0;
  int q = 0;
};

Workspace make_workspace(const Dataset& data) {
  Workspace ws;
  ws.order = detail::make_risk_order(data);
  detail::CoxProblem problem = detail::make_problem(data, data.covariate_names, true);
  ws.n = problem.order.n;
  ws.q = static_cast<int>(problem.X.cols());
  ws.xs = std::move(problem.X);
  ws.center.resize(ws.q);
  ws.scale.resize(ws.q);
  for (int j = 0; j < ws.q; ++j) {
    const double mean = ws.xs.col(j).mean();
    ws.xs.col(j).array() -= mean;
    const double sd = std::sqrt(ws.xs.col(j).squaredNorm() / ws.n);
    ws.center[j] = mean;
    ws.scale[j] = sd;
    if (sd > 0.0) {
      ws.xs.col(j) /= sd;
    } else {
      ws.xs.col(j).setZero();
    }
  }
  return ws;
}

Eigen::VectorXd linear_predictor(const Workspace& ws, const Eigen::VectorXd& theta) {
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(ws.n);
  for (int j = 0; j < ws.q; ++j) {
    if (theta[j] != 0.0) eta.noalias() += theta[j] * ws.xs.col(j);
  }
  return eta;
}

// Cyclic coordinate descent inside iteratively reweighted quadratic
// approximations of -(1/n) log PL. theta is on the standardized scale and is
// updated in place. Throws on non-convergence.
void solve_penalized(const Workspace& ws, double lambda, double tolerance, int max_outer,
                     int max_sweeps, Eigen::VectorXd& theta) {
  const int n = ws.n;
  const int q = ws.q;
  Eigen::VectorXd u(n);            // w * working residual
  Eigen::VectorXd v(q);            // (1/n) sum_i w_i xs_ij^2, computed lazily
  std::vector<char> v_ready(q, 0);
  Eigen::VectorXd w;

  auto update_column = [&](int j) -> double {
    if (ws.scale[j] == 0.0) return 0.0;
    const double num = ws.xs.col(j).dot(u) / n;
    if (theta[j] == 0.0 && std::abs(num) <= lambda) return 0.0;
    if (!v_ready[j]) {
      v[j] = ws.xs.col(j).cwiseAbs2().dot(w) / n;
      v_ready[j] = 1;
    }
    if (v[j] <= 0.0) return 0.0;
    const double updated = soft_threshold(num + v[j] * theta[j], lambda) / v[j];
    const double delta = updated - theta[j];
    if (delta != 0.0) {
      u.noalias() -= delta * ws.xs.col(j).cwiseProduct(w);
      theta[j] = updated;
    }
    return std::abs(delta);
  };

  const auto objective_of = [&](const detail::EtaStats& stats) {
    double penalty = 0.0;
    for (int j = 0; j < q; ++j) penalty += std::abs(theta[j]);
    return -stats.loglik / n + lambda * penalty;
  };

  double previous_objective = std::numeric_limits<double>::infinity();
  Eigen::VectorXd theta_before = theta;
  for (int outer = 1; outer <= max_outer; ++outer) {
    detail::EtaStats stats = detail::eta_stats(ws.order, linear_predictor(ws, theta), true);
    double objective = objective_of(stats);

    // Each coordinate-descent pass minimizes a quadratic model, which can
    // overshoot a flat likelihood; halve the move until the true penalized
    // objective is nonincreasing so the outer loop cannot cycle.
    if (outer > 1) {
      const double slack = 1e-12 * (1.0 + std::abs(previous_objective));
      int halvings = 0;
      while (objective > previous_objective + slack && halvings < 30) {
        theta = 0.5 * (theta + theta_before);
        stats = detail::eta_stats(ws.order, linear_predictor(ws, theta), true);
        objective = objective_of(stats);
        ++halvings;
      }
      if (objective > previous_objective + slack) {
        theta = theta_before;  // no descent left at this resolution
        return;
      }
      if ((theta - theta_before).cwiseAbs().maxCoeff() < tolerance) return;
      // On a flat valley the iterate can wander with only hairline objective
      // gains; once damping engages, an objective this converged is done.
      if (halvings > 0 &&
          previous_objective - objective <= 1e-10 * (1.0 + std::abs(previous_objective)))
        return;
    }
    previous_objective = objective;
    theta_before = theta;
    u = stats.m;
    w = stats.w;
    std::fill(v_ready.begin(), v_ready.end(), 0);

    int sweeps = 0;
    auto guard = [&]() {
      if (++sweeps > max_sweeps) {
        std::ostringstream out;
        out << "lasso coordinate descent did not converge at lambda=" << lambda
            << ", iterate [" << theta.transpose() << "]";
        throw NumericalError(out.str());
      }
    };

    while (true) {
      guard();
      double full_delta = 0.0;
      for (int j = 0; j < q; ++j) full_delta = std::max(full_delta, update_column(j));
      if (full_delta < tolerance) break;
      // iterate on the current support until it stabilizes, then recheck all
      std::vector<int> active;
      for (int j = 0; j < q; ++j) {
        if (theta[j] != 0.0) active.push_back(j);
      }
      double active_delta;
      do {
        guard();
        active_delta = 0.0;
        for (int j : active) active_delta = std::max(active_delta, update_column(j));
      } while (active_delta >= tolerance);
    }

    if ((theta - theta_before).cwiseAbs().maxCoeff() < tolerance) return;
  }
  std::ostringstream out;
  out << "lasso reweighting did not converge at lambda=" << lambda << ", iterate ["
      << theta.transpose() << "]";
  throw NumericalError(out.str());
}

double lambda_max_of(const Workspace& ws) {
  detail::EtaStats stats = detail::eta_stats(ws.order, Eigen::VectorXd::Zero(ws.n), false);
  double lambda_max = 0.0;
  for (int j = 0; j < ws.q; ++j) {
    if (ws.scale[j] == 0.0) continue;
    lambda_max = std::max(lambda_max, std::abs(ws.xs.col(j).dot(stats.m)) / ws.n);
  }
  return lambda_max;
}

void require_events(const Dataset& data) {
  if (data.n_events() == 0) throw DataError("no events");
}

void require_some_usable(const Workspace& ws) {
  bool any = false;
  for (int j = 0; j < ws.q; ++j) any = any || ws.scale[j] != 0.0;
  if (!any) throw DataError("all design columns are constant");
}

std::vector<std::string> path_terms(const Dataset& data) {
  std::vector<std::string> terms{"treatment"};
  terms.insert(terms.end(), data.covariate_names.begin(), data.covariate_names.end());
  return terms;
}

Eigen::VectorXd to_original_scale(const Workspace& ws, const Eigen::VectorXd& theta_std) {
  Eigen::VectorXd theta(ws.q);
  for (int j = 0; j < ws.q; ++j) {
    theta[j] = ws.scale[j] > 0.0 ? theta_std[j] / ws.scale[j] : 0.0;
  }
  return theta;
}

Eigen::MatrixXd path_on_workspace(const Workspace& ws, const std::vector<double>& lambdas,
                                  const LassoOptions& options) {
  Eigen::MatrixXd coefficients(ws.q, lambdas.size());
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(ws.q);
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    if (!(lambdas[l] >= 0.0)) throw ConfigError("penalty must be nonnegative");
    solve_penalized(ws, lambdas[l], options.tolerance, options.max_outer_iterations,
                    options.max_sweeps, theta);
    coefficients.col(l) = to_original_scale(ws, theta);
  }
  return coefficients;
}

// Fold labels per row: stratified by event status, shuffled from `seed`,
// dealt round-robin; every fold must hold at least one event.
std::vector<int> fold_assignment(const Dataset& data, int folds, std::uint64_t seed) {
  const int n = static_cast<int>(data.size());
  std::vector<int> events, censored;
  for (int i = 0; i < n; ++i) {
    (data.rows[i].status == 1 ? events : censored).push_back(i);
  }
  std::vector<int> assignment(n, -1);
  for (int attempt = 0; attempt < 10; ++attempt) {
    std::mt19937_64 engine = make_engine(substream(seed, static_cast<std::uint64_t>(attempt)));
    std::shuffle(events.begin(), events.end(), engine);
    std::shuffle(censored.begin(), censored.end(), engine);
    for (std::size_t i = 0; i < events.size(); ++i) {
      assignment[events[i]] = static_cast<int>(i) % folds;
    }
    for (std::size_t i = 0; i < censored.size(); ++i) {
      assignment[censored[i]] = static_cast<int>((i + events.size()) % folds);
    }
    std::vector<int> fold_events(folds, 0);
    for (int i = 0; i < n; ++i) {
      if (data.rows[i].status == 1) ++fold_events[assignment[i]];
    }
    if (*std::min_element(fold_events.begin(), fold_events.end()) >= 1) return assignment;
  }
  throw DataError("degenerate folds: a fold has no events");
}

}  // namespace

std::string to_string(LambdaRule rule) {
  return rule == LambdaRule::min ? "min" : "1se";
}

LambdaRule lambda_rule_from_string(const std::string& name) {
  if (name == "min") return LambdaRule::min;
  if (name == "1se") return LambdaRule::one_se;
  throw ConfigError("unknown lambda rule: " + name + " (expected min or 1se)");
}

std::vector<double> lambda_grid(const Dataset& data, int n_lambda, double ratio) {
  require_events(data);
  if (n_lambda < 2) throw ConfigError("n_lambda must be at least 2");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("lambda ratio must lie in (0,1)");
  Workspace ws = make_workspace(data);
  require_some_usable(ws);
  const double lambda_max = lambda_max_of(ws);
  if (!(lambda_max > 0.0)) throw NumericalError("null score vanishes for every column");
  std::vector<double> grid(n_lambda);
  for (int i = 0; i < n_lambda; ++i) {
    grid[i] = lambda_max * std::pow(ratio, static_cast<double>(i) / (n_lambda - 1));
  }
  return grid;
}

Eigen::VectorXd fit_lasso_cox(const Dataset& data, double lambda,
                              const Eigen::VectorXd* warm_start, const LassoOptions& options) {
  require_events(data);
  if (!(lambda >= 0.0)) throw ConfigError("penalty must be nonnegative");
  Workspace ws = make_workspace(data);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(ws.q);
  if (warm_start != nullptr) {
    if (warm_start->size() != ws.q) throw ConfigError("warm start length mismatch");
    for (int j = 0; j < ws.q; ++j) theta[j] = (*warm_start)[j] * ws.scale[j];
  }
  solve_penalized(ws, lambda, options.tolerance, options.max_outer_iterations,
                  options.max_sweeps, theta);
  return to_original_scale(ws, theta);
}

PenaltyPath lasso_path(const Dataset& data, const std::vector<double>& lambdas,
                       const LassoOptions& options) {
  require_events(data);
  if (lambdas.empty()) throw ConfigError("empty penalty grid");
  Workspace ws = make_workspace(data);
  PenaltyPath path;
  path.terms = path_terms(data);
  path.lambdas = lambdas;
  std::sort(path.lambdas.begin(), path.lambdas.end(), std::greater<>());
  path.coefficients = path_on_workspace(ws, path.lambdas, options);
  path.center = ws.center;
  path.scale = ws.scale;
  return path;
}

CvResult cross_validate(const Dataset& data, int folds, const std::vector<double>& grid,
                        std::uint64_t seed, const LassoOptions& options) {
  require_events(data);
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (folds > static_cast<int>(data.size())) throw ConfigError("more folds than rows");
  if (grid.empty()) throw ConfigError("empty penalty grid");

  CvResult cv;
  cv.lambdas = grid;
  std::sort(cv.lambdas.begin(), cv.lambdas.end(), std::greater<>());
  const int n_lambda = static_cast<int>(cv.lambdas.size());

  const std::vector<int> assignment = fold_assignment(data, folds, seed);
  detail::CoxProblem full_problem = detail::make_problem(data, data.covariate_names, true);

  Eigen::MatrixXd loss(folds, n_lambda);
  for (int k = 0; k < folds; ++k) {
    Dataset training;
    training.covariate_names = data.covariate_names;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (assignment[i] != k) training.rows.push_back(data.rows[i]);
    }
    Workspace ws = make_workspace(training);
    detail::CoxProblem train_problem =
        detail::make_problem(training, training.covariate_names, true);

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(ws.q);
    for (int l = 0; l < n_lambda; ++l) {
      solve_penalized(ws, cv.lambdas[l], options.tolerance, options.max_outer_iterations,
                      options.max_sweeps, theta);
      const Eigen::VectorXd original = to_original_scale(ws, theta);
      const double lp_full =
          detail::log_partial_likelihood(full_problem.order, full_problem.X * original);
      const double lp_train =
          detail::log_partial_likelihood(train_problem.order, train_problem.X * original);
      loss(k, l) = -2.0 * (lp_full - lp_train);
    }
  }

  cv.mean_loss.resize(n_lambda);
  cv.se_loss.resize(n_lambda);
  for (int l = 0; l < n_lambda; ++l) {
    const double mean = loss.col(l).mean();
    const double sq = (loss.col(l).array() - mean).square().sum();
    cv.mean_loss[l] = mean;
    cv.se_loss[l] = std::sqrt(sq / (folds - 1)) / std::sqrt(static_cast<double>(folds));
  }

  cv.index_min = 0;
  for (int l = 1; l < n_lambda; ++l) {
    if (cv.mean_loss[l] < cv.mean_loss[cv.index_min]) cv.index_min = l;
  }
  const double bound = cv.mean_loss[cv.index_min] + cv.se_loss[cv.index_min];
  cv.index_1se = cv.index_min;
  for (int l = 0; l < n_lambda; ++l) {
    if (cv.mean_loss[l] <= bound) {
      cv.index_1se = l;
      break;
    }
  }
  cv.lambda_min = cv.lambdas[cv.index_min];
  cv.lambda_1se = cv.lambdas[cv.index_1se];
  return cv;
}

std::vector<std::string> selected_support(const Eigen::VectorXd& coefficients,
                                          const std::vector<std::string>& covariate_names) {
  if (coefficients.size() != static_cast<Eigen::Index>(covariate_names.size()) + 1)
    throw ConfigError("coefficient vector must hold treatment plus every covariate");
  std::vector<std::string> support;
  for (std::size_t j = 0; j < covariate_names.size(); ++j) {
    if (coefficients[static_cast<Eigen::Index>(j) + 1] != 0.0)
      support.push_back(covariate_names[j]);
  }
  return support;
}

Eigen::VectorXd linear_lasso_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int folds,
                                std::uint64_t seed, int n_lambda, double ratio) {
  const int n = static_cast<int>(x.rows());
  const int q = static_cast<int>(x.cols());
  if (y.size() != n) throw ConfigError("response length mismatch");
  if (folds < 2 || folds > n) throw ConfigError("invalid fold count");
  if (n_lambda < 2 || !(ratio > 0.0 && ratio < 1.0)) throw ConfigError("invalid penalty grid");

  // standardize a copy of the problem
  auto standardize = [](Eigen::MatrixXd& m, Eigen::VectorXd& scale) {
    scale.resize(m.cols());
    for (int j = 0; j < m.cols(); ++j) {
      m.col(j).array() -= m.col(j).mean();
      const double sd = std::sqrt(m.col(j).squaredNorm() / m.rows());
      scale[j] = sd;
      if (sd > 0.0) {
        m.col(j) /= sd;
      } else {
        m.col(j).setZero();
      }
    }
  };

  // plain cyclic coordinate descent for (1/2n)||yc - xs theta||^2 + lambda|theta|
  auto solve = [](const Eigen::MatrixXd& xs, double lambda, Eigen::VectorXd& theta,
                  Eigen::VectorXd& residual) {
    const int rows = static_cast<int>(xs.rows());
    const int cols = static_cast<int>(xs.cols());
    Eigen::VectorXd v(cols);
    for (int j = 0; j < cols; ++j) v[j] = xs.col(j).squaredNorm() / rows;
    for (int sweep = 0; sweep < 100000; ++sweep) {
      double max_delta = 0.0;
      for (int j = 0; j < cols; ++j) {
        const double vj = v[j];
        if (vj <= 0.0) continue;
        const double num = xs.col(j).dot(residual) / rows + vj * theta[j];
        const double updated = soft_threshold(num, lambda) / vj;
        const double delta = updated - theta[j];
        if (delta != 0.0) {
          residual.noalias() -= delta * xs.col(j);
          theta[j] = updated;
          max_delta = std::max(max_delta, std::abs(delta));
        }
      }
      if (max_delta < 1e-9) return;
    }
    throw NumericalError("linear lasso did not converge");
  };

  Eigen::MatrixXd xs_full = x;
  Eigen::VectorXd scale_full;
  standardize(xs_full, scale_full);
  if ((scale_full.array() == 0.0).all()) throw NumericalError("degenerate residual regression");
  Eigen::VectorXd yc_full = y.array() - y.mean();

  double lambda_max = 0.0;
  for (int j = 0; j < q; ++j) {
    lambda_max = std::max(lambda_max, std::abs(xs_full.col(j).dot(yc_full)) / n);
  }
  if (!(lambda_max > 0.0)) return Eigen::VectorXd::Zero(q);

  std::vector<double> grid(n_lambda);
  for (int i = 0; i < n_lambda; ++i) {
    grid[i] = lambda_max * std::pow(ratio, static_cast<double>(i) / (n_lambda - 1));
  }

  // unstratified deterministic fold assignment
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 engine = make_engine(substream(seed, 0));
  std::shuffle(order.begin(), order.end(), engine);
  std::vector<int> assignment(n);
  for (int i = 0; i < n; ++i) assignment[order[i]] = i % folds;

  Eigen::MatrixXd loss(folds, n_lambda);
  for (int k = 0; k < folds; ++k) {
    std::vector<int> train, test;
    for (int i = 0; i < n; ++i) (assignment[i] == k ? test : train).push_back(i);
    Eigen::MatrixXd xtr(train.size(), q);
    Eigen::VectorXd ytr(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      xtr.row(i) = x.row(train[i]);
      ytr[i] = y[train[i]];
    }
    Eigen::RowVectorXd xmean = xtr.colwise().mean();
    const double ymean = ytr.mean();
    Eigen::MatrixXd xstr = xtr;
    Eigen::VectorXd scale_tr;
    standardize(xstr, scale_tr);
    Eigen::VectorXd yctr = ytr.array() - ymean;

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(q);
    Eigen::VectorXd residual = yctr;
    for (int l = 0; l < n_lambda; ++l) {
      solve(xstr, grid[l], theta, residual);
      // original-scale coefficients and intercept for test-fold prediction
      double sse = 0.0;
      for (int i : test) {
        double prediction = ymean;
        for (int j = 0; j < q; ++j) {
          if (theta[j] != 0.0 && scale_tr[j] > 0.0)
            prediction += theta[j] / scale_tr[j] * (x(i, j) - xmean[j]);
        }
        sse += (y[i] - prediction) * (y[i] - prediction);
      }
      loss(k, l) = sse / test.size();
    }
  }

  int index_min = 0;
  Eigen::VectorXd mean_loss = loss.colwise().mean();
  for (int l = 1; l < n_lambda; ++l) {
    if (mean_loss[l] < mean_loss[index_min]) index_min = l;
  }

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd residual = yc_full;
  for (int l = 0; l <= index_min; ++l) solve(xs_full, grid[l], theta, residual);
  Eigen::VectorXd original(q);
  for (int j = 0; j < q; ++j) {
    original[j] = scale_full[j] > 0.0 ? theta[j] / scale_full[j] : 0.0;
  }
  return original;
}

}  // namespace censelect
