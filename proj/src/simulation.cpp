#include "censelect/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "censelect/cox.hpp"
#include "censelect/errors.hpp"
#include "censelect/parallel.hpp"
#include "censelect/rng.hpp"
#include "censelect/selection.hpp"
#include "censelect/survival.hpp"

namespace censelect {

namespace {

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw ConfigError(std::string(what) + " must be finite");
}

double draw_positive_exp(std::mt19937_64& engine, std::exponential_distribution<double>& dist) {
  double e = dist(engine);
  while (!(e > 0.0)) e = dist(engine);
  return e;
}

}  // namespace

std::string to_string(Setting s) {
  switch (s) {
    case Setting::S1:
      return "S1";
    case Setting::S2:
      return "S2";
    case Setting::S3:
      return "S3";
    case Setting::single_covariate:
      return "single_covariate";
  }
  throw ConfigError("unknown setting");
}

Setting setting_from_string(const std::string& name) {
  if (name == "S1") return Setting::S1;
  if (name == "S2") return Setting::S2;
  if (name == "S3") return Setting::S3;
  if (name == "single_covariate" || name == "single") return Setting::single_covariate;
  throw ConfigError("unknown setting: " + name);
}

double DgpConfig::resolved_beta0() const {
  if (beta0) return *beta0;
  return setting == Setting::single_covariate ? 1.0 : 0.0;
}

double DgpConfig::resolved_gamma0() const {
  if (gamma0) return *gamma0;
  return setting == Setting::single_covariate ? -1.0 : 0.0;
}

void DgpConfig::validate() const {
  if (n < 2) throw ConfigError("n must be at least 2");
  if (p < 1) throw ConfigError("p must be at least 1");
  if (setting == Setting::single_covariate) {
    if (p != 1) throw ConfigError("single-covariate mode requires p = 1");
  } else {
    nu_vectors(setting, p);  // surfaces p < 10 early
  }
  require_finite(b, "b");
  require_finite(g, "g");
  require_finite(gamma1, "gamma1");
  require_finite(resolved_beta0(), "beta0");
  require_finite(resolved_gamma0(), "gamma0");
  require_finite(beta_single, "beta");
  require_finite(gamma2_single, "gamma2");
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> nu_vectors(Setting setting, int p) {
  if (setting == Setting::single_covariate)
    throw ConfigError("nu vectors are undefined in single-covariate mode");
  if (p < 10) throw ConfigError("settings S1-S3 require p >= 10");

  Eigen::VectorXd harmonic = Eigen::VectorXd::Zero(p);  // 1, 1/2, ..., 1/10
  for (int j = 0; j < 10; ++j) harmonic[j] = 1.0 / (j + 1);
  Eigen::VectorXd five_twice = Eigen::VectorXd::Zero(p);  // (1,...,1/5) repeated
  Eigen::VectorXd five_twice_rev = Eigen::VectorXd::Zero(p);  // (1/5,...,1) repeated
  for (int j = 0; j < 5; ++j) {
    five_twice[j] = five_twice[j + 5] = 1.0 / (j + 1);
    five_twice_rev[j] = five_twice_rev[j + 5] = 1.0 / (5 - j);
  }

  switch (setting) {
    case Setting::S1:
      return {harmonic, five_twice};
    case Setting::S2:
      return {five_twice, harmonic};
    case Setting::S3:
      return {five_twice, five_twice_rev};
    default:
      throw ConfigError("unknown setting");
  }
}

Dataset simulate(const DgpConfig& config) {
  config.validate();
  const int n = config.n;
  const int p = config.p;
  const bool single = config.setting == Setting::single_covariate;
  Eigen::VectorXd nu_t, nu_c;
  if (!single) std::tie(nu_t, nu_c) = nu_vectors(config.setting, p);
  const double beta0 = config.resolved_beta0();
  const double gamma0 = config.resolved_gamma0();

  std::mt19937_64 engine = make_engine(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution arm(0.5);
  std::exponential_distribution<double> unit_exp(1.0);

  Dataset data;
  data.covariate_names.reserve(p);
  for (int j = 0; j < p; ++j) data.covariate_names.push_back("X" + std::to_string(j + 1));
  data.rows.resize(n);
  for (int i = 0; i < n; ++i) {
    SurvivalRow& row = data.rows[i];
    row.covariates.resize(p);
    double survival_signal = 0.0;
    double censoring_signal = 0.0;
    for (int j = 0; j < p; ++j) {
      const double x = normal(engine);
      row.covariates[j] = x;
      if (single) {
        survival_signal += config.beta_single * x;
        censoring_signal += config.gamma2_single * x;
      } else {
        survival_signal += config.b * nu_t[j] * x;
        censoring_signal += config.g * nu_c[j] * x;
      }
    }
    row.treatment = arm(engine) ? 1 : 0;
    const double t = draw_positive_exp(engine, unit_exp) / std::exp(beta0 + survival_signal);
    const double c = draw_positive_exp(engine, unit_exp) /
                     std::exp(gamma0 + config.gamma1 * row.treatment + censoring_signal);
    row.time = std::min(t, c);
    row.status = t <= c ? 1 : 0;
  }
  return data;
}

namespace {

const std::vector<std::string>& known_type1_methods() {
  static const std::vector<std::string> names = {
      "logrank",    "post_lasso_min",      "post_lasso_1se", "double_min",
      "double_1se", "significance_single", "decorrelated"};
  return names;
}

bool is_batch_strategy(const std::string& method) {
  return method == "post_lasso_min" || method == "post_lasso_1se" || method == "double_min" ||
         method == "double_1se";
}

// 0 = accept, 1 = reject, 2 = method failed on this replicate
unsigned char outcome_of(const TestResult& test, double level) {
  return test.p_value < level ? 1 : 0;
}

unsigned char outcome_of_error(std::exception_ptr error) {
  try {
    std::rethrow_exception(error);
  } catch (const DataError&) {
    return 2;
  } catch (const NumericalError&) {
    return 2;
  }
  // ConfigError and anything unexpected abort the experiment.
}

}  // namespace

void Type1Config::validate() const {
  base.validate();
  if (replicates < 1) throw ConfigError("replicates must be at least 1");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0,1)");
  if (axis1.empty() || axis2.empty() || gamma1_values.empty())
    throw ConfigError("grid axes must be nonempty");
  for (double v : axis1) require_finite(v, "axis1 value");
  for (double v : axis2) require_finite(v, "axis2 value");
  for (double v : gamma1_values) require_finite(v, "gamma1 value");
  if (methods.empty()) throw ConfigError("methods must be nonempty");
  const auto& known = known_type1_methods();
  for (const auto& m : methods) {
    if (std::find(known.begin(), known.end(), m) == known.end())
      throw ConfigError("unknown method: " + m);
  }
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (!(alpha_select > 0.0 && alpha_select < 1.0))
    throw ConfigError("alpha_select must lie in (0,1)");
}

Type1Grid type1_experiment(const Type1Config& config, int jobs) {
  config.validate();
  const bool single = config.base.setting == Setting::single_covariate;

  std::vector<std::string> methods = config.methods;
  std::sort(methods.begin(), methods.end());
  methods.erase(std::unique(methods.begin(), methods.end()), methods.end());
  const std::size_t n_methods = methods.size();

  std::vector<std::string> batch_names;
  std::vector<std::size_t> batch_pos;
  for (std::size_t m = 0; m < n_methods; ++m) {
    if (is_batch_strategy(methods[m])) {
      batch_names.push_back(methods[m]);
      batch_pos.push_back(m);
    }
  }

  struct Cell {
    double gamma1, axis1, axis2;
  };
  std::vector<Cell> cells;
  for (double g1 : config.gamma1_values)
    for (double a1 : config.axis1)
      for (double a2 : config.axis2) cells.push_back({g1, a1, a2});

  const std::size_t reps = static_cast<std::size_t>(config.replicates);
  std::vector<unsigned char> slots(cells.size() * reps * n_methods, 0);

  parallel_for(cells.size() * reps, jobs, [&](std::size_t task) {
    const std::size_t cell_index = task / reps;
    const std::size_t rep = task % reps;
    const Cell& cell = cells[cell_index];

    DgpConfig dgp = config.base;
    dgp.gamma1 = cell.gamma1;
    if (single) {
      dgp.beta_single = cell.axis1;
      dgp.gamma2_single = cell.axis2;
    } else {
      dgp.b = cell.axis1;
      dgp.g = cell.axis2;
    }
    const std::uint64_t rep_seed = derive_seed(config.base_seed, cell_index, rep);
    dgp.seed = substream(rep_seed, 0);
    const std::uint64_t fold_seed = substream(rep_seed, 1);
    Dataset data = simulate(dgp);

    unsigned char* out = &slots[task * n_methods];
    if (!batch_names.empty()) {
      auto batch = selection_batch(data, batch_names, config.folds, fold_seed);
      for (std::size_t k = 0; k < batch.size(); ++k) {
        out[batch_pos[k]] = batch[k].error ? outcome_of_error(batch[k].error)
                                           : outcome_of(batch[k].report->test, config.level);
      }
    }
    for (std::size_t m = 0; m < n_methods; ++m) {
      if (is_batch_strategy(methods[m])) continue;
      try {
        TestResult test;
        if (methods[m] == "logrank") {
          test = logrank_test(data);
        } else if (methods[m] == "significance_single") {
          test = significance_selection_single(data, config.alpha_select);
        } else {
          test = decorrelated_score_test(data, LambdaRule::min, config.folds, fold_seed);
        }
        out[m] = outcome_of(test, config.level);
      } catch (const DataError&) {
        out[m] = 2;
      } catch (const NumericalError&) {
        out[m] = 2;
      }
    }
  });

  Type1Grid grid;
  grid.axis1_name = single ? "beta" : "b";
  grid.axis2_name = single ? "gamma2" : "g";
  grid.rows.reserve(cells.size() * n_methods);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t m = 0; m < n_methods; ++m) {
      Type1Row row;
      row.gamma1 = cells[c].gamma1;
      row.axis1 = cells[c].axis1;
      row.axis2 = cells[c].axis2;
      row.method = methods[m];
      row.replicates = config.replicates;
      for (std::size_t r = 0; r < reps; ++r) {
        const unsigned char outcome = slots[(c * reps + r) * n_methods + m];
        if (outcome == 1) ++row.rejections;
        if (outcome == 2) ++row.errors;
      }
      grid.rows.push_back(std::move(row));
    }
  }
  std::stable_sort(grid.rows.begin(), grid.rows.end(), [](const Type1Row& a, const Type1Row& b) {
    if (a.gamma1 != b.gamma1) return a.gamma1 < b.gamma1;
    if (a.axis1 != b.axis1) return a.axis1 < b.axis1;
    if (a.axis2 != b.axis2) return a.axis2 < b.axis2;
    return a.method < b.method;
  });
  return grid;
}

void BiasOracleConfig::validate() const {
  require_finite(beta, "beta");
  require_finite(gamma1, "gamma1");
  require_finite(gamma2, "gamma2");
  require_finite(beta0, "beta0");
  require_finite(gamma0, "gamma0");
  if (mc_draws < 1000) throw ConfigError("mc_draws must be at least 1000");
  if (t_steps < 2) throw ConfigError("t_steps must be at least 2");
  if (t_max > 0.0 && !std::isfinite(t_max)) throw ConfigError("t_max must be finite");
}

double BiasOracleConfig::resolved_t_max() const {
  if (t_max > 0.0) return t_max;
  // joint at-risk weight exp(-t (e^beta0 + e^gamma0)) reaches 1e-6 at t_max
  return std::log(1e6) / (std::exp(beta0) + std::exp(gamma0));
}

BiasEstimate score_bias_oracle(const BiasOracleConfig& config) {
  config.validate();
  const int nodes = config.t_steps + 1;
  const double t_max = config.resolved_t_max();
  const double h = t_max / config.t_steps;
  const double K = std::exp(config.gamma1);
  constexpr int n_batches = 10;

  // per-batch, per-node sums over X-draws of the four inner expectations
  Eigen::MatrixXd s_w1a = Eigen::MatrixXd::Zero(n_batches, nodes);
  Eigen::MatrixXd s_w1 = Eigen::MatrixXd::Zero(n_batches, nodes);
  Eigen::MatrixXd s_ws = Eigen::MatrixXd::Zero(n_batches, nodes);
  Eigen::MatrixXd s_wsa = Eigen::MatrixXd::Zero(n_batches, nodes);
  Eigen::VectorXd batch_count = Eigen::VectorXd::Zero(n_batches);

  std::mt19937_64 engine = make_engine(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (long i = 0; i < config.mc_draws; ++i) {
    const int batch = static_cast<int>((static_cast<long long>(i) * n_batches) / config.mc_draws);
    batch_count[batch] += 1.0;
    const double x = normal(engine);
    const double a = std::exp(config.beta0 + config.beta * x);    // event rate
    const double d = std::exp(config.gamma0 + config.gamma2 * x); // control censoring rate
    const double f0 = std::exp(-h * (a + d));
    const double f1 = std::exp(-h * (a + K * d));
    double w0 = 1.0;  // joint at-risk probability, control arm
    double w1 = 1.0;  // treated arm
    for (int node = 0; node < nodes; ++node) {
      const double ws = w0 + w1;
      s_w1a(batch, node) += w1 * a;
      s_w1(batch, node) += w1;
      s_ws(batch, node) += ws;
      s_wsa(batch, node) += ws * a;
      w0 *= f0;
      w1 *= f1;
    }
  }

  // integrand(t) = E[A Y(t) a] - (E[A Y(t)] / E[Y(t)]) E[Y(t) a], A enumerated
  auto integrate = [&](const Eigen::VectorXd& w1a, const Eigen::VectorXd& w1,
                       const Eigen::VectorXd& ws, const Eigen::VectorXd& wsa, double count) {
    double total = 0.0;
    for (int node = 0; node < nodes; ++node) {
      double f = 0.0;
      if (ws[node] > 0.0) {
        const double e_ay_a = 0.5 * w1a[node] / count;
        const double e_ay = 0.5 * w1[node] / count;
        const double e_y = 0.5 * ws[node] / count;
        const double e_y_a = 0.5 * wsa[node] / count;
        f = e_ay_a - (e_ay / e_y) * e_y_a;
      }
      const double weight = (node == 0 || node == nodes - 1) ? 0.5 : 1.0;
      total += weight * f;
    }
    return h * total;
  };

  Eigen::VectorXd batch_values(n_batches);
  for (int b = 0; b < n_batches; ++b) {
    batch_values[b] = integrate(s_w1a.row(b), s_w1.row(b), s_ws.row(b), s_wsa.row(b),
                                batch_count[b]);
  }

  BiasEstimate estimate;
  estimate.value = integrate(s_w1a.colwise().sum(), s_w1.colwise().sum(), s_ws.colwise().sum(),
                             s_wsa.colwise().sum(), static_cast<double>(config.mc_draws));
  const double mean = batch_values.mean();
  estimate.mc_se =
      std::sqrt((batch_values.array() - mean).square().sum() / (n_batches - 1) / n_batches);
  return estimate;
}

void CurveConfig::validate() const {
  base.validate();
  if (replicates < 1) throw ConfigError("replicates must be at least 1");
  if (timepoints.empty()) throw ConfigError("timepoints must be nonempty");
  for (double t : timepoints) {
    if (!std::isfinite(t) || t < 0.0) throw ConfigError("timepoints must be nonnegative");
  }
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (truth_draws < 1) throw ConfigError("truth_draws must be at least 1");
}

CurveTable curve_experiment(const CurveConfig& config, int jobs) {
  config.validate();
  const std::vector<std::string> strategies = {"post_lasso_min", "post_lasso_1se", "double_min",
                                               "double_1se"};
  const std::vector<double>& times = config.timepoints;
  const std::size_t n_times = times.size();
  const std::size_t n_estimated = strategies.size() + 1;  // + km
  const std::size_t per_rep = n_estimated * 2 * n_times;

  const std::size_t reps = static_cast<std::size_t>(config.replicates);
  std::vector<double> slots(reps * per_rep, 0.0);
  std::vector<unsigned char> failed(reps, 0);

  parallel_for(reps, jobs, [&](std::size_t rep) {
    const std::uint64_t rep_seed = derive_seed(config.base_seed, 0, rep);
    DgpConfig dgp = config.base;
    dgp.seed = substream(rep_seed, 0);
    const std::uint64_t fold_seed = substream(rep_seed, 1);
    Dataset data = simulate(dgp);

    double* out = &slots[rep * per_rep];
    auto slot = [&](std::size_t method, int arm, std::size_t t) -> double& {
      return out[(method * 2 + arm) * n_times + t];
    };
    try {
      for (int arm = 0; arm <= 1; ++arm) {
        StepFunction km = kaplan_meier(data, arm);
        for (std::size_t t = 0; t < n_times; ++t) slot(0, arm, t) = km(times[t]);
      }
      auto batch = selection_batch(data, strategies, config.folds, fold_seed);
      for (std::size_t s = 0; s < batch.size(); ++s) {
        if (batch[s].error) std::rethrow_exception(batch[s].error);
        for (int arm = 0; arm <= 1; ++arm) {
          SurvivalCurve curve = standardized_curves(batch[s].report->fit, data, arm, times);
          for (std::size_t t = 0; t < n_times; ++t) slot(s + 1, arm, t) = curve.probabilities[t];
        }
      }
    } catch (const DataError&) {
      failed[rep] = 1;
    } catch (const NumericalError&) {
      failed[rep] = 1;
    }
  });

  int n_success = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    if (!failed[r]) ++n_success;
  }
  if (n_success == 0) throw DataError("all replicates failed");

  CurveTable table;
  table.failed_replicates = config.replicates - n_success;
  std::vector<std::string> method_names = {"km"};
  method_names.insert(method_names.end(), strategies.begin(), strategies.end());
  for (std::size_t m = 0; m < n_estimated; ++m) {
    for (int arm = 0; arm <= 1; ++arm) {
      for (std::size_t t = 0; t < n_times; ++t) {
        CurveRow row;
        row.method = method_names[m];
        row.arm = arm;
        row.time = times[t];
        row.replicates = n_success;
        double sum = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
          if (!failed[r]) sum += slots[r * per_rep + (m * 2 + arm) * n_times + t];
        }
        row.mean_survival = sum / n_success;
        table.rows.push_back(std::move(row));
      }
    }
  }

  std::vector<double> truth =
      true_survival_curve(config.base, times, config.truth_draws, substream(config.base_seed, 2));
  for (int arm = 0; arm <= 1; ++arm) {
    for (std::size_t t = 0; t < n_times; ++t) {
      CurveRow row;
      row.method = "truth";
      row.arm = arm;
      row.time = times[t];
      row.mean_survival = truth[t];
      row.replicates = 0;
      table.rows.push_back(std::move(row));
    }
  }

  std::stable_sort(table.rows.begin(), table.rows.end(), [](const CurveRow& a, const CurveRow& b) {
    if (a.method != b.method) return a.method < b.method;
    if (a.arm != b.arm) return a.arm < b.arm;
    return a.time < b.time;
  });
  return table;
}

std::vector<double> true_survival_curve(const DgpConfig& config, const std::vector<double>& times,
                                        long draws, std::uint64_t seed) {
  config.validate();
  if (times.empty()) throw ConfigError("timepoints must be nonempty");
  if (draws < 1) throw ConfigError("draws must be at least 1");

  // The event-time signal is one-dimensional: b nu_T'X ~ N(0, (b ||nu_T||)^2).
  double scale;
  if (config.setting == Setting::single_covariate) {
    scale = config.beta_single;
  } else {
    scale = config.b * nu_vectors(config.setting, config.p).first.norm();
  }
  const double beta0 = config.resolved_beta0();

  std::mt19937_64 engine = make_engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> sums(times.size(), 0.0);
  for (long i = 0; i < draws; ++i) {
    const double rate = std::exp(beta0 + scale * normal(engine));
    for (std::size_t t = 0; t < times.size(); ++t) sums[t] += std::exp(-times[t] * rate);
  }
  for (double& s : sums) s /= static_cast<double>(draws);
  return sums;
}

}  // namespace censelect
