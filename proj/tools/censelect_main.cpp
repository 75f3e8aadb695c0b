#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "censelect/cox.hpp"
#include "censelect/errors.hpp"
#include "censelect/io.hpp"
#include "censelect/selection.hpp"
#include "censelect/simulation.hpp"
#include "censelect/survival.hpp"

namespace {

using censelect::ordered_json;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path,
                  "JSON config file, or a manifest from a previous run")
      ->required();
  cmd->add_option("--seed", flags.seed, "override the config seed");
  cmd->add_option("--out", flags.out, "override the config output path");
  cmd->add_option("--jobs", flags.jobs,
                  "worker threads for replicate-parallel commands (results do not depend on it)");
}

ordered_json load_with_overrides(const CommonFlags& flags, const std::string& command) {
  ordered_json raw = censelect::load_config_json(flags.config_path, command);
  if (!raw.is_object()) throw censelect::ConfigError("config must be a JSON object");
  if (flags.seed) raw["seed"] = *flags.seed;
  if (flags.out) raw["out"] = *flags.out;
  return raw;
}

void require_out(const std::string& out) {
  if (out.empty())
    throw censelect::ConfigError("no output path: set 'out' in the config or pass --out");
}

void run_simulate(const CommonFlags& flags) {
  censelect::SimulateCommand cmd = censelect::parse_simulate(load_with_overrides(flags, "simulate"));
  require_out(cmd.out);
  censelect::Dataset data = censelect::simulate(cmd.dgp);
  censelect::write_dataset_csv(data, cmd.out);
  censelect::write_manifest(cmd.out, "simulate", censelect::simulate_to_json(cmd));
  censelect::log_info("simulate: wrote " + cmd.out);
}

void run_analyze(const CommonFlags& flags) {
  censelect::AnalyzeCommand cmd = censelect::parse_analyze(load_with_overrides(flags, "analyze"));
  require_out(cmd.out);
  censelect::Dataset data = censelect::read_dataset_csv(cmd.data_path);

  ordered_json result;
  result["method"] = cmd.method;
  result["n"] = data.size();
  result["events"] = data.n_events();

  std::optional<censelect::CoxFit> fit_for_curves;
  if (cmd.method == "post_lasso" || cmd.method == "double_selection") {
    censelect::SelectionReport report =
        cmd.method == "post_lasso"
            ? censelect::post_lasso(data, cmd.rule, cmd.folds, cmd.seed, cmd.forced_in)
            : censelect::double_selection(data, cmd.rule, cmd.folds, cmd.seed, cmd.forced_in);
    result.update(censelect::report_to_json(report));
    fit_for_curves = report.fit;
  } else {
    censelect::TestResult test;
    if (cmd.method == "logrank") {
      test = censelect::logrank_test(data);
    } else if (cmd.method == "significance_single") {
      test = censelect::significance_selection_single(data, cmd.alpha_select);
    } else {
      test = censelect::decorrelated_score_test(data, cmd.rule, cmd.folds, cmd.seed);
    }
    result["test"] = censelect::test_to_json(test);
    if (!cmd.timepoints.empty())
      fit_for_curves = censelect::fit_cox(data, test.adjustment_set, true);
  }

  if (!cmd.timepoints.empty() && fit_for_curves) {
    ordered_json curves = ordered_json::array();
    for (int arm = 0; arm <= 1; ++arm) {
      censelect::SurvivalCurve curve =
          censelect::standardized_curves(*fit_for_curves, data, arm, cmd.timepoints);
      ordered_json entry;
      entry["arm"] = arm;
      entry["times"] = curve.times;
      entry["survival"] = curve.probabilities;
      curves.push_back(std::move(entry));
    }
    result["curves"] = std::move(curves);
  }

  censelect::write_text_file(cmd.out, result.dump(2) + "\n");
  censelect::write_manifest(cmd.out, "analyze", censelect::analyze_to_json(cmd));
  censelect::log_info("analyze: wrote " + cmd.out);
}

void run_type1(const CommonFlags& flags) {
  censelect::Type1Command cmd = censelect::parse_type1(load_with_overrides(flags, "type1"));
  require_out(cmd.out);
  censelect::Type1Grid grid = censelect::type1_experiment(cmd.config, flags.jobs);
  censelect::write_text_file(cmd.out, censelect::type1_to_csv(grid));
  censelect::write_manifest(cmd.out, "type1", censelect::type1_to_json(cmd));
  censelect::log_info("type1: wrote " + cmd.out);
}

void run_bias_oracle(const CommonFlags& flags) {
  censelect::BiasOracleCommand cmd =
      censelect::parse_bias_oracle(load_with_overrides(flags, "bias-oracle"));
  require_out(cmd.out);
  censelect::BiasEstimate estimate = censelect::score_bias_oracle(cmd.config);
  ordered_json result;
  result["value"] = estimate.value;
  result["mc_se"] = estimate.mc_se;
  result["t_max"] = cmd.config.resolved_t_max();
  censelect::write_text_file(cmd.out, result.dump(2) + "\n");
  censelect::write_manifest(cmd.out, "bias-oracle", censelect::bias_oracle_to_json(cmd));
  censelect::log_info("bias-oracle: wrote " + cmd.out);
}

void run_curves(const CommonFlags& flags) {
  censelect::CurvesCommand cmd = censelect::parse_curves(load_with_overrides(flags, "curves"));
  require_out(cmd.out);
  censelect::CurveTable table = censelect::curve_experiment(cmd.config, flags.jobs);
  censelect::write_text_file(cmd.out, censelect::curves_to_csv(table));
  censelect::write_manifest(cmd.out, "curves", censelect::curves_to_json(cmd));
  censelect::log_info("curves: wrote " + cmd.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"covariate selection and standardization for censored time-to-event trials"};
  app.require_subcommand(1);

  CommonFlags flags;
  CLI::App* simulate = app.add_subcommand("simulate", "draw one trial dataset to CSV");
  CLI::App* analyze = app.add_subcommand("analyze", "test a treatment effect on a CSV dataset");
  CLI::App* type1 = app.add_subcommand("type1", "rejection-rate grid over a simulated design");
  CLI::App* bias_oracle =
      app.add_subcommand("bias-oracle", "expected unadjusted score under the null");
  CLI::App* curves = app.add_subcommand("curves", "mean survival-curve estimates vs truth");
  for (CLI::App* cmd : {simulate, analyze, type1, bias_oracle, curves}) add_common(cmd, flags);

  simulate->callback([&] { run_simulate(flags); });
  analyze->callback([&] { run_analyze(flags); });
  type1->callback([&] { run_type1(flags); });
  bias_oracle->callback([&] { run_bias_oracle(flags); });
  curves->callback([&] { run_curves(flags); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const censelect::ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const censelect::DataError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return 3;
  } catch (const censelect::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << std::endl;
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
