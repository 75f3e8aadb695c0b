#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "censelect/selection.hpp"
#include "censelect/simulation.hpp"
#include "censelect/types.hpp"

namespace censelect {

using ordered_json = nlohmann::ordered_json;

/// Shortest decimal string that round-trips the double exactly.
std::string format_double(double x);

// ---- dataset CSV (header: time,status,treatment,X1,...,Xp) ----
std::string dataset_to_csv(const Dataset& data);
void write_dataset_csv(const Dataset& data, const std::string& path);
Dataset dataset_from_csv(std::istream& in);  // DataError with 1-based line numbers
Dataset read_dataset_csv(const std::string& path);

// ---- command configurations (JSON). Parsers throw ConfigError. ----
struct SimulateCommand {
  DgpConfig dgp;
  std::string out;
};

struct AnalyzeCommand {
  std::string data_path;
  std::string method = "double_selection";  // logrank | post_lasso |
                                            // double_selection |
                                            // significance_single | decorrelated
  LambdaRule rule = LambdaRule::one_se;
  int folds = 20;
  std::uint64_t seed = 0;
  std::vector<std::string> forced_in;
  std::vector<double> timepoints;
  double alpha_select = 0.025;
  std::string out;
};

struct Type1Command {
  Type1Config config;
  std::string out;
};

struct BiasOracleCommand {
  BiasOracleConfig config;
  std::string out;
};

struct CurvesCommand {
  CurveConfig config;
  std::string out;
};

/// Loads the JSON document at `path`. If it is a manifest (has a "config"
/// key), the embedded config object is returned so runs can be reproduced
/// directly from their manifests.
ordered_json load_config_json(const std::string& path, const std::string& expect_command = "");

SimulateCommand parse_simulate(const ordered_json& j);
AnalyzeCommand parse_analyze(const ordered_json& j);
Type1Command parse_type1(const ordered_json& j);
BiasOracleCommand parse_bias_oracle(const ordered_json& j);
CurvesCommand parse_curves(const ordered_json& j);

ordered_json simulate_to_json(const SimulateCommand& c);
ordered_json analyze_to_json(const AnalyzeCommand& c);
ordered_json type1_to_json(const Type1Command& c);
ordered_json bias_oracle_to_json(const BiasOracleCommand& c);
ordered_json curves_to_json(const CurvesCommand& c);

// ---- results ----
std::string type1_to_csv(const Type1Grid& grid);
std::string curves_to_csv(const CurveTable& table);
ordered_json report_to_json(const SelectionReport& report);
ordered_json test_to_json(const TestResult& test);

void write_text_file(const std::string& path, const std::string& content);

/// 64-bit FNV-1a of the canonical config serialization, hex-encoded.
std::string config_hash(const ordered_json& config);

/// Writes `<out>.manifest.json` describing a completed run: command name,
/// resolved config, config hash, seed, library version. Re-running the
/// command with the manifest as --config reproduces the outputs bit-for-bit.
void write_manifest(const std::string& out_path, const std::string& command,
                    const ordered_json& config);

// ---- logging (CENSELECT_LOG = silent | info | debug; default silent) ----
enum class LogLevel { silent = 0, info = 1, debug = 2 };
LogLevel log_level();
void log_info(const std::string& message);
void log_debug(const std::string& message);

}  // namespace censelect
