#include "censelect/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>

#include "censelect/cox.hpp"
#include "censelect/errors.hpp"

namespace censelect {

namespace {

constexpr const char* kVersion = "0.1.0";

std::string line_tag(int line_no) { return "line " + std::to_string(line_no) + ": "; }

std::string strip_cr(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    std::string field = line.substr(start, comma == std::string::npos ? comma : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.erase(0, 1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.pop_back();
    fields.push_back(std::move(field));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

double parse_double_field(const std::string& field, int line_no, const std::string& what) {
  double out = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto result = std::from_chars(begin, end, out);
  if (result.ec != std::errc() || result.ptr != end)
    throw DataError(line_tag(line_no) + "invalid number for " + what + ": '" + field + "'");
  return out;
}

int parse_binary_field(const std::string& field, int line_no, const std::string& what) {
  const double v = parse_double_field(field, line_no, what);
  if (v != 0.0 && v != 1.0)
    throw DataError(line_tag(line_no) + what + " must be 0 or 1, got '" + field + "'");
  return v == 1.0 ? 1 : 0;
}

void require_csv_safe(const std::string& name) {
  if (name.find_first_of(",\"\r\n") != std::string::npos)
    throw DataError("covariate name contains a CSV delimiter: " + name);
}

// ---- typed JSON accessors; all throw ConfigError on shape mismatches ----

void check_fields(const ordered_json& j, std::initializer_list<const char*> allowed,
                  const std::string& context) {
  if (!j.is_object()) throw ConfigError(context + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* name : allowed) {
      if (it.key() == name) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError(context + ": unknown field '" + it.key() + "'");
  }
}

bool has(const ordered_json& j, const char* key) { return j.contains(key) && !j.at(key).is_null(); }

double get_double(const ordered_json& j, const char* key, double fallback) {
  if (!has(j, key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(std::string(key) + " must be a number");
  return v.get<double>();
}

std::optional<double> get_optional_double(const ordered_json& j, const char* key) {
  if (!has(j, key)) return std::nullopt;
  return get_double(j, key, 0.0);
}

int get_int(const ordered_json& j, const char* key, int fallback) {
  if (!has(j, key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(std::string(key) + " must be an integer");
  return v.get<int>();
}

long get_long(const ordered_json& j, const char* key, long fallback) {
  if (!has(j, key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(std::string(key) + " must be an integer");
  return static_cast<long>(v.get<long long>());
}

std::uint64_t get_seed(const ordered_json& j, const char* key, std::uint64_t fallback) {
  if (!has(j, key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0)
    return static_cast<std::uint64_t>(v.get<long long>());
  throw ConfigError(std::string(key) + " must be a nonnegative integer");
}

std::string get_string(const ordered_json& j, const char* key, const std::string& fallback) {
  if (!has(j, key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_string()) throw ConfigError(std::string(key) + " must be a string");
  return v.get<std::string>();
}

std::vector<double> get_double_list(const ordered_json& j, const char* key,
                                    std::vector<double> fallback) {
  if (!has(j, key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) throw ConfigError(std::string(key) + " must be a number or array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(std::string(key) + " must contain only numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<std::string> get_string_list(const ordered_json& j, const char* key,
                                         std::vector<std::string> fallback) {
  if (!has(j, key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) throw ConfigError(std::string(key) + " must be a string or array of strings");
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_string()) throw ConfigError(std::string(key) + " must contain only strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

constexpr std::initializer_list<const char*> kDgpFields = {
    "n", "p", "setting", "b", "g", "gamma1", "beta0", "gamma0", "beta", "gamma2", "seed"};

DgpConfig parse_dgp(const ordered_json& j, const std::string& context) {
  check_fields(j, kDgpFields, context);
  DgpConfig c;
  c.setting = setting_from_string(get_string(j, "setting", "S1"));
  c.n = get_int(j, "n", 400);
  c.p = get_int(j, "p", c.setting == Setting::single_covariate ? 1 : 30);
  c.b = get_double(j, "b", 0.0);
  c.g = get_double(j, "g", 0.0);
  c.gamma1 = get_double(j, "gamma1", 0.0);
  c.beta0 = get_optional_double(j, "beta0");
  c.gamma0 = get_optional_double(j, "gamma0");
  c.beta_single = get_double(j, "beta", 0.0);
  c.gamma2_single = get_double(j, "gamma2", 0.0);
  c.seed = get_seed(j, "seed", 0);
  c.validate();
  return c;
}

ordered_json dgp_to_json(const DgpConfig& c) {
  ordered_json j;
  j["n"] = c.n;
  j["p"] = c.p;
  j["setting"] = to_string(c.setting);
  j["b"] = c.b;
  j["g"] = c.g;
  j["gamma1"] = c.gamma1;
  j["beta0"] = c.resolved_beta0();
  j["gamma0"] = c.resolved_gamma0();
  j["beta"] = c.beta_single;
  j["gamma2"] = c.gamma2_single;
  j["seed"] = c.seed;
  return j;
}

ordered_json coefficient_table(const CoxFit& fit) {
  ordered_json table = ordered_json::array();
  const std::vector<std::string> names = fit.term_names();
  for (int i = 0; i < fit.coefficients.size(); ++i) {
    const double estimate = fit.coefficients[i];
    const double se = std::sqrt(fit.robust_variance(i, i));
    ordered_json row;
    row["term"] = names[i];
    row["estimate"] = estimate;
    row["robust_se"] = se;
    const double z = estimate / se;
    row["z"] = z;
    row["p"] = std::isfinite(z) ? two_sided_p(z) : 0.0;
    table.push_back(std::move(row));
  }
  return table;
}

}  // namespace

std::string format_double(double x) {
  std::array<char, 32> buffer;
  auto result = std::to_chars(buffer.data(), buffer.data() + buffer.size(), x);
  return std::string(buffer.data(), result.ptr);
}

std::string dataset_to_csv(const Dataset& data) {
  data.validate();
  std::string out = "time,status,treatment";
  for (const auto& name : data.covariate_names) {
    require_csv_safe(name);
    out += ',';
    out += name;
  }
  out += '\n';
  for (const auto& row : data.rows) {
    out += format_double(row.time);
    out += ',';
    out += std::to_string(row.status);
    out += ',';
    out += std::to_string(row.treatment);
    for (double v : row.covariates) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  write_text_file(path, dataset_to_csv(data));
}

Dataset dataset_from_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("line 1: missing header");
  line = strip_cr(line);
  std::vector<std::string> fields = split_csv_line(line);
  if (fields.size() < 3 || fields[0] != "time" || fields[1] != "status" ||
      fields[2] != "treatment")
    throw DataError("line 1: header must start with time,status,treatment");

  Dataset data;
  data.covariate_names.assign(fields.begin() + 3, fields.end());
  std::set<std::string> seen;
  for (const auto& name : data.covariate_names) {
    if (name.empty()) throw DataError("line 1: empty covariate name");
    if (!seen.insert(name).second) throw DataError("line 1: duplicate covariate name: " + name);
  }

  const std::size_t expected = 3 + data.covariate_names.size();
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    fields = split_csv_line(line);
    if (fields.size() != expected)
      throw DataError(line_tag(line_no) + "expected " + std::to_string(expected) +
                      " fields, got " + std::to_string(fields.size()));
    SurvivalRow row;
    row.time = parse_double_field(fields[0], line_no, "time");
    if (!(row.time > 0.0) || !std::isfinite(row.time))
      throw DataError(line_tag(line_no) + "time must be positive and finite");
    row.status = parse_binary_field(fields[1], line_no, "status");
    row.treatment = parse_binary_field(fields[2], line_no, "treatment");
    row.covariates.reserve(data.covariate_names.size());
    for (std::size_t jcol = 0; jcol < data.covariate_names.size(); ++jcol) {
      const double v =
          parse_double_field(fields[3 + jcol], line_no, data.covariate_names[jcol]);
      if (!std::isfinite(v))
        throw DataError(line_tag(line_no) + "non-finite value for " +
                        data.covariate_names[jcol]);
      row.covariates.push_back(v);
    }
    data.rows.push_back(std::move(row));
  }
  data.validate();
  return data;
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open data file: " + path);
  return dataset_from_csv(in);
}

ordered_json load_config_json(const std::string& path, const std::string& expect_command) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
  if (j.is_object() && j.contains("config") && j.contains("command")) {
    const std::string command = j.at("command").is_string() ? j["command"].get<std::string>() : "";
    if (!expect_command.empty() && command != expect_command)
      throw ConfigError("manifest was produced by command '" + command + "', expected '" +
                        expect_command + "'");
    return j.at("config");
  }
  return j;
}

SimulateCommand parse_simulate(const ordered_json& j) {
  ordered_json dgp = j;
  SimulateCommand c;
  if (dgp.is_object() && dgp.contains("out")) {
    c.out = get_string(dgp, "out", "");
    dgp.erase("out");
  }
  c.dgp = parse_dgp(dgp, "simulate");
  return c;
}

AnalyzeCommand parse_analyze(const ordered_json& j) {
  check_fields(j,
               {"data", "method", "lambda_rule", "folds", "seed", "forced_in", "timepoints",
                "alpha_select", "out"},
               "analyze");
  AnalyzeCommand c;
  c.data_path = get_string(j, "data", "");
  if (c.data_path.empty()) throw ConfigError("analyze: 'data' is required");
  c.method = get_string(j, "method", "double_selection");
  const std::set<std::string> known = {"logrank", "post_lasso", "double_selection",
                                       "significance_single", "decorrelated"};
  if (!known.count(c.method)) throw ConfigError("unknown method: " + c.method);
  c.rule = lambda_rule_from_string(get_string(j, "lambda_rule", "1se"));
  c.folds = get_int(j, "folds", 20);
  c.seed = get_seed(j, "seed", 0);
  c.forced_in = get_string_list(j, "forced_in", {});
  c.timepoints = get_double_list(j, "timepoints", {});
  c.alpha_select = get_double(j, "alpha_select", 0.025);
  c.out = get_string(j, "out", "");
  return c;
}

Type1Command parse_type1(const ordered_json& j) {
  check_fields(j,
               {"dgp", "axis1", "axis2", "gamma1", "replicates", "level", "methods", "folds",
                "alpha_select", "seed", "out"},
               "type1");
  Type1Command c;
  c.config.base = parse_dgp(j.contains("dgp") ? j.at("dgp") : ordered_json::object(), "type1.dgp");
  c.config.axis1 = get_double_list(j, "axis1", {0.0});
  c.config.axis2 = get_double_list(j, "axis2", {0.0});
  c.config.gamma1_values = get_double_list(j, "gamma1", {0.0});
  c.config.replicates = get_int(j, "replicates", 1000);
  c.config.level = get_double(j, "level", 0.05);
  c.config.methods = get_string_list(j, "methods", {"logrank"});
  c.config.folds = get_int(j, "folds", 20);
  c.config.alpha_select = get_double(j, "alpha_select", 0.025);
  c.config.base_seed = get_seed(j, "seed", 0);
  c.config.validate();
  c.out = get_string(j, "out", "");
  return c;
}

BiasOracleCommand parse_bias_oracle(const ordered_json& j) {
  check_fields(j,
               {"beta", "gamma1", "gamma2", "beta0", "gamma0", "mc_draws", "t_max", "t_steps",
                "seed", "out"},
               "bias-oracle");
  BiasOracleCommand c;
  c.config.beta = get_double(j, "beta", 0.0);
  c.config.gamma1 = get_double(j, "gamma1", 0.0);
  c.config.gamma2 = get_double(j, "gamma2", 0.0);
  c.config.beta0 = get_double(j, "beta0", 0.0);
  c.config.gamma0 = get_double(j, "gamma0", 0.0);
  c.config.mc_draws = get_long(j, "mc_draws", 100000);
  c.config.t_max = get_double(j, "t_max", 0.0);
  c.config.t_steps = get_int(j, "t_steps", 2000);
  c.config.seed = get_seed(j, "seed", 0);
  c.config.validate();
  c.out = get_string(j, "out", "");
  return c;
}

CurvesCommand parse_curves(const ordered_json& j) {
  check_fields(j, {"dgp", "replicates", "timepoints", "folds", "seed", "truth_draws", "out"},
               "curves");
  CurvesCommand c;
  c.config.base = parse_dgp(j.contains("dgp") ? j.at("dgp") : ordered_json::object(), "curves.dgp");
  std::vector<double> default_times;
  for (int k = 0; k <= 12; ++k) default_times.push_back(0.5 * k);
  c.config.replicates = get_int(j, "replicates", 200);
  c.config.timepoints = get_double_list(j, "timepoints", default_times);
  c.config.folds = get_int(j, "folds", 20);
  c.config.base_seed = get_seed(j, "seed", 0);
  c.config.truth_draws = get_long(j, "truth_draws", 1000000);
  c.config.validate();
  c.out = get_string(j, "out", "");
  return c;
}

ordered_json simulate_to_json(const SimulateCommand& c) {
  ordered_json j = dgp_to_json(c.dgp);
  j["out"] = c.out;
  return j;
}

ordered_json analyze_to_json(const AnalyzeCommand& c) {
  ordered_json j;
  j["data"] = c.data_path;
  j["method"] = c.method;
  j["lambda_rule"] = to_string(c.rule);
  j["folds"] = c.folds;
  j["seed"] = c.seed;
  j["forced_in"] = c.forced_in;
  j["timepoints"] = c.timepoints;
  j["alpha_select"] = c.alpha_select;
  j["out"] = c.out;
  return j;
}

ordered_json type1_to_json(const Type1Command& c) {
  ordered_json j;
  j["dgp"] = dgp_to_json(c.config.base);
  j["axis1"] = c.config.axis1;
  j["axis2"] = c.config.axis2;
  j["gamma1"] = c.config.gamma1_values;
  j["replicates"] = c.config.replicates;
  j["level"] = c.config.level;
  j["methods"] = c.config.methods;
  j["folds"] = c.config.folds;
  j["alpha_select"] = c.config.alpha_select;
  j["seed"] = c.config.base_seed;
  j["out"] = c.out;
  return j;
}

ordered_json bias_oracle_to_json(const BiasOracleCommand& c) {
  ordered_json j;
  j["beta"] = c.config.beta;
  j["gamma1"] = c.config.gamma1;
  j["gamma2"] = c.config.gamma2;
  j["beta0"] = c.config.beta0;
  j["gamma0"] = c.config.gamma0;
  j["mc_draws"] = c.config.mc_draws;
  j["t_max"] = c.config.resolved_t_max();
  j["t_steps"] = c.config.t_steps;
  j["seed"] = c.config.seed;
  j["out"] = c.out;
  return j;
}

ordered_json curves_to_json(const CurvesCommand& c) {
  ordered_json j;
  j["dgp"] = dgp_to_json(c.config.base);
  j["replicates"] = c.config.replicates;
  j["timepoints"] = c.config.timepoints;
  j["folds"] = c.config.folds;
  j["seed"] = c.config.base_seed;
  j["truth_draws"] = c.config.truth_draws;
  j["out"] = c.out;
  return j;
}

std::string type1_to_csv(const Type1Grid& grid) {
  std::string out = "gamma1," + grid.axis1_name + "," + grid.axis2_name +
                    ",method,replicates,rejections,errors,rate\n";
  for (const auto& row : grid.rows) {
    const int used = row.replicates - row.errors;
    const double rate = used > 0 ? static_cast<double>(row.rejections) / used
                                 : std::numeric_limits<double>::quiet_NaN();
    out += format_double(row.gamma1);
    out += ',';
    out += format_double(row.axis1);
    out += ',';
    out += format_double(row.axis2);
    out += ',';
    out += row.method;
    out += ',';
    out += std::to_string(row.replicates);
    out += ',';
    out += std::to_string(row.rejections);
    out += ',';
    out += std::to_string(row.errors);
    out += ',';
    out += format_double(rate);
    out += '\n';
  }
  return out;
}

std::string curves_to_csv(const CurveTable& table) {
  std::string out = "method,arm,time,mean_survival,replicates\n";
  for (const auto& row : table.rows) {
    out += row.method;
    out += ',';
    out += std::to_string(row.arm);
    out += ',';
    out += format_double(row.time);
    out += ',';
    out += format_double(row.mean_survival);
    out += ',';
    out += std::to_string(row.replicates);
    out += '\n';
  }
  return out;
}

ordered_json report_to_json(const SelectionReport& report) {
  ordered_json j;
  j["lambda_rule"] = to_string(report.lambda_rule);
  j["lambda_survival"] = report.lambda_survival;
  if (report.lambda_censoring)
    j["lambda_censoring"] = *report.lambda_censoring;
  else
    j["lambda_censoring"] = nullptr;
  j["survival_support"] = report.survival_support;
  j["censoring_support"] = report.censoring_support;
  j["final_adjustment_set"] = report.final_adjustment_set;
  j["test"] = test_to_json(report.test);
  j["coefficients"] = coefficient_table(report.fit);
  return j;
}

ordered_json test_to_json(const TestResult& test) {
  ordered_json j;
  j["method"] = to_string(test.method);
  j["statistic"] = test.statistic;
  j["score"] = test.score;
  j["variance"] = test.variance;
  j["p_value"] = test.p_value;
  j["adjustment_set"] = test.adjustment_set;
  return j;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << content;
  if (!out) throw DataError("write failed: " + path);
}

std::string config_hash(const ordered_json& config) {
  const std::string text = config.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

void write_manifest(const std::string& out_path, const std::string& command,
                    const ordered_json& config) {
  ordered_json manifest;
  manifest["command"] = command;
  manifest["config_hash"] = config_hash(config);
  if (config.is_object() && config.contains("seed")) manifest["seed"] = config.at("seed");
  manifest["version"] = kVersion;
  manifest["config"] = config;
  write_text_file(out_path + ".manifest.json", manifest.dump(2) + "\n");
}

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("CENSELECT_LOG");
    if (!env) return LogLevel::silent;
    const std::string value(env);
    if (value == "debug") return LogLevel::debug;
    if (value == "info") return LogLevel::info;
    return LogLevel::silent;
  }();
  return level;
}

namespace {
void log_line(const std::string& message) {
  static std::mutex log_mutex;
  std::lock_guard<std::mutex> lock(log_mutex);
  std::cerr << "[censelect] " << message << std::endl;
}
}  // namespace

void log_info(const std::string& message) {
  if (static_cast<int>(log_level()) >= static_cast<int>(LogLevel::info)) log_line(message);
}

void log_debug(const std::string& message) {
  if (static_cast<int>(log_level()) >= static_cast<int>(LogLevel::debug)) log_line(message);
}

}  // namespace censelect
