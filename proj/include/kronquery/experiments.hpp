#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace kronquery {

/// One experiment invocation: the named experiment, the shared numeric knobs,
/// and the experiment-specific params object (validated strictly per runner).
struct ExperimentConfig {
  std::string experiment;
  int n = 2;
  int q_lo = 1;
  int q_hi = 1;
  long trials = 1000;
  std::uint64_t seed = 0;
  int threads = 1;          // from --threads / KRONQUERY_THREADS, never the file
  std::string out;          // empty -> stdout
  bool timestamp = true;    // --no-timestamp drops the generated-at comment
  nlohmann::json params = nlohmann::json::object();
};

/// Strict schema {experiment, n, q | q_range:[lo,hi], trials, seed, params,
/// out}; every offending key is listed in one ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig config_from_file(const std::string& path);

/// Runs the named experiment deterministically from the seed and writes CSV
/// (with a '#'-prefixed metadata block documenting every metric column) to
/// cfg.out or stdout. Returns the human-readable summary lines.
std::vector<std::string> run_experiment(const ExperimentConfig& cfg);

std::vector<std::string> experiment_names();

/// Locale-independent shortest round-trip formatting used for all CSV output.
std::string csv_format(double v);
std::string csv_format(long long v);

}  // namespace kronquery
