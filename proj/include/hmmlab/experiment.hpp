#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hmmlab/model.hpp"

namespace hmmlab {

/// Declarative experiment description parsed from a JSON config file.
struct ExperimentConfig {
  std::string command;
  ModelSpec spec;
  std::uint64_t seed = 1;
  int replicates = 20;
  std::vector<long> schedule;
  nlohmann::json options;  // command-specific, already schema-checked
};

/// Schema and semantic diagnostics for a config file; empty means valid.
std::vector<std::string> validate_config_text(const std::string& text);
std::vector<std::string> validate_config_file(const std::string& path);

/// Parses a config or throws ConfigError carrying the first diagnostic.
struct ConfigError : Error { using Error::Error; };
ExperimentConfig parse_config_file(const std::string& path);

struct RunResult {
  int exit_code = 0;        // 0 success, 1 runtime, 2 config
  std::string message;      // human-readable failure or summary
  bool strict_failure = false;
};

/// Executes the experiment and writes the CSV atomically (temp file + rename).
/// Output bytes depend only on (config, seed), not on the parallelism degree.
RunResult run_experiment(const std::string& config_path, const std::string& out_path,
                         int parallelism, bool strict);

}  // namespace hmmlab
