#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hmmlab/experiment.hpp"

namespace {

int default_parallelism() {
  if (const char* env = std::getenv("LAB_DEFAULT_PARALLELISM")) {
    const int value = std::atoi(env);
    if (value >= 1) return value;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for hidden Markov model likelihood experiments"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  int parallelism = default_parallelism();
  bool strict = false;

  auto* run = app.add_subcommand("run", "Run an experiment config and write a CSV report");
  run->add_option("--config", config_path, "JSON experiment config")->required();
  run->add_option("--out", out_path, "output CSV path")->required();
  run->add_option("--parallelism", parallelism, "worker count (default from LAB_DEFAULT_PARALLELISM)");
  run->add_flag("--strict", strict, "fail on assumption-report hard failures");

  auto* validate = app.add_subcommand("validate", "Check a config against the schema");
  validate->add_option("--config", config_path, "JSON experiment config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (validate->parsed()) {
    const auto diags = hmmlab::validate_config_file(config_path);
    for (const auto& d : diags) std::cout << d << "\n";
    return diags.empty() ? 0 : 2;
  }

  const hmmlab::RunResult result =
      hmmlab::run_experiment(config_path, out_path, parallelism, strict);
  if (result.exit_code == 0)
    std::cout << result.message << "\n";
  else
    std::cerr << "error: " << result.message << "\n";
  return result.exit_code;
}
