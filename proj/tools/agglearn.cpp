// Command-line experiment runner: `run` trains per-instance predictors from
// aggregate supervision and prints a metric table; `verify` runs the oracle
// cross-check suite.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "agglearn/agglearn.hpp"

namespace {

int command_run(const std::string& config_path, std::int64_t seed_override,
                const std::string& out_dir) {
  agglearn::ExperimentConfig config;
  try {
    config = agglearn::ExperimentConfig::parse_file(config_path);
    if (seed_override >= 0) config.seed = static_cast<std::uint64_t>(seed_override);
  } catch (const agglearn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  try {
    const agglearn::ExperimentResult result =
        agglearn::run_experiment(config, std::filesystem::path(out_dir));
    std::cout << result.table();
    return 0;
  } catch (const agglearn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const agglearn::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const agglearn::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

int command_verify(std::uint64_t seed) {
  const auto checks = agglearn::run_verify(seed);
  bool all_passed = true;
  char buf[256];
  for (const auto& check : checks) {
    std::snprintf(buf, sizeof(buf), "%s %s: max_error=%.3e tolerance=%.0e\n",
                  check.passed ? "PASS" : "FAIL", check.name.c_str(), check.max_error,
                  check.tolerance);
    std::cout << buf;
    all_passed = all_passed && check.passed;
  }
  return all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maximum-likelihood learning from aggregate observations"};
  app.require_subcommand(1);

  std::string config_path;
  std::int64_t seed_override = -1;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "Run an experiment described by a config file");
  run->add_option("--config", config_path, "Path to a key = value config file")->required();
  run->add_option("--seed", seed_override, "Override the config seed");
  run->add_option("--out", out_dir, "Directory for per-trial predictions and metadata");

  std::uint64_t verify_seed = 20240501;
  auto* verify = app.add_subcommand("verify", "Run the oracle cross-check suite");
  verify->add_option("--seed", verify_seed, "Seed for the randomized checks");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return command_run(config_path, seed_override, out_dir);
  return command_verify(verify_seed);
}
