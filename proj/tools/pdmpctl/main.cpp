#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "config.hpp"
#include "experiments.hpp"
#include "pdmp/parallel.hpp"

namespace {

constexpr int kPass = 0;
constexpr int kAssertionFailed = 1;
constexpr int kParseError = 2;
constexpr int kRuntimeError = 3;

constexpr const char* kVersion = "0.1.0";

std::uint64_t seed_from_env(const char* text) {
  const std::string s(text);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used, 10);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || s.front() == '-') {
    throw pdmpctl::ConfigError("PDMP_SEED_OVERRIDE", "expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

int run(const std::string& config_path, const std::string& output_dir, std::size_t threads) {
  pdmpctl::ExperimentConfig cfg;
  try {
    cfg = pdmpctl::load_config(config_path);
    if (const char* env = std::getenv("PDMP_SEED_OVERRIDE")) pdmpctl::override_seed(cfg, seed_from_env(env));
  } catch (const pdmpctl::ConfigError& e) {
    std::cerr << "pdmpctl: config error in " << config_path << ": " << e.what() << '\n';
    return kParseError;
  }
  const std::filesystem::path dir = output_dir.empty() ? cfg.output_dir : std::filesystem::path(output_dir);

  const auto start = std::chrono::steady_clock::now();
  pdmpctl::RunOutcome outcome;
  try {
    outcome = pdmpctl::run_experiment(cfg, dir, threads);
  } catch (const std::exception& e) {
    std::cerr << "pdmpctl: " << pdmpctl::experiment_name(cfg.experiment) << " failed: " << e.what() << '\n';
    return kRuntimeError;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  nlohmann::json manifest;
  manifest["tool"] = "pdmpctl";
  manifest["version"] = kVersion;
  manifest["config"] = cfg.resolved;
  manifest["threads"] = threads;
  manifest["wall_time_seconds"] = wall;
  manifest["files"] = outcome.files;
  manifest["passed"] = outcome.passed();
  {
    std::ofstream m(dir / "manifest.json");
    m << manifest.dump(2) << '\n';
  }
  const std::string summary = pdmpctl::format_summary(cfg, outcome);
  {
    std::ofstream s(dir / "summary.txt");
    s << summary;
  }
  std::cout << summary;
  return outcome.passed() ? kPass : kAssertionFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate and control switch-type piecewise deterministic Markov processes"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  std::size_t threads = pdmp::default_thread_count();
  CLI::App* cmd = app.add_subcommand("run", "Run the experiment described by a JSON config");
  cmd->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--output-dir", output_dir, "Artifact directory; overrides output_dir in the config");
  cmd->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kParseError;
  }
  return run(config_path, output_dir, threads);
}
