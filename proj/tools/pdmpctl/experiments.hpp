#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"

namespace pdmpctl {

struct Assertion {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct RunOutcome {
  std::vector<Assertion> assertions;
  std::vector<std::string> files;  ///< written into the output directory, in order

  bool passed() const;
};

/// Runs the configured experiment, writing its CSVs into `output_dir`
/// (created if needed). Library exceptions propagate.
RunOutcome run_experiment(const ExperimentConfig& config, const std::filesystem::path& output_dir,
                          std::size_t threads);

/// summary.txt body: one "PASS|FAIL name: detail" line per assertion.
std::string format_summary(const ExperimentConfig& config, const RunOutcome& outcome);

}  // namespace pdmpctl
