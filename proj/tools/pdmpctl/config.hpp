#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdmp/model.hpp"
#include "pdmp/policy.hpp"
#include "pdmp/simulate.hpp"
#include "pdmp/solver.hpp"
#include "pdmp/value.hpp"

namespace pdmpctl {

/// Bad configuration text or content. `where` is "line L, column C" for
/// syntax errors and a JSON pointer such as "/abel/n_paths" otherwise.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string where, const std::string& message)
      : std::runtime_error(where + ": " + message), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

enum class ExperimentKind { kAbel, kCesaro, kTauberian, kSolve, kStepStudy, kCoupling, kNonexpCheck, kOccupation, kValidate };

std::string experiment_name(ExperimentKind kind);

struct StartPoint {
  pdmp::ModeId mode = 0;
  pdmp::StateVec x;
};

struct ControlLevels {
  std::vector<std::vector<double>> u;
  std::vector<std::vector<double>> v;
};

struct AbelBlock {
  std::vector<double> deltas;
  std::size_t n_paths = 0;
  StartPoint start;
  pdmp::Policy policy = pdmp::Policy::constant({});
  std::optional<pdmp::FamilySpec> family;
  std::size_t trajectories = 0;
};

struct CesaroBlock {
  std::vector<double> horizons;
  std::size_t n_paths = 0;
  StartPoint start;
  pdmp::Policy policy = pdmp::Policy::constant({});
  std::optional<pdmp::FamilySpec> family;
  std::size_t trajectories = 0;
};

struct TauberianBlock {
  pdmp::FamilySpec family;
  std::vector<pdmp::Probe> probes;
  std::vector<double> deltas;
  std::size_t n_paths = 0;
};

struct CrossCheck {
  std::vector<pdmp::Probe> probes;
  std::size_t n_paths = 0;
};

struct SolveBlock {
  double delta = 0.0;
  unsigned n = 1;
  std::vector<std::size_t> nodes;
  ControlLevels controls;
  double tolerance = 1e-8;
  pdmp::BellmanScheme scheme = pdmp::BellmanScheme::kTimeStep;
  double max_substep = 0.1;
  std::optional<CrossCheck> cross_check;
};

struct StepStudyBlock {
  double delta = 0.0;
  std::vector<unsigned> n_list;
  std::vector<std::size_t> nodes;
  ControlLevels controls;
  double tolerance = 1e-8;
  pdmp::BellmanScheme scheme = pdmp::BellmanScheme::kTimeStep;
  double max_substep = 0.1;
};

struct CouplingBlock {
  std::vector<unsigned> n_list;
  double delta = 0.0;
  std::size_t n_paths = 0;
  StartPoint start;
  pdmp::StateVec y0;
  pdmp::Policy policy = pdmp::Policy::constant({});
  std::size_t v_grid_points = 33;
  double tolerance = 1e-9;
  double k0 = 0.0;
};

struct NonexpBlock {
  std::size_t n_samples = 0;
  std::size_t v_grid_points = 33;
  double tolerance = 1e-9;
};

struct CoupledOccupation {
  pdmp::StateVec y0;
  unsigned n = 1;
};

struct OccupationBlock {
  double delta = 0.0;
  std::size_t n_paths = 0;
  StartPoint start;
  pdmp::Policy policy = pdmp::Policy::constant({});
  std::size_t max_atoms = 1'000'000;
  bool write_atoms = false;
  double sigma = 3.0;
  std::optional<CoupledOccupation> coupled;
};

struct ValidateBlock {
  std::size_t n_samples = 10'000;
};

struct ModelSpec {
  std::string name;
  nlohmann::json params = nlohmann::json::object();
  nlohmann::json cost = nlohmann::json::object();
};

struct ExperimentConfig {
  ModelSpec model;
  ExperimentKind experiment = ExperimentKind::kValidate;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  pdmp::SimulationOptions simulation;
  double bias = 1e-4;

  std::optional<AbelBlock> abel;
  std::optional<CesaroBlock> cesaro;
  std::optional<TauberianBlock> tauberian;
  std::optional<SolveBlock> solve;
  std::optional<StepStudyBlock> step_study;
  std::optional<CouplingBlock> coupling;
  std::optional<NonexpBlock> nonexp_check;
  std::optional<OccupationBlock> occupation;
  std::optional<ValidateBlock> validate;

  /// The input with every default filled in, as echoed to manifest.json.
  nlohmann::json resolved;
};

pdmp::ModelPtr build_model(const ModelSpec& spec);

/// Parses and validates; all failures are ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Replaces the seed (and its echo in `resolved`).
void override_seed(ExperimentConfig& config, std::uint64_t seed);

}  // namespace pdmpctl
