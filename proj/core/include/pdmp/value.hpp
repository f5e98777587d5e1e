#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "pdmp/model.hpp"
#include "pdmp/policy.hpp"
#include "pdmp/simulate.hpp"

namespace pdmp {

struct ValueEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
  double truncation_horizon = 0.0;
  double truncation_bias_bound = 0.0;  ///< 2 h_max e^{-delta C} for Abel means, 0 for Cesaro means
};

struct EstimatorOptions {
  SimulationOptions simulation;
  std::size_t threads = 1;     ///< 0 means hardware concurrency
  double bias = 1e-4;          ///< requested bound on the Abel truncation bias
  double horizon_cap = 0.0;    ///< explicit Abel horizon; 0 picks the smallest one meeting `bias`
  double max_horizon = 1e4;    ///< refuse automatic horizons beyond this
};

/// Smallest C with h_max e^{-delta C} <= bias.
double abel_horizon(double h_max, double delta, double bias);

/// Mean and standard error of per-path samples, reduced in index order.
ValueEstimate summarize(const std::vector<double>& samples);

/// delta E int_0^C e^{-delta t} h dt per path, composite Simpson on the
/// RK4 substeps, path i drawing from stream (seed, i). The tail beyond C
/// is estimated by e^{-delta C} h(Gamma_C, X_C), exact for constant costs;
/// its error is at most 2 h_max e^{-delta C}.
ValueEstimate estimate_abel(const Model& model, const Policy& policy, ModeId mode0, const StateVec& x0,
                            double delta, std::size_t n_paths, std::uint64_t seed,
                            const EstimatorOptions& options = {});

/// (1/T) E int_0^T h dt with the same quadrature.
ValueEstimate estimate_cesaro(const Model& model, const Policy& policy, ModeId mode0, const StateVec& x0, double T,
                              std::size_t n_paths, std::uint64_t seed, const EstimatorOptions& options = {});

/// Per-path Abel samples (with the tail term), for callers that need more
/// than the mean.
std::vector<double> abel_samples(const Model& model, const Policy& policy, ModeId mode0, const StateVec& x0,
                                 double delta, double horizon, std::size_t n_paths, std::uint64_t seed,
                                 const EstimatorOptions& options);

struct Objective {
  enum class Kind { kAbel, kCesaro };
  Kind kind = Kind::kAbel;
  double parameter = 1.0;  ///< delta for Abel, T for Cesaro

  static Objective abel(double delta) { return {Kind::kAbel, delta}; }
  static Objective cesaro(double T) { return {Kind::kCesaro, T}; }
};

struct OptimizationResult {
  std::size_t best_index = 0;
  Policy best_policy = Policy::constant({});
  ValueEstimate best;
  std::vector<ValueEstimate> table;  ///< one estimate per family member, in enumeration order
};

/// Evaluates every member of the family on common random numbers and
/// returns the smallest estimated mean; ties go to the earlier member.
OptimizationResult optimize_value(const Model& model, const FamilySpec& family, ModeId mode0, const StateVec& x0,
                                  Objective objective, std::size_t n_paths, std::uint64_t seed,
                                  const EstimatorOptions& options = {});

struct Probe {
  ModeId mode = 0;
  StateVec x;
};

struct TauberianProbeResult {
  Probe probe;
  OptimizationResult abel;
  OptimizationResult cesaro;
  double gap = 0.0;
  double gap_std_error = 0.0;
};

struct TauberianRow {
  double delta = 0.0;
  double T = 0.0;
  double d = 0.0;            ///< max over probes of |v^delta - V_{1/delta}|
  double d_std_error = 0.0;  ///< standard error attached to the maximizing probe
  std::size_t argmax_probe = 0;
  std::vector<TauberianProbeResult> probes;
};

/// For each delta (strictly decreasing), optimized Abel and Cesaro values
/// with T = 1/delta at every probe, and their sup-distance.
std::vector<TauberianRow> tauberian_experiment(const Model& model, const FamilySpec& family,
                                               const std::vector<Probe>& probes, const std::vector<double>& deltas,
                                               std::size_t n_paths, std::uint64_t seed,
                                               const EstimatorOptions& options = {});

}  // namespace pdmp
