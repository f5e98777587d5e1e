#pragma once

#include <cstddef>
#include <cstdint>
#include <algorithm>
#include <iosfwd>
#include <limits>
#include <vector>

#include "pdmp/model.hpp"
#include "pdmp/occupation.hpp"
#include "pdmp/policy.hpp"
#include "pdmp/simulate.hpp"
#include "pdmp/value.hpp"

namespace pdmp {

/// The three quantities a response control w must keep <= 0:
///   flow: <f(x, u, v) - f(y, u, w), x - y>
///   jump: max over reachable theta of |x + g(x, u, v) - y - g(y, u, w)| - |x - y|
///   cost: |h(x, u, v) - h(y, u, w)| - Lip(h) |x - y|
struct Defect {
  double flow = 0.0;
  double jump = 0.0;
  double cost = 0.0;
  double max() const { return std::max({flow, jump, cost}); }
};

Defect selection_defect(const Model& model, ModeId mode, const StateVec& x, const StateVec& y, const ControlVec& u,
                        const ControlVec& v, const ControlVec& w);

struct Selection {
  ControlVec w;
  Defect defect;
  bool feasible = false;
};

/// Picks w from the candidates [v, v_grid...] with the smallest max
/// defect, taking the first candidate within 1e-12 of the minimum. Putting
/// v first keeps Y on X's control whenever that is already optimal, so
/// equal starts stay equal.
Selection select_w_hat(const Model& model, ModeId mode, const StateVec& x, const StateVec& y, const ControlVec& u,
                       const ControlVec& v, const std::vector<ControlVec>& v_grid, double tolerance = 1e-9);

/// Uniform grid with `points_per_dim` levels per coordinate of V.
std::vector<ControlVec> uniform_v_grid(const Model& model, std::size_t points_per_dim = 33);

struct DefectWitness {
  double value = -std::numeric_limits<double>::infinity();
  ModeId mode = 0;
  StateVec x;
  StateVec y;
  ControlVec u;
  ControlVec v;
  ControlVec w;
};

struct NonexpReport {
  std::size_t samples = 0;
  DefectWitness worst_flow_gap;
  DefectWitness worst_jump_gap;
  DefectWitness worst_cost_gap;
  DefectWitness worst_defect;    ///< sup over samples of the selected candidate's max defect
  DefectWitness worst_w_equals_v;  ///< same with the response fixed to w = v
  double tolerance = 1e-9;
  bool pass = false;
};

/// Monte Carlo sup over (gamma, x, y, u, v) of the inf over candidates of
/// the max defect. Requires rates and kernels that depend on (gamma, u) only.
NonexpReport check_nonexpansive_condition(const Model& model, std::size_t n_samples,
                                          const std::vector<ControlVec>& v_grid, std::uint64_t seed,
                                          double tolerance = 1e-9, std::size_t threads = 1);

struct CouplingOptions {
  SimulationOptions simulation;
  std::vector<ControlVec> v_grid;  ///< empty means uniform_v_grid(model)
  double tolerance = 1e-9;
  std::size_t threads = 1;
  double bias = 1e-4;
  double k0 = 0.0;  ///< jump-size constant of the pathwise bound; 0 means the invariant box diameter
};

/// Simultaneous substeps of the two marginals.
class CoupledObserver {
 public:
  virtual ~CoupledObserver() = default;
  virtual void on_substep(const Substep& /*x*/, const Substep& /*y*/) {}
  virtual void on_jump(const JumpEvent& /*x*/, const JumpEvent& /*y*/) {}
  virtual void on_end(double /*horizon*/, ModeId /*mode*/, const StateVec& /*x*/, const StateVec& /*y*/) {}
};

struct CoupledSummary {
  std::size_t jumps = 0;
  double sup_gap = 0.0;
  std::size_t refreshes = 0;
  double worst_selection_defect = -std::numeric_limits<double>::infinity();
};

/// Runs X under the policy and Y on the same jump times and modes with
/// control (u, w), w refreshed at every multiple of 1/n after the last jump
/// and right after each jump. The policy must be constant or stepped with a
/// parameter dividing n.
CoupledSummary run_coupled_path(const Model& model, ModeId mode0, const StateVec& x0, const StateVec& y0,
                                const Policy& policy, unsigned n, double horizon, Rng& rng,
                                const CouplingOptions& options, CoupledObserver& observer);

struct CoupledPair {
  std::vector<double> jump_times;  ///< shared T_k, starting with 0
  std::vector<ModeId> modes;       ///< shared theta_k
  std::vector<Substep> x_path;
  std::vector<Substep> y_path;
  unsigned n = 1;
  double horizon = 0.0;
  CoupledSummary summary;
};

CoupledPair simulate_coupled(const Model& model, ModeId mode0, const StateVec& x0, const StateVec& y0,
                             const Policy& policy, unsigned n, double horizon, RngStream stream,
                             const CouplingOptions& options = {});

/// delta int e^{-delta t} |h(X) - h(Y)| dt along one pair (Simpson).
double pair_cost_gap(const Model& model, const CoupledPair& pair, double delta);

/// Smallest c with |X_t - Y_t|^2 <= |x0 - y0|^2 + c (t + k (4 k0 + 1)) / n
/// at every substep end, k the number of jumps before t; 0 when the squared
/// gap never grows.
double fitted_pathwise_constant(const CoupledPair& pair, double k0);

struct CouplingRow {
  std::size_t path = 0;
  unsigned n = 0;
  double initial_distance = 0.0;
  std::size_t jumps = 0;
  double sup_gap = 0.0;
  double cost_gap = 0.0;
  double fitted_c = 0.0;
};

struct CouplingGapResult {
  ValueEstimate gap;  ///< mean discounted cost gap, truncation bias 2 h_max e^{-delta C}
  std::vector<CouplingRow> rows;
  double max_sup_gap = 0.0;
  double fitted_c = 0.0;  ///< max over paths
  double k0 = 0.0;
  double epsilon = 0.0;   ///< coupling_epsilon at fitted_c
};

/// Lip(h) (sqrt(d0^2 + c (1 + lambda_max (4 k0 + 1)) / (delta n)) - d0): the
/// excess over Lip(h) d0 allowed by the pathwise bound with constant c,
/// after Jensen and E N_t <= lambda_max t.
double coupling_epsilon(const Model& model, double c, double d0, double delta, unsigned n, double k0);

/// Ensemble estimate of E delta int e^{-delta t} |h(X) - h(Y)| dt.
CouplingGapResult coupling_gap(const Model& model, ModeId mode0, const StateVec& x0, const StateVec& y0,
                               const Policy& policy, unsigned n, double delta, std::size_t n_paths,
                               std::uint64_t seed, const CouplingOptions& options = {});

/// Occupation measures of X and of the coupled Y on one ensemble.
struct CoupledOccupations {
  EmpiricalOccupation x;
  EmpiricalOccupation y;
};

CoupledOccupations coupled_occupations(const Model& model, ModeId mode0, const StateVec& x0, const StateVec& y0,
                                       const Policy& policy, unsigned n, double delta, std::size_t n_paths,
                                       std::uint64_t seed, const CouplingOptions& options = {},
                                       std::size_t max_atoms = 1'000'000);

/// Columns path, n, initial_distance, jumps, sup_gap, cost_gap, fitted_c.
void write_coupling_csv(std::ostream& out, const std::vector<CouplingRow>& rows);

}  // namespace pdmp
