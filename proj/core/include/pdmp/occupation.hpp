#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "pdmp/model.hpp"
#include "pdmp/policy.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/simulate.hpp"

namespace pdmp {

struct Atom {
  ModeId mode = 0;
  StateVec y;
  ControlPoint control;
  double weight = 0.0;
  std::uint32_t path = 0;
};

/// Weighted atoms approximating the discounted occupation measure
/// delta E int e^{-delta t} 1{(Gamma_t, X_t, u_t) in .} dt of an ensemble.
/// Atoms sit at the Simpson nodes of the simulator's substeps. The mass
/// beyond the truncation horizon C is carried by `terminal`: one atom per
/// path at (Gamma_C, X_C, last control) with weight e^{-delta C} / n_paths.
struct EmpiricalOccupation {
  std::vector<Atom> atoms;
  std::vector<Atom> terminal;
  double delta = 0.0;
  ModeId origin_mode = 0;
  StateVec origin_state;
  std::size_t n_paths = 0;
  double horizon = 0.0;
  double total_weight = 0.0;  ///< sum of atom weights
  double tail_mass = 0.0;     ///< e^{-delta C}
  std::size_t thinning = 1;   ///< atoms per stratum kept as one
};

struct TestFunction {
  std::string id;
  std::function<double(ModeId, const StateVec&)> value;
  std::function<StateVec(ModeId, const StateVec&)> gradient;
};

struct ResidualResult {
  std::string id;
  double residual = 0.0;
  double std_error = 0.0;
};

struct OccupationOptions {
  std::size_t threads = 1;  ///< 0 means hardware concurrency
  SimulationOptions simulation;
  double bias = 1e-4;                 ///< truncation mass e^{-delta C} target
  std::size_t max_atoms = 1'000'000;  ///< stratified thinning keeps the atom count below this
};

/// Records one path's atoms; thinning keeps one randomly chosen atom per
/// block of `thinning` consecutive atoms and gives it the block's weight.
class OccupationRecorder final : public PathObserver {
 public:
  OccupationRecorder(double delta, double path_weight, std::uint32_t path, std::size_t thinning, Rng* thinning_rng);

  void on_substep(const Substep& s) override;
  void on_end(double horizon, ModeId mode, const StateVec& x) override;

  std::vector<Atom>& atoms() { return atoms_; }
  const Atom& terminal() const { return terminal_; }

 private:
  void push(ModeId mode, const StateVec& y, const ControlPoint& c, double weight);
  void flush();

  double delta_;
  double path_weight_;
  std::uint32_t path_;
  std::size_t thinning_;
  Rng* rng_;
  std::vector<Atom> block_;
  std::vector<Atom> atoms_;
  Atom terminal_;
  ControlPoint last_control_;
};

/// Occupation measure of recorded trajectories (all from one origin);
/// replays the substeps exactly as the simulator produced them.
EmpiricalOccupation empirical_occupation(const Model& model, const std::vector<Trajectory>& trajectories,
                                         double delta);

/// Simulates n_paths paths (stream (seed, i)) to the horizon where
/// e^{-delta C} <= bias and collects their occupation measure.
EmpiricalOccupation simulate_occupation(const Model& model, const Policy& policy, ModeId mode0, const StateVec& x0,
                                        double delta, std::size_t n_paths, std::uint64_t seed,
                                        const OccupationOptions& options = {});

/// Thinning factor that keeps `expected_atoms` below `max_atoms`.
std::size_t thinning_factor(std::size_t expected_atoms, std::size_t max_atoms);

/// Sum of weight * h over the atoms and the terminal atoms; the same
/// number estimate_abel computes for the same ensemble and horizon.
double cost_integral(const EmpiricalOccupation& measure, const Model& model);

/// L^{u,v} phi(theta, y): flow term plus jump term.
double generator_apply(const Model& model, const TestFunction& phi, ModeId mode, const StateVec& y,
                       const ControlPoint& c);

/// int (L phi + delta (phi(origin) - phi)) dmu, with the exact correction
/// for the truncated tail, and a jackknife standard error over paths.
/// Throws ArgumentError when phi or its gradient is not finite on sampled
/// points of K.
ResidualResult generator_residual(const Model& model, const EmpiricalOccupation& measure, const TestFunction& phi);

/// Per-mode indicators times {1, s_i, s_i^2, s_i s_j}, where s is the state
/// rescaled to [0, 1]^N over the invariant box.
std::vector<TestFunction> test_battery(const Model& model);

std::vector<ResidualResult> residual_report(const Model& model, const EmpiricalOccupation& measure,
                                            const std::vector<TestFunction>& battery, std::size_t threads = 1);

/// Weighted mixture p * a + (1 - p) * b of two measures from the same origin.
EmpiricalOccupation mix(const EmpiricalOccupation& a, const EmpiricalOccupation& b, double p);

/// Columns mode_id, y_1.., u_1.., v_1.., weight, path.
void write_atoms_csv(std::ostream& out, const EmpiricalOccupation& measure);
/// Columns phi_id, residual, stderr.
void write_residuals_csv(std::ostream& out, const std::vector<ResidualResult>& rows);

}  // namespace pdmp
