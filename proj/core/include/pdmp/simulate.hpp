#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "pdmp/model.hpp"
#include "pdmp/policy.hpp"
#include "pdmp/rng.hpp"

namespace pdmp {

enum class InvarianceMode {
  kAssert,  ///< throw InvarianceError when a state leaves K by more than the tolerance
  kClamp,   ///< project back onto K and count the event
};

struct SimulationOptions {
  double ode_step = 1e-2;
  double time_tolerance = 1e-10;  ///< bisection tolerance for state-dependent hazards
  double invariance_tolerance = 1e-6;
  InvarianceMode invariance = InvarianceMode::kAssert;
  std::size_t max_jumps = 10'000'000;
};

/// One RK4 substep of the flow with its Hermite midpoint, the unit of all
/// time quadrature. Times are absolute.
struct Substep {
  ModeId mode = 0;
  double t0 = 0.0;
  double t1 = 0.0;
  StateVec x0;
  StateVec xm;
  StateVec x1;
  ControlPoint control;
  std::size_t jump_index = 0;
};

/// Simpson weights (start, midpoint, end) of delta e^{-delta t} on
/// [t0, t1], rescaled so they sum to the exact mass e^{-delta t0} - e^{-delta t1}.
std::array<double, 3> discounted_simpson_weights(double delta, double t0, double t1);

struct JumpEvent {
  double time = 0.0;
  std::size_t jump_index = 0;  ///< index of the jump just taken (1 for T_1)
  ModeId from = 0;
  ModeId to = 0;
  StateVec pre;
  StateVec post;
  ControlPoint control;
};

/// Receives a path as it is generated; lets estimators integrate without
/// storing the path.
class PathObserver {
 public:
  virtual ~PathObserver() = default;
  virtual void on_substep(const Substep&) {}
  virtual void on_jump(const JumpEvent&) {}
  virtual void on_end(double /*horizon*/, ModeId /*mode*/, const StateVec& /*x*/) {}
};

struct PathSummary {
  std::size_t jumps = 0;
  ModeId final_mode = 0;
  StateVec final_state;
  std::size_t clamp_events = 0;
  double max_excess = 0.0;  ///< largest distance outside K seen before any clamp
};

/// Flow samples of one inter-jump interval. `controls[i]` is applied on
/// (times[i], times[i+1]].
struct Segment {
  ModeId mode = 0;
  std::vector<double> times;
  std::vector<StateVec> states;
  std::vector<ControlPoint> controls;
};

struct Trajectory {
  std::vector<double> jump_times;  ///< T_0 = 0 < T_1 < ...
  std::vector<ModeId> modes;       ///< Upsilon_k
  std::vector<StateVec> states;    ///< Y_k
  std::vector<Segment> segments;
  double horizon = 0.0;
  RngStream stream;
  PathSummary summary;
};

/// Control that is piecewise constant in time: `controls[i]` applies on
/// (breakpoints[i], breakpoints[i+1]], the last one until the end.
/// breakpoints[0] must be 0.
struct ControlSchedule {
  std::vector<double> breakpoints{0.0};
  std::vector<ControlPoint> controls;

  static ControlSchedule constant(ControlPoint c) { return {{0.0}, {std::move(c)}}; }
  /// Index of the piece holding t (left-continuous).
  std::size_t piece(double t) const;
};

struct DensePath {
  std::vector<double> times;
  std::vector<StateVec> states;
};

/// One classical RK4 step of length h. Throws IntegrationError when f
/// returns a non-finite value.
StateVec rk4_step(const Model& model, ModeId mode, const StateVec& x, const ControlPoint& c, double h);

/// Fixed-step RK4 over [0, duration]; substeps are shortened so none
/// straddles a control breakpoint.
DensePath integrate_flow(const Model& model, ModeId mode, const StateVec& x0, const ControlSchedule& control,
                         double duration, double step);

struct JumpDraw {
  std::optional<double> time;  ///< empty when no jump happens before the cap
  StateVec pre_state;          ///< state at the jump time (or at the cap)
  ControlPoint control;        ///< control in force at that time
};

/// First jump time of the flow from x0 under `control`, by inverting the
/// cumulative hazard against one Exp(1) draw.
JumpDraw sample_jump_time(const Model& model, ModeId mode, const StateVec& x0, const ControlSchedule& control,
                          double cap, Rng& rng, const SimulationOptions& options = {});

/// Target mode by inverse CDF over the fixed mode order, and the post-jump
/// state. Throws ModelError on an all-zero kernel row.
std::pair<ModeId, StateVec> sample_post_jump(const Model& model, ModeId mode, const StateVec& x_pre,
                                             const ControlPoint& c, Rng& rng);
/// Same with the uniform supplied by the caller.
ModeId sample_mode(const ModeDistribution& q, double uniform);

/// Drives one path to the horizon, reporting to `observer`. The policy
/// clock restarts at every jump; segment k sees (Upsilon_k, Y_k, t - T_k).
PathSummary simulate_path(const Model& model, ModeId mode0, const StateVec& x0, const Policy& policy,
                          double horizon, Rng& rng, const SimulationOptions& options, PathObserver& observer);

Trajectory simulate_trajectory(const Model& model, ModeId mode0, const StateVec& x0, const Policy& policy,
                               double horizon, RngStream stream, const SimulationOptions& options = {});

/// Columns t, mode_id, x_1..x_N, u_1.., v_1.., event; one row per flow
/// sample and one "jump" row per jump with the post-jump state.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

/// Checks the usual starting-point preconditions (mode range, dimension,
/// x0 inside K).
void check_start(const Model& model, ModeId mode0, const StateVec& x0);

}  // namespace pdmp
