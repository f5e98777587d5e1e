#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "pdmp/grid.hpp"
#include "pdmp/types.hpp"

namespace pdmp {

class Model;

enum class PolicyKind {
  kConstant,         ///< one control forever
  kSteppedOpenLoop,  ///< control on ((j)/n, (j+1)/n] read from (jump k, mode, cell of Y_k, j)
  kFeedbackGrid,     ///< control from (mode, cell of the current state), re-read every ODE step
  kSteppedFeedback,  ///< control on ((j)/n, (j+1)/n] from (mode, cell of the state at j/n)
};

/// What a policy may look at when it is asked for a control. The
/// open-loop kinds only use the post-jump pair (mode, state) and the clock;
/// the feedback kinds also read `current_state`.
struct PolicyContext {
  ModeId mode = 0;          ///< Upsilon_k, the mode since the last jump
  StateVec state_at_jump;   ///< Y_k
  StateVec current_state;   ///< state where the current cell starts
  double t_since_jump = 0.0;
  std::size_t jump_index = 0;
};

/// Index j of the cell ((j)/n, (j+1)/n] containing t, with t = 0 mapped to
/// cell 0 (left-continuous steps).
std::size_t step_index(double t, unsigned n);

/// Admissible open-loop control sequence restarted at every jump, stored as
/// finite tables. Tables wrap around cyclically in jump depth and in step
/// index. Immutable after construction.
class Policy {
 public:
  static Policy constant(ControlPoint control);
  /// `table` is laid out [depth][mode_slot][grid node][step]; `mode_slots`
  /// is 1 (shared by all modes) or the model's mode count.
  static Policy stepped_open_loop(unsigned n, std::size_t depth, std::size_t mode_slots, StateGrid grid,
                                  std::size_t steps, std::vector<ControlPoint> table);
  /// `table` is laid out [mode_slot][grid node].
  static Policy feedback_grid(std::size_t mode_slots, StateGrid grid, std::vector<ControlPoint> table);
  static Policy stepped_feedback(unsigned n, std::size_t mode_slots, StateGrid grid, std::vector<ControlPoint> table);

  PolicyKind kind() const { return kind_; }
  unsigned n() const { return n_; }
  std::size_t depth() const { return depth_; }
  std::size_t mode_slots() const { return mode_slots_; }
  std::size_t steps() const { return steps_; }
  const StateGrid& grid() const { return grid_; }
  const std::vector<ControlPoint>& table() const { return table_; }

  /// Length of a control cell in time since the last jump: 1/n for the
  /// stepped kinds, +inf for constant, 0 for per-ODE-step feedback.
  double cell_length() const;

  ControlPoint evaluate(const PolicyContext& ctx) const;
  /// Control on cell j of segment k. For the feedback kinds `current` must
  /// be the state at the start of the cell.
  ControlPoint cell_control(ModeId mode, const StateVec& state_at_jump, const StateVec& current, std::size_t cell,
                            std::size_t jump_index) const;

  /// Same policy with each step cell split into `factor` equal cells.
  Policy refined(unsigned factor) const;

  /// Throws ModelError when some stored control leaves the model's boxes or
  /// the mode/grid layout does not fit the model.
  void check_against(const Model& model) const;

  bool operator==(const Policy&) const;

 private:
  Policy() = default;
  std::size_t mode_slot(ModeId mode) const { return mode_slots_ == 1 ? 0 : mode; }

  PolicyKind kind_ = PolicyKind::kConstant;
  unsigned n_ = 0;
  std::size_t depth_ = 1;
  std::size_t mode_slots_ = 1;
  std::size_t steps_ = 1;
  StateGrid grid_;
  std::vector<ControlPoint> table_;
};

/// Convenience form with the open-loop argument list; the current state is
/// taken to be the post-jump state.
ControlPoint evaluate_policy(const Policy& policy, ModeId mode, const StateVec& state_at_jump, double t_since_jump,
                             std::size_t jump_index);

std::string policy_kind_name(PolicyKind kind);

/// JSON text with kind, n, grid and flattened tables.
std::string policy_to_json(const Policy& policy);
Policy policy_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Finite policy families searched by the value optimizer.

struct FamilySpec {
  enum class Kind { kConstant, kStepped };
  Kind kind = Kind::kConstant;
  /// Per-coordinate levels; the control grid is their Cartesian product.
  std::vector<std::vector<double>> u_levels;
  std::vector<std::vector<double>> v_levels;
  /// Stepped family: n and the number of distinct step cells (cyclic).
  unsigned n = 1;
  std::size_t steps = 1;
  std::size_t cap = 1'000'000;
};

/// Deterministic enumeration. Constant family: one policy per control-grid
/// point. Stepped family: every assignment of a grid control to each of the
/// `steps` cells, shared by all modes and states, in lexicographic order
/// with the first cell varying slowest.
class PolicyFamily {
 public:
  PolicyFamily(FamilySpec spec, std::size_t state_dim, const Box& box);

  std::size_t size() const { return size_; }
  Policy at(std::size_t index) const;
  const std::vector<ControlPoint>& controls() const { return controls_; }
  const FamilySpec& spec() const { return spec_; }

 private:
  FamilySpec spec_;
  std::vector<ControlPoint> controls_;
  std::size_t size_ = 0;
  Box box_;
};

/// Throws ArgumentError naming the size when the family exceeds spec.cap.
PolicyFamily enumerate_policy_family(const FamilySpec& spec, const Model& model);

}  // namespace pdmp
