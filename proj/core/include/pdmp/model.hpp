#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pdmp/types.hpp"

namespace pdmp {

struct Mode {
  ModeId id = 0;
  std::string label;
};

/// Declared sup-norms and Lipschitz constants of the characteristics.
/// `lip_jump` bounds the post-jump map x -> x + g(theta, x); `g_max`
/// bounds |g| itself.
struct DeclaredBounds {
  double f_max = 0.0;
  double lambda_max = 0.0;
  double g_max = 0.0;
  double h_max = 0.0;
  double lip_f = 0.0;
  double lip_lambda = 0.0;
  double lip_jump = 0.0;
  double lip_h = 0.0;
};

struct ModelInfo {
  std::string name;
  std::vector<Mode> modes;
  std::size_t dim = 0;
  ControlBox control_u;
  ControlBox control_v;
  std::optional<Box> invariant_box;
  DeclaredBounds bounds;
  /// True when the jump rate is lambda_gamma(u): independent of x and v.
  /// Coupling requires it; the simulator uses it to invert the hazard
  /// in closed form.
  bool rate_depends_on_control_u_only = false;
};

/// Characteristic data (f, lambda, Q0, g) of a controlled switch PDMP plus
/// the running cost h. Instances are immutable; every evaluation is pure.
///
/// The public entry points validate dimensions and forward to the
/// protected hooks that concrete models implement.
class Model {
 public:
  explicit Model(ModelInfo info);
  virtual ~Model() = default;

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelInfo& info() const { return info_; }
  const std::string& name() const { return info_.name; }
  std::size_t mode_count() const { return info_.modes.size(); }
  std::size_t dim() const { return info_.dim; }
  const DeclaredBounds& bounds() const { return info_.bounds; }
  bool restricted_framework() const { return info_.rate_depends_on_control_u_only; }

  StateVec flow_field(ModeId mode, const StateVec& x, const ControlPoint& c) const;
  double jump_rate(ModeId mode, const StateVec& x, const ControlPoint& c) const;
  /// Q0(mode, c, .) as a probability vector indexed by target mode id.
  ModeDistribution mode_distribution(ModeId mode, const ControlPoint& c) const;
  /// Post-jump state x + g(from -> to, x, c). Defined for every pair; for
  /// targets carrying no Q0 mass the table value (usually g = 0) is returned.
  StateVec jump_map(ModeId from, ModeId to, const StateVec& x, const ControlPoint& c) const;
  double running_cost(ModeId mode, const StateVec& x, const ControlPoint& c) const;

  /// Unchecked fast paths for inner loops whose inputs were validated once.
  StateVec flow_unchecked(ModeId mode, const StateVec& x, const ControlPoint& c) const {
    return do_flow(mode, x, c);
  }
  double rate_unchecked(ModeId mode, const StateVec& x, const ControlPoint& c) const {
    return do_rate(mode, x, c);
  }
  ModeDistribution kernel_unchecked(ModeId mode, const ControlPoint& c) const {
    return do_mode_distribution(mode, c);
  }
  StateVec jump_unchecked(ModeId from, ModeId to, const StateVec& x, const ControlPoint& c) const {
    return x + do_jump_offset(from, to, x, c);
  }
  double cost_unchecked(ModeId mode, const StateVec& x, const ControlPoint& c) const {
    return do_cost(mode, x, c);
  }

  void check_mode(ModeId mode) const;
  void check_state(const StateVec& x) const;
  void check_control(const ControlPoint& c) const;

 protected:
  virtual StateVec do_flow(ModeId mode, const StateVec& x, const ControlPoint& c) const = 0;
  virtual double do_rate(ModeId mode, const StateVec& x, const ControlPoint& c) const = 0;
  virtual ModeDistribution do_mode_distribution(ModeId mode, const ControlPoint& c) const = 0;
  virtual StateVec do_jump_offset(ModeId from, ModeId to, const StateVec& x,
                                  const ControlPoint& c) const = 0;
  virtual double do_cost(ModeId mode, const StateVec& x, const ControlPoint& c) const = 0;

 private:
  ModelInfo info_;
};

using ModelPtr = std::shared_ptr<const Model>;

/// Model assembled from callables. Used for the analytic toys and for
/// test fixtures that need characteristics outside the built-in set.
struct ModelCallbacks {
  std::function<StateVec(ModeId, const StateVec&, const ControlPoint&)> flow;
  std::function<double(ModeId, const StateVec&, const ControlPoint&)> rate;
  std::function<ModeDistribution(ModeId, const ControlPoint&)> kernel;
  /// Returns g, not x + g.
  std::function<StateVec(ModeId, ModeId, const StateVec&, const ControlPoint&)> jump_offset;
  std::function<double(ModeId, const StateVec&, const ControlPoint&)> cost;
};

class FunctionModel final : public Model {
 public:
  FunctionModel(ModelInfo info, ModelCallbacks callbacks);

 protected:
  StateVec do_flow(ModeId mode, const StateVec& x, const ControlPoint& c) const override;
  double do_rate(ModeId mode, const StateVec& x, const ControlPoint& c) const override;
  ModeDistribution do_mode_distribution(ModeId mode, const ControlPoint& c) const override;
  StateVec do_jump_offset(ModeId from, ModeId to, const StateVec& x,
                          const ControlPoint& c) const override;
  double do_cost(ModeId mode, const StateVec& x, const ControlPoint& c) const override;

 private:
  ModelCallbacks cb_;
};

/// Degenerate control set {0} of dimension `dim` (dim = 0 means empty).
ControlBox point_control_box(std::size_t dim);
/// Box [lo, hi]^dim.
ControlBox uniform_control_box(std::size_t dim, double lo, double hi);
Box uniform_box(std::size_t dim, double lo, double hi);

// ---------------------------------------------------------------------------
// Validation

struct ValidationIssue {
  std::string quantity;  // e.g. "h_max", "lip_f", "Q0_normalization"
  double observed = 0.0;
  double declared = 0.0;
  ModeId mode = 0;
  StateVec x;
  StateVec y;
  ControlPoint control;
  std::string detail;
};

struct LipschitzEstimate {
  std::string quantity;
  double empirical = 0.0;
  double declared = 0.0;
};

struct ValidationReport {
  std::size_t samples = 0;
  std::vector<ValidationIssue> bound_violations;
  std::vector<ValidationIssue> lipschitz_violations;
  std::vector<ValidationIssue> kernel_failures;
  std::vector<LipschitzEstimate> lipschitz;
  /// Worst offender per checked quantity, violating or not.
  std::vector<ValidationIssue> worst;

  bool passed() const {
    return bound_violations.empty() && lipschitz_violations.empty() && kernel_failures.empty();
  }
  const LipschitzEstimate* find(const std::string& quantity) const;
};

/// Samples (mode, x, y, u, v) uniformly in K x U x V and compares the
/// characteristics with the declared bounds. Report-only; never throws for
/// a bad model. Requires an invariant box to sample from.
ValidationReport validate_model(const Model& model, std::size_t sample_count, std::uint64_t seed);

}  // namespace pdmp
