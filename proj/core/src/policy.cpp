#include "pdmp/policy.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "pdmp/errors.hpp"
#include "pdmp/model.hpp"

namespace pdmp {

using nlohmann::json;

std::size_t step_index(double t, unsigned n) {
  if (n == 0) throw ArgumentError("step parameter n must be positive");
  if (!(t > 0.0)) return 0;
  const double s = std::ceil(t * static_cast<double>(n));
  return s < 1.0 ? 0 : static_cast<std::size_t>(s) - 1;
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ArgumentError(what);
}

}  // namespace

Policy Policy::constant(ControlPoint control) {
  Policy p;
  p.kind_ = PolicyKind::kConstant;
  p.table_ = {std::move(control)};
  return p;
}

Policy Policy::stepped_open_loop(unsigned n, std::size_t depth, std::size_t mode_slots, StateGrid grid,
                                 std::size_t steps, std::vector<ControlPoint> table) {
  require(n > 0, "stepped policy needs n > 0");
  require(depth > 0 && mode_slots > 0 && steps > 0, "stepped policy dimensions must be positive");
  require(table.size() == depth * mode_slots * grid.node_count() * steps, "stepped policy table has the wrong size");
  Policy p;
  p.kind_ = PolicyKind::kSteppedOpenLoop;
  p.n_ = n;
  p.depth_ = depth;
  p.mode_slots_ = mode_slots;
  p.steps_ = steps;
  p.grid_ = std::move(grid);
  p.table_ = std::move(table);
  return p;
}

Policy Policy::feedback_grid(std::size_t mode_slots, StateGrid grid, std::vector<ControlPoint> table) {
  require(mode_slots > 0, "feedback policy needs at least one mode slot");
  require(table.size() == mode_slots * grid.node_count(), "feedback policy table has the wrong size");
  Policy p;
  p.kind_ = PolicyKind::kFeedbackGrid;
  p.mode_slots_ = mode_slots;
  p.grid_ = std::move(grid);
  p.table_ = std::move(table);
  return p;
}

Policy Policy::stepped_feedback(unsigned n, std::size_t mode_slots, StateGrid grid, std::vector<ControlPoint> table) {
  require(n > 0, "stepped policy needs n > 0");
  Policy p = feedback_grid(mode_slots, std::move(grid), std::move(table));
  p.kind_ = PolicyKind::kSteppedFeedback;
  p.n_ = n;
  return p;
}

double Policy::cell_length() const {
  switch (kind_) {
    case PolicyKind::kConstant: return std::numeric_limits<double>::infinity();
    case PolicyKind::kFeedbackGrid: return 0.0;
    default: return 1.0 / static_cast<double>(n_);
  }
}

ControlPoint Policy::cell_control(ModeId mode, const StateVec& state_at_jump, const StateVec& current,
                                  std::size_t cell, std::size_t jump_index) const {
  switch (kind_) {
    case PolicyKind::kConstant: return table_.front();
    case PolicyKind::kSteppedOpenLoop: {
      const std::size_t nodes = grid_.node_count();
      const std::size_t k = jump_index % depth_;
      const std::size_t node = grid_.nearest_node(state_at_jump);
      const std::size_t idx = ((k * mode_slots_ + mode_slot(mode)) * nodes + node) * steps_ + cell % steps_;
      return table_[idx];
    }
    case PolicyKind::kFeedbackGrid:
    case PolicyKind::kSteppedFeedback:
      return table_[mode_slot(mode) * grid_.node_count() + grid_.nearest_node(current)];
  }
  throw ArgumentError("unknown policy kind");
}

ControlPoint Policy::evaluate(const PolicyContext& ctx) const {
  const std::size_t cell = n_ > 0 ? step_index(ctx.t_since_jump, n_) : 0;
  const StateVec& current = ctx.current_state.empty() ? ctx.state_at_jump : ctx.current_state;
  return cell_control(ctx.mode, ctx.state_at_jump, current, cell, ctx.jump_index);
}

Policy Policy::refined(unsigned factor) const {
  require(factor > 0, "refinement factor must be positive");
  if (kind_ == PolicyKind::kConstant || kind_ == PolicyKind::kFeedbackGrid) return *this;
  Policy p = *this;
  p.n_ = n_ * factor;
  if (kind_ == PolicyKind::kSteppedFeedback) return p;
  p.steps_ = steps_ * factor;
  p.table_.clear();
  p.table_.reserve(table_.size() * factor);
  for (std::size_t row = 0; row < table_.size() / steps_; ++row) {
    for (std::size_t j = 0; j < p.steps_; ++j) p.table_.push_back(table_[row * steps_ + j / factor]);
  }
  return p;
}

void Policy::check_against(const Model& model) const {
  if (mode_slots_ != 1 && mode_slots_ != model.mode_count()) {
    throw ModelError("policy has " + std::to_string(mode_slots_) + " mode slots; model has " +
                     std::to_string(model.mode_count()) + " modes");
  }
  if (kind_ != PolicyKind::kConstant && grid_.dim() != model.dim()) {
    throw ModelError("policy grid dimension does not match the model state dimension");
  }
  for (const ControlPoint& c : table_) model.check_control(c);
}

bool Policy::operator==(const Policy& o) const {
  return kind_ == o.kind_ && n_ == o.n_ && depth_ == o.depth_ && mode_slots_ == o.mode_slots_ &&
         steps_ == o.steps_ && table_ == o.table_ && (kind_ == PolicyKind::kConstant || grid_ == o.grid_);
}

ControlPoint evaluate_policy(const Policy& policy, ModeId mode, const StateVec& state_at_jump, double t_since_jump,
                             std::size_t jump_index) {
  if (!(t_since_jump >= 0.0)) throw ArgumentError("t_since_jump must be nonnegative");
  return policy.evaluate({mode, state_at_jump, state_at_jump, t_since_jump, jump_index});
}

std::string policy_kind_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kConstant: return "constant";
    case PolicyKind::kSteppedOpenLoop: return "stepped_open_loop";
    case PolicyKind::kFeedbackGrid: return "feedback_grid";
    case PolicyKind::kSteppedFeedback: return "stepped_feedback";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// JSON

namespace {

template <std::size_t C>
json vec_json(const SmallVec<C>& v) {
  return json(std::vector<double>(v.begin(), v.end()));
}

template <std::size_t C>
SmallVec<C> vec_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return SmallVec<C>::from_span(values);
}

PolicyKind parse_kind(const std::string& name) {
  for (PolicyKind k : {PolicyKind::kConstant, PolicyKind::kSteppedOpenLoop, PolicyKind::kFeedbackGrid,
                       PolicyKind::kSteppedFeedback}) {
    if (policy_kind_name(k) == name) return k;
  }
  throw ArgumentError("unknown policy kind '" + name + "'");
}

}  // namespace

std::string policy_to_json(const Policy& policy) {
  json j;
  j["kind"] = policy_kind_name(policy.kind());
  j["n"] = policy.n();
  j["depth"] = policy.depth();
  j["mode_slots"] = policy.mode_slots();
  j["steps"] = policy.steps();
  if (policy.kind() != PolicyKind::kConstant) {
    j["grid"] = {{"lo", vec_json(policy.grid().box().lo)},
                 {"hi", vec_json(policy.grid().box().hi)},
                 {"nodes", policy.grid().nodes_per_dim()}};
  }
  json table = json::array();
  for (const ControlPoint& c : policy.table()) table.push_back({{"u", vec_json(c.u)}, {"v", vec_json(c.v)}});
  j["table"] = std::move(table);
  return j.dump(1);
}

Policy policy_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    const PolicyKind kind = parse_kind(j.at("kind").get<std::string>());
    std::vector<ControlPoint> table;
    for (const json& c : j.at("table")) table.push_back({vec_from<kMaxControlDim>(c.at("u")), vec_from<kMaxControlDim>(c.at("v"))});
    if (kind == PolicyKind::kConstant) {
      if (table.size() != 1) throw ArgumentError("constant policy needs exactly one table entry");
      return Policy::constant(table.front());
    }
    const json& g = j.at("grid");
    StateGrid grid(Box{vec_from<kMaxStateDim>(g.at("lo")), vec_from<kMaxStateDim>(g.at("hi"))},
                   g.at("nodes").get<std::vector<std::size_t>>());
    const auto mode_slots = j.at("mode_slots").get<std::size_t>();
    switch (kind) {
      case PolicyKind::kSteppedOpenLoop:
        return Policy::stepped_open_loop(j.at("n").get<unsigned>(), j.at("depth").get<std::size_t>(), mode_slots,
                                         std::move(grid), j.at("steps").get<std::size_t>(), std::move(table));
      case PolicyKind::kFeedbackGrid: return Policy::feedback_grid(mode_slots, std::move(grid), std::move(table));
      default:
        return Policy::stepped_feedback(j.at("n").get<unsigned>(), mode_slots, std::move(grid), std::move(table));
    }
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("malformed policy JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Families

PolicyFamily::PolicyFamily(FamilySpec spec, std::size_t state_dim, const Box& box)
    : spec_(std::move(spec)), box_(box) {
  controls_ = control_grid(spec_.u_levels, spec_.v_levels);
  if (controls_.empty()) throw ArgumentError("policy family has an empty control grid");
  if (box_.dim() != state_dim) throw ArgumentError("policy family box does not match the state dimension");
  if (spec_.kind == FamilySpec::Kind::kConstant) {
    size_ = controls_.size();
  } else {
    if (spec_.n == 0 || spec_.steps == 0) throw ArgumentError("stepped family needs n > 0 and steps > 0");
    double size = 1.0;
    for (std::size_t i = 0; i < spec_.steps; ++i) size *= static_cast<double>(controls_.size());
    if (size > static_cast<double>(spec_.cap)) {
      throw ArgumentError("policy family size " + std::to_string(static_cast<long double>(size)) +
                          " exceeds the cap " + std::to_string(spec_.cap));
    }
    size_ = static_cast<std::size_t>(size);
  }
  if (size_ > spec_.cap) {
    throw ArgumentError("policy family size " + std::to_string(size_) + " exceeds the cap " +
                        std::to_string(spec_.cap));
  }
}

Policy PolicyFamily::at(std::size_t index) const {
  if (index >= size_) throw ArgumentError("policy family index out of range");
  if (spec_.kind == FamilySpec::Kind::kConstant) return Policy::constant(controls_[index]);
  std::vector<ControlPoint> cells(spec_.steps);
  for (std::size_t j = spec_.steps; j-- > 0;) {
    cells[j] = controls_[index % controls_.size()];
    index /= controls_.size();
  }
  return Policy::stepped_open_loop(spec_.n, 1, 1, StateGrid::single(box_), spec_.steps, std::move(cells));
}

PolicyFamily enumerate_policy_family(const FamilySpec& spec, const Model& model) {
  const Box box = model.info().invariant_box.value_or(uniform_box(model.dim(), -1.0, 1.0));
  PolicyFamily family(spec, model.dim(), box);
  for (const ControlPoint& c : family.controls()) model.check_control(c);
  return family;
}

}  // namespace pdmp
