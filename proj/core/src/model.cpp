#include "pdmp/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "pdmp/errors.hpp"
#include "pdmp/rng.hpp"

namespace pdmp {

std::string to_string(const StateVec& x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

std::string to_string(const ControlPoint& c) {
  std::ostringstream os;
  os.precision(17);
  os << "u=(";
  for (std::size_t i = 0; i < c.u.size(); ++i) os << (i ? ", " : "") << c.u[i];
  os << ") v=(";
  for (std::size_t i = 0; i < c.v.size(); ++i) os << (i ? ", " : "") << c.v[i];
  os << ')';
  return os.str();
}

Model::Model(ModelInfo info) : info_(std::move(info)) {
  if (info_.modes.empty()) throw ModelError("model '" + info_.name + "' has no modes");
  if (info_.modes.size() > kMaxModes) throw ModelError("model '" + info_.name + "' has too many modes");
  if (info_.dim == 0 || info_.dim > kMaxStateDim) {
    throw ModelError("model '" + info_.name + "' has unsupported state dimension");
  }
  for (std::size_t i = 0; i < info_.modes.size(); ++i) {
    if (info_.modes[i].id != i) throw ModelError("mode ids must be 0..|M|-1 in order");
  }
  if (info_.invariant_box && info_.invariant_box->dim() != info_.dim) {
    throw ModelError("invariant box dimension does not match the state dimension");
  }
}

void Model::check_mode(ModeId mode) const {
  if (mode >= mode_count()) {
    throw ModelError("mode id " + std::to_string(mode) + " out of range for model '" + name() + "'");
  }
}

void Model::check_state(const StateVec& x) const {
  if (x.size() != dim()) {
    throw ModelError("state dimension " + std::to_string(x.size()) + " does not match model dimension " +
                     std::to_string(dim()));
  }
}

void Model::check_control(const ControlPoint& c) const {
  if (c.u.size() != info_.control_u.dim() || c.v.size() != info_.control_v.dim()) {
    throw ModelError("control dimension does not match the control boxes of model '" + name() + "'");
  }
  constexpr double kTol = 1e-12;
  if (!info_.control_u.contains(c.u, kTol) || !info_.control_v.contains(c.v, kTol)) {
    throw ModelError("control " + to_string(c) + " outside the control boxes");
  }
}

StateVec Model::flow_field(ModeId mode, const StateVec& x, const ControlPoint& c) const {
  check_mode(mode);
  check_state(x);
  check_control(c);
  return do_flow(mode, x, c);
}

double Model::jump_rate(ModeId mode, const StateVec& x, const ControlPoint& c) const {
  check_mode(mode);
  check_state(x);
  check_control(c);
  return do_rate(mode, x, c);
}

ModeDistribution Model::mode_distribution(ModeId mode, const ControlPoint& c) const {
  check_mode(mode);
  check_control(c);
  return do_mode_distribution(mode, c);
}

StateVec Model::jump_map(ModeId from, ModeId to, const StateVec& x, const ControlPoint& c) const {
  check_mode(from);
  check_mode(to);
  check_state(x);
  check_control(c);
  return x + do_jump_offset(from, to, x, c);
}

double Model::running_cost(ModeId mode, const StateVec& x, const ControlPoint& c) const {
  check_mode(mode);
  check_state(x);
  check_control(c);
  return do_cost(mode, x, c);
}

FunctionModel::FunctionModel(ModelInfo info, ModelCallbacks callbacks)
    : Model(std::move(info)), cb_(std::move(callbacks)) {
  if (!cb_.flow || !cb_.rate || !cb_.kernel || !cb_.jump_offset || !cb_.cost) {
    throw ModelError("FunctionModel '" + name() + "' is missing a characteristic callback");
  }
}

StateVec FunctionModel::do_flow(ModeId mode, const StateVec& x, const ControlPoint& c) const {
  return cb_.flow(mode, x, c);
}
double FunctionModel::do_rate(ModeId mode, const StateVec& x, const ControlPoint& c) const {
  return cb_.rate(mode, x, c);
}
ModeDistribution FunctionModel::do_mode_distribution(ModeId mode, const ControlPoint& c) const {
  return cb_.kernel(mode, c);
}
StateVec FunctionModel::do_jump_offset(ModeId from, ModeId to, const StateVec& x, const ControlPoint& c) const {
  return cb_.jump_offset(from, to, x, c);
}
double FunctionModel::do_cost(ModeId mode, const StateVec& x, const ControlPoint& c) const {
  return cb_.cost(mode, x, c);
}

ControlBox point_control_box(std::size_t dim) { return ControlBox{ControlVec(dim, 0.0), ControlVec(dim, 0.0)}; }

ControlBox uniform_control_box(std::size_t dim, double lo, double hi) {
  return ControlBox{ControlVec(dim, lo), ControlVec(dim, hi)};
}

Box uniform_box(std::size_t dim, double lo, double hi) { return Box{StateVec(dim, lo), StateVec(dim, hi)}; }

// ---------------------------------------------------------------------------

const LipschitzEstimate* ValidationReport::find(const std::string& quantity) const {
  auto it = std::find_if(lipschitz.begin(), lipschitz.end(),
                         [&](const LipschitzEstimate& e) { return e.quantity == quantity; });
  return it == lipschitz.end() ? nullptr : &*it;
}

namespace {

constexpr std::size_t kMaxRecordedIssues = 64;

template <std::size_t C>
SmallVec<C> sample_box(Rng& rng, const BasicBox<C>& box) {
  SmallVec<C> out(box.dim());
  for (std::size_t i = 0; i < box.dim(); ++i) out[i] = rng.uniform(box.lo[i], box.hi[i]);
  return out;
}

bool exceeds(double observed, double declared) { return observed > declared * (1.0 + 1e-9) + 1e-12; }

class WorstTracker {
 public:
  void offer(const ValidationIssue& issue) {
    auto it = worst_.find(issue.quantity);
    if (it == worst_.end() || issue.observed > it->second.observed) worst_[issue.quantity] = issue;
  }
  std::vector<ValidationIssue> take() {
    std::vector<ValidationIssue> out;
    for (auto& [_, issue] : worst_) out.push_back(issue);
    return out;
  }
  double observed(const std::string& q) const {
    auto it = worst_.find(q);
    return it == worst_.end() ? 0.0 : it->second.observed;
  }

 private:
  std::map<std::string, ValidationIssue> worst_;
};

}  // namespace

ValidationReport validate_model(const Model& model, std::size_t sample_count, std::uint64_t seed) {
  if (sample_count == 0) throw ArgumentError("validate_model needs at least one sample");
  const ModelInfo& info = model.info();
  const DeclaredBounds& b = info.bounds;
  const Box box = info.invariant_box.value_or(uniform_box(info.dim, -1.0, 1.0));

  ValidationReport report;
  report.samples = sample_count;
  WorstTracker worst;
  Rng rng({seed, 0});

  auto record = [&](std::vector<ValidationIssue>& list, const ValidationIssue& issue) {
    if (list.size() < kMaxRecordedIssues) list.push_back(issue);
  };

  for (std::size_t s = 0; s < sample_count; ++s) {
    const ModeId mode = static_cast<ModeId>(rng.uniform() * static_cast<double>(model.mode_count()));
    const StateVec x = sample_box(rng, box);
    const StateVec y = sample_box(rng, box);
    const ControlPoint c{sample_box(rng, info.control_u), sample_box(rng, info.control_v)};
    const double dxy = distance(x, y);

    auto issue = [&](std::string quantity, double observed, double declared, std::string detail = {}) {
      return ValidationIssue{std::move(quantity), observed, declared, mode, x, y, c, std::move(detail)};
    };
    auto check_bound = [&](const std::string& q, double observed, double declared) {
      ValidationIssue is = issue(q, observed, declared);
      worst.offer(is);
      if (!std::isfinite(observed) || exceeds(observed, declared)) record(report.bound_violations, is);
    };
    auto check_lip = [&](const std::string& q, double diff, double declared) {
      if (dxy <= 0.0) return;
      ValidationIssue is = issue(q, diff / dxy, declared);
      worst.offer(is);
      if (!std::isfinite(diff) || exceeds(diff / dxy, declared)) record(report.lipschitz_violations, is);
    };

    const StateVec fx = model.flow_unchecked(mode, x, c);
    const StateVec fy = model.flow_unchecked(mode, y, c);
    check_bound("f_max", norm(fx), b.f_max);
    check_lip("lip_f", distance(fx, fy), b.lip_f);

    const double lx = model.rate_unchecked(mode, x, c);
    const double ly = model.rate_unchecked(mode, y, c);
    check_bound("lambda_max", lx, b.lambda_max);
    if (lx < 0.0) record(report.bound_violations, issue("lambda_nonnegative", lx, 0.0, "negative jump rate"));
    check_lip("lip_lambda", std::abs(lx - ly), b.lip_lambda);

    const double hx = model.cost_unchecked(mode, x, c);
    const double hy = model.cost_unchecked(mode, y, c);
    check_bound("h_max", std::abs(hx), b.h_max);
    check_lip("lip_h", std::abs(hx - hy), b.lip_h);

    // A model that never jumps has no kernel to check.
    if (b.lambda_max <= 0.0) continue;
    const ModeDistribution q = model.kernel_unchecked(mode, c);
    double total = 0.0;
    bool bad_entry = q.size() != model.mode_count();
    for (std::size_t t = 0; t < q.size(); ++t) {
      total += q[t];
      if (q[t] < 0.0 || !std::isfinite(q[t])) bad_entry = true;
    }
    if (bad_entry || std::abs(total - 1.0) > 1e-12) {
      record(report.kernel_failures, issue("Q0_normalization", total, 1.0, "entries must be >= 0 and sum to 1"));
    }
    if (mode < q.size() && q[mode] != 0.0) {
      record(report.kernel_failures, issue("Q0_self_mass", q[mode], 0.0, "Q0(gamma, u, {gamma}) must be 0"));
    }

    for (ModeId target = 0; target < model.mode_count() && target < q.size(); ++target) {
      if (q[target] <= 0.0) continue;
      const StateVec gx = model.jump_unchecked(mode, target, x, c) - x;
      const StateVec gy = model.jump_unchecked(mode, target, y, c) - y;
      check_bound("g_max", norm(gx), b.g_max);
      check_lip("lip_jump", distance(x + gx, y + gy), b.lip_jump);
    }
  }

  const std::pair<const char*, double> declared[] = {
      {"lip_f", b.lip_f}, {"lip_lambda", b.lip_lambda}, {"lip_jump", b.lip_jump}, {"lip_h", b.lip_h}};
  for (const auto& [q, bound] : declared) report.lipschitz.push_back({q, worst.observed(q), bound});
  report.worst = worst.take();
  return report;
}

}  // namespace pdmp
