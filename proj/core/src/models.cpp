#include "pdmp/models.hpp"

#include <algorithm>
#include <cmath>

#include "pdmp/errors.hpp"

namespace pdmp {

void PhageParams::validate() const {
  const double positives[] = {alpha, u0, k2, k3, k4, kt, k_m2, k_m3, k_m4, n_burst};
  for (double p : positives) {
    if (!(p > 0.0) || !std::isfinite(p)) throw ModelError("phage parameters must be finite and strictly positive");
  }
  if (n_burst < 1.0) throw ModelError("phage burst size n must be >= 1");
}

namespace {

ModelInfo phage_info(const PhageParams& p, const PhageCost& cost) {
  p.validate();
  ModelInfo info;
  info.name = "phage";
  info.modes = {{phage::kDFree, "D_free"},
                {phage::kOR2Active, "OR2_active"},
                {phage::kOR2Spent, "OR2_spent"},
                {phage::kOR3, "OR3"},
                {phage::kBoth, "BOTH"}};
  info.dim = 2;
  info.control_u = uniform_control_box(1, 0.0, 1.0);
  info.control_v = uniform_control_box(1, 0.0, 1.0);
  info.invariant_box = uniform_box(2, 0.0, p.alpha);
  info.rate_depends_on_control_u_only = true;

  const double max_constant = std::max({p.k2 + p.k3, p.k_m2 + p.k4 + p.kt, p.k_m2 + p.k4, p.k_m3, p.k_m4});
  DeclaredBounds& b = info.bounds;
  // |f| peaks at x = (alpha, 0), u = v = 1: (-3 alpha, alpha).
  b.f_max = p.alpha * std::sqrt(10.0);
  b.lambda_max = max_constant * (1.0 + p.u0);
  b.g_max = std::max(1.0, std::min(p.n_burst, p.alpha));
  b.h_max = std::abs(cost.w1) + std::abs(cost.w2);
  // Jacobian uv [[-4 x1/alpha - 1, 2], [2 x1/alpha, -1]]; its spectral norm is
  // convex in x1 and largest at x1 = alpha, where it equals 3 + 2 sqrt(2).
  b.lip_f = 3.0 + 2.0 * std::sqrt(2.0);
  b.lip_lambda = 0.0;
  b.lip_jump = 1.0;
  b.lip_h = std::hypot(cost.w1, cost.w2) / p.alpha;
  return info;
}

}  // namespace

PhageLambdaModel::PhageLambdaModel(const PhageParams& params, const PhageCost& cost)
    : Model(phage_info(params, cost)), params_(params), cost_(cost) {}

double PhageLambdaModel::rate_constant(ModeId mode) const {
  const PhageParams& p = params_;
  switch (mode) {
    case phage::kDFree: return p.k2 + p.k3;
    case phage::kOR2Active: return p.k_m2 + p.k4 + p.kt;
    case phage::kOR2Spent: return p.k_m2 + p.k4;
    case phage::kOR3: return p.k_m3;
    case phage::kBoth: return p.k_m4;
    default: throw ModelError("phage mode id out of range");
  }
}

StateVec PhageLambdaModel::do_flow(ModeId, const StateVec& x, const ControlPoint& c) const {
  const double uv = c.u[0] * c.v[0];
  const double a = params_.alpha;
  const double x1 = x[0];
  const double x2 = x[1];
  return StateVec{uv * (-2.0 * x1 * x1 / a + 2.0 * x2 - x1), uv * (x1 * x1 / a - x2)};
}

double PhageLambdaModel::do_rate(ModeId mode, const StateVec&, const ControlPoint& c) const {
  return rate_constant(mode) * (c.u[0] + params_.u0);
}

ModeDistribution PhageLambdaModel::do_mode_distribution(ModeId mode, const ControlPoint&) const {
  const PhageParams& p = params_;
  ModeDistribution q(5, 0.0);
  switch (mode) {
    case phage::kDFree: {
      const double s = p.k2 + p.k3;
      q[phage::kOR2Active] = p.k2 / s;
      q[phage::kOR3] = p.k3 / s;
      break;
    }
    case phage::kOR2Active: {
      const double s = p.k_m2 + p.k4 + p.kt;
      q[phage::kDFree] = p.k_m2 / s;
      q[phage::kBoth] = p.k4 / s;
      q[phage::kOR2Spent] = p.kt / s;
      break;
    }
    case phage::kOR2Spent: {
      const double s = p.k_m2 + p.k4;
      q[phage::kDFree] = p.k_m2 / s;
      q[phage::kBoth] = p.k4 / s;
      break;
    }
    case phage::kOR3: q[phage::kDFree] = 1.0; break;
    case phage::kBoth: q[phage::kOR2Active] = 1.0; break;
    default: throw ModelError("phage mode id out of range");
  }
  return q;
}

StateVec PhageLambdaModel::do_jump_offset(ModeId from, ModeId to, const StateVec& x, const ControlPoint&) const {
  const double a = params_.alpha;
  const StateVec bind{0.0, -std::min(1.0, x[1])};       // one dimer consumed
  const StateVec release{0.0, std::min(1.0, a - x[1])};  // one dimer released
  switch (from) {
    case phage::kDFree:
      if (to == phage::kOR2Active || to == phage::kOR3) return bind;
      break;
    case phage::kOR2Active:
    case phage::kOR2Spent:
      if (to == phage::kDFree) return release;
      if (to == phage::kBoth) return bind;
      if (from == phage::kOR2Active && to == phage::kOR2Spent) {
        return StateVec{std::min(params_.n_burst, a - x[0]), 0.0};
      }
      break;
    case phage::kOR3:
      if (to == phage::kDFree) return release;
      break;
    case phage::kBoth:
      if (to == phage::kOR2Active) return release;
      break;
    default: throw ModelError("phage mode id out of range");
  }
  return StateVec{0.0, 0.0};
}

double PhageLambdaModel::do_cost(ModeId, const StateVec& x, const ControlPoint&) const {
  return (cost_.w1 * x[0] + cost_.w2 * x[1]) / params_.alpha;
}

ModelPtr phage_lambda_model(const PhageParams& params, const PhageCost& cost) {
  return std::make_shared<PhageLambdaModel>(params, cost);
}

// ---------------------------------------------------------------------------

namespace {

ModelInfo one_dim_info(std::string name, std::size_t modes, std::size_t u_dim) {
  ModelInfo info;
  info.name = std::move(name);
  for (std::size_t i = 0; i < modes; ++i) info.modes.push_back({i, modes == 1 ? "0" : (i == 0 ? "A" : "B")});
  info.dim = 1;
  info.control_u = u_dim ? uniform_control_box(u_dim, 0.0, 1.0) : point_control_box(0);
  info.control_v = point_control_box(0);
  info.invariant_box = uniform_box(1, 0.0, 1.0);
  info.rate_depends_on_control_u_only = true;
  info.bounds.lip_jump = 1.0;
  return info;
}

ModeDistribution no_jumps(ModeId, const ControlPoint&) { return ModeDistribution(1, 0.0); }
StateVec zero_offset(ModeId, ModeId, const StateVec& x, const ControlPoint&) { return StateVec(x.size(), 0.0); }
double zero_rate(ModeId, const StateVec&, const ControlPoint&) { return 0.0; }

}  // namespace

ModelPtr toy_model(ToyKind kind, const ToyParams& params) {
  switch (kind) {
    case ToyKind::kConstantCost: {
      ModelInfo info = one_dim_info("constant_cost", 1, 0);
      info.bounds.h_max = std::abs(params.cost_constant);
      const double c = params.cost_constant;
      return std::make_shared<FunctionModel>(
          info, ModelCallbacks{[](ModeId, const StateVec& x, const ControlPoint&) { return StateVec(x.size(), 0.0); },
                               zero_rate, no_jumps, zero_offset,
                               [c](ModeId, const StateVec&, const ControlPoint&) { return c; }});
    }
    case ToyKind::kDecay1d: {
      ModelInfo info = one_dim_info("decay_1d", 1, 0);
      info.bounds.f_max = 1.0;
      info.bounds.lip_f = 1.0;
      info.bounds.h_max = 1.0;
      info.bounds.lip_h = 1.0;
      return std::make_shared<FunctionModel>(
          info, ModelCallbacks{[](ModeId, const StateVec& x, const ControlPoint&) { return StateVec{-x[0]}; },
                               zero_rate, no_jumps, zero_offset,
                               [](ModeId, const StateVec& x, const ControlPoint&) { return x[0]; }});
    }
    case ToyKind::kControlledDecay: {
      ModelInfo info = one_dim_info("controlled_decay", 1, 1);
      info.bounds.f_max = 1.0;
      info.bounds.lip_f = 1.0;
      info.bounds.h_max = 1.0;
      info.bounds.lip_h = 1.0;
      return std::make_shared<FunctionModel>(
          info,
          ModelCallbacks{[](ModeId, const StateVec& x, const ControlPoint& c) { return StateVec{-c.u[0] * x[0]}; },
                         zero_rate, no_jumps, zero_offset,
                         [](ModeId, const StateVec& x, const ControlPoint&) { return x[0]; }});
    }
    case ToyKind::kFlipflop: {
      if (!(params.flip_rate >= 0.0)) throw ModelError("flipflop rate must be nonnegative");
      ModelInfo info = one_dim_info("flipflop", 2, 0);
      info.bounds.lambda_max = params.flip_rate;
      info.bounds.h_max = 1.0;
      const double rate = params.flip_rate;
      return std::make_shared<FunctionModel>(
          info, ModelCallbacks{[](ModeId, const StateVec& x, const ControlPoint&) { return StateVec(x.size(), 0.0); },
                               [rate](ModeId, const StateVec&, const ControlPoint&) { return rate; },
                               [](ModeId mode, const ControlPoint&) {
                                 ModeDistribution q(2, 0.0);
                                 q[1 - mode] = 1.0;
                                 return q;
                               },
                               zero_offset,
                               [](ModeId mode, const StateVec&, const ControlPoint&) { return mode == 0 ? 1.0 : 0.0; }});
    }
  }
  throw ModelError("unknown toy kind");
}

ToyKind parse_toy_kind(const std::string& name) {
  if (name == "constant_cost") return ToyKind::kConstantCost;
  if (name == "decay_1d") return ToyKind::kDecay1d;
  if (name == "flipflop") return ToyKind::kFlipflop;
  if (name == "controlled_decay") return ToyKind::kControlledDecay;
  throw ModelError("unknown toy model '" + name + "'");
}

std::string toy_kind_name(ToyKind kind) {
  switch (kind) {
    case ToyKind::kConstantCost: return "constant_cost";
    case ToyKind::kDecay1d: return "decay_1d";
    case ToyKind::kFlipflop: return "flipflop";
    case ToyKind::kControlledDecay: return "controlled_decay";
  }
  return "unknown";
}

}  // namespace pdmp
