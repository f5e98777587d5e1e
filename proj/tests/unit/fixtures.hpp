#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <vector>

#include "pdmp/model.hpp"
#include "pdmp/models.hpp"

namespace fixtures {

using pdmp::ControlPoint;
using pdmp::ModeDistribution;
using pdmp::ModeId;
using pdmp::StateVec;

/// One mode, K = [lo, hi], U = {} and V = [vlo, vhi], no jumps, h(x) = x.
inline pdmp::ModelPtr line_model(std::function<double(double, double)> f, double lo = 0.0, double hi = 1.0,
                                 double vlo = 0.0, double vhi = 1.0, double lip_f = 1.0) {
  pdmp::ModelInfo info;
  info.name = "line";
  info.modes = {{0, "0"}};
  info.dim = 1;
  info.control_u = pdmp::point_control_box(0);
  info.control_v = pdmp::uniform_control_box(1, vlo, vhi);
  info.invariant_box = pdmp::uniform_box(1, lo, hi);
  info.rate_depends_on_control_u_only = true;
  info.bounds.f_max = 10.0;
  info.bounds.h_max = std::max(std::abs(lo), std::abs(hi));
  info.bounds.lip_f = lip_f;
  info.bounds.lip_jump = 1.0;
  info.bounds.lip_h = 1.0;
  pdmp::ModelCallbacks cb;
  cb.flow = [f](ModeId, const StateVec& x, const ControlPoint& c) {
    return StateVec{f(x[0], c.v.empty() ? 0.0 : c.v[0])};
  };
  cb.rate = [](ModeId, const StateVec&, const ControlPoint&) { return 0.0; };
  cb.kernel = [](ModeId, const ControlPoint&) { return ModeDistribution(1, 0.0); };
  cb.jump_offset = [](ModeId, ModeId, const StateVec& x, const ControlPoint&) { return StateVec(x.size(), 0.0); };
  cb.cost = [](ModeId, const StateVec& x, const ControlPoint&) { return x[0]; };
  return std::make_shared<pdmp::FunctionModel>(std::move(info), std::move(cb));
}

/// Two modes swapping at constant rate `rate`, no flow, h = 1 in mode 0.
inline pdmp::ModelPtr constant_rate_model(double rate) {
  pdmp::ToyParams p;
  p.flip_rate = rate;
  return pdmp::toy_model(pdmp::ToyKind::kFlipflop, p);
}

/// Declares h_max = 1 but returns h(x) = 5 x on [0, 1].
inline pdmp::ModelPtr lying_cost_model() {
  pdmp::ModelInfo info;
  info.name = "lying_cost";
  info.modes = {{0, "0"}};
  info.dim = 1;
  info.control_u = pdmp::point_control_box(0);
  info.control_v = pdmp::point_control_box(0);
  info.invariant_box = pdmp::uniform_box(1, 0.0, 1.0);
  info.rate_depends_on_control_u_only = true;
  info.bounds.h_max = 1.0;
  info.bounds.lip_h = 5.0;
  info.bounds.lip_jump = 1.0;
  pdmp::ModelCallbacks cb;
  cb.flow = [](ModeId, const StateVec& x, const ControlPoint&) { return StateVec(x.size(), 0.0); };
  cb.rate = [](ModeId, const StateVec&, const ControlPoint&) { return 0.0; };
  cb.kernel = [](ModeId, const ControlPoint&) { return ModeDistribution(1, 0.0); };
  cb.jump_offset = [](ModeId, ModeId, const StateVec& x, const ControlPoint&) { return StateVec(x.size(), 0.0); };
  cb.cost = [](ModeId, const StateVec& x, const ControlPoint&) { return 5.0 * x[0]; };
  return std::make_shared<pdmp::FunctionModel>(std::move(info), std::move(cb));
}

inline double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

inline double std_error(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1) / v.size());
}

/// Flipflop resolvent oracle: v(A) = (1 + delta / (delta + 2 lambda)) / 2.
inline double flipflop_abel(double delta, double lambda, bool start_a) {
  const double r = delta / (delta + 2.0 * lambda);
  return start_a ? 0.5 * (1.0 + r) : 0.5 * (1.0 - r);
}

}  // namespace fixtures
