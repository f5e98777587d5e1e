#include "pdmp/simulate.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "pdmp/csv.hpp"
#include "pdmp/errors.hpp"

namespace pdmp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

StateVec checked_flow(const Model& model, ModeId mode, const StateVec& x, const ControlPoint& c) {
  StateVec f = model.flow_unchecked(mode, x, c);
  if (!all_finite(f)) throw IntegrationError("non-finite vector field at state " + to_string(x));
  return f;
}

struct AugmentedStep {
  StateVec x;
  double hazard = 0.0;
};

/// RK4 on (x, Lambda) with dLambda/dt = lambda(mode, x, c).
AugmentedStep augmented_rk4(const Model& model, ModeId mode, const StateVec& x, const StateVec& f0,
                            const ControlPoint& c, double h) {
  const StateVec k2 = checked_flow(model, mode, x + (0.5 * h) * f0, c);
  const StateVec k3 = checked_flow(model, mode, x + (0.5 * h) * k2, c);
  const StateVec k4 = checked_flow(model, mode, x + h * k3, c);
  const double l1 = model.rate_unchecked(mode, x, c);
  const double l2 = model.rate_unchecked(mode, x + (0.5 * h) * f0, c);
  const double l3 = model.rate_unchecked(mode, x + (0.5 * h) * k2, c);
  const double l4 = model.rate_unchecked(mode, x + h * k3, c);
  AugmentedStep out;
  out.x = x + (h / 6.0) * (f0 + 2.0 * k2 + 2.0 * k3 + k4);
  out.hazard = h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
  return out;
}

StateVec rk4_from(const Model& model, ModeId mode, const StateVec& x, const StateVec& f0, const ControlPoint& c,
                  double h) {
  const StateVec k2 = checked_flow(model, mode, x + (0.5 * h) * f0, c);
  const StateVec k3 = checked_flow(model, mode, x + (0.5 * h) * k2, c);
  const StateVec k4 = checked_flow(model, mode, x + h * k3, c);
  return x + (h / 6.0) * (f0 + 2.0 * k2 + 2.0 * k3 + k4);
}

StateVec hermite_mid(const StateVec& x0, const StateVec& x1, const StateVec& f0, const StateVec& f1, double h) {
  return 0.5 * (x0 + x1) + (h / 8.0) * (f0 - f1);
}

class InvarianceGuard {
 public:
  InvarianceGuard(const Model& model, const SimulationOptions& options, PathSummary& summary)
      : box_(model.info().invariant_box ? &*model.info().invariant_box : nullptr),
        options_(options),
        summary_(summary) {}

  /// Returns true when x was modified.
  bool operator()(StateVec& x, double t) {
    if (!all_finite(x)) throw IntegrationError("non-finite state " + to_string(x) + " at t=" + format_real(t));
    if (!box_) return false;
    const double e = box_->excess(x);
    summary_.max_excess = std::max(summary_.max_excess, e);
    if (e <= options_.invariance_tolerance) return false;
    if (options_.invariance == InvarianceMode::kAssert) {
      throw InvarianceError("state " + to_string(x) + " left the invariant box by " + format_real(e) +
                                " at t=" + format_real(t),
                            t);
    }
    x = box_->clamp(x);
    ++summary_.clamp_events;
    return true;
  }

 private:
  const Box* box_;
  const SimulationOptions& options_;
  PathSummary& summary_;
};

struct SegmentOutcome {
  bool jumped = false;
  double elapsed = 0.0;
  StateVec x;
  ControlPoint control;
};

struct CellSpec {
  ControlPoint control;
  double end = kInf;  ///< end of the cell in time since the segment start
};

/// Integrates one inter-jump interval starting at absolute time t_abs0
/// until the cumulative hazard reaches `threshold` or `max_duration`
/// elapses. cells(cell, s, x) returns the control on cell `cell`, which
/// starts at segment time s in state x, and the cell's end.
template <typename Cells, typename OnSubstep>
SegmentOutcome run_segment(const Model& model, ModeId mode, StateVec x, double t_abs0, double max_duration,
                           double threshold, Cells&& cells, OnSubstep&& on_substep, InvarianceGuard& guard,
                           const SimulationOptions& opt) {
  const bool closed_form = model.restricted_framework();
  double s = 0.0;
  double hazard = 0.0;
  ControlPoint c;
  for (std::size_t cell = 0; s < max_duration; ++cell) {
    CellSpec spec = cells(cell, s, x);
    c = std::move(spec.control);
    const double cell_end = std::min(spec.end, max_duration);
    const double span = cell_end - s;
    if (!(span > 0.0)) continue;
    const auto m = static_cast<std::size_t>(std::max(1.0, std::ceil(span / opt.ode_step - 1e-9)));
    const double h = span / static_cast<double>(m);
    const double rate = closed_form ? model.rate_unchecked(mode, x, c) : 0.0;
    StateVec f0 = checked_flow(model, mode, x, c);
    for (std::size_t i = 0; i < m; ++i) {
      const double t0 = s;
      const double t1 = i + 1 == m ? cell_end : s + h;
      const double hh = t1 - t0;
      StateVec x1;
      double tau = -1.0;
      if (closed_form) {
        if (hazard + rate * hh >= threshold) {
          tau = std::clamp((threshold - hazard) / rate, 0.0, hh);
          x1 = rk4_from(model, mode, x, f0, c, tau);
        } else {
          x1 = rk4_from(model, mode, x, f0, c, hh);
          hazard += rate * hh;
        }
      } else {
        const AugmentedStep full = augmented_rk4(model, mode, x, f0, c, hh);
        if (hazard + full.hazard >= threshold) {
          double lo = 0.0;
          double hi = hh;
          StateVec x_hi = full.x;
          while (hi - lo > opt.time_tolerance) {
            const double mid = 0.5 * (lo + hi);
            const AugmentedStep part = augmented_rk4(model, mode, x, f0, c, mid);
            if (hazard + part.hazard >= threshold) {
              hi = mid;
              x_hi = part.x;
            } else {
              lo = mid;
            }
          }
          tau = hi;
          x1 = x_hi;
        } else {
          x1 = full.x;
          hazard += full.hazard;
        }
      }
      const double step = tau >= 0.0 ? tau : hh;
      const double t_end = t0 + step;
      if (step > 0.0) {
        guard(x1, t_abs0 + t_end);
        const StateVec f1 = checked_flow(model, mode, x1, c);
        on_substep(Substep{mode, t_abs0 + t0, t_abs0 + t_end, x, hermite_mid(x, x1, f0, f1, step), x1, c, 0});
        f0 = f1;
        x = x1;
      }
      if (tau >= 0.0) return {true, t_end, x, c};
      s = t1;
    }
  }
  return {false, max_duration, x, c};
}

}  // namespace

std::array<double, 3> discounted_simpson_weights(double delta, double t0, double t1) {
  const double h = t1 - t0;
  const double w0 = std::exp(-delta * t0);
  const double wm = 4.0 * std::exp(-delta * (t0 + 0.5 * h));
  const double w1 = std::exp(-delta * t1);
  const double scale = -w0 * std::expm1(-delta * h) / (w0 + wm + w1);
  return {scale * w0, scale * wm, scale * w1};
}

std::size_t ControlSchedule::piece(double t) const {
  std::size_t i = 0;
  while (i + 1 < breakpoints.size() && t > breakpoints[i + 1]) ++i;
  return i;
}

namespace {

void check_schedule(const ControlSchedule& control) {
  if (control.breakpoints.empty() || control.breakpoints.front() != 0.0 ||
      control.breakpoints.size() != control.controls.size()) {
    throw ArgumentError("control schedule needs breakpoints starting at 0, one per control");
  }
  for (std::size_t i = 1; i < control.breakpoints.size(); ++i) {
    if (!(control.breakpoints[i] > control.breakpoints[i - 1])) {
      throw ArgumentError("control schedule breakpoints must increase");
    }
  }
}

auto schedule_cells(const ControlSchedule& control) {
  return [&control](std::size_t cell, double, const StateVec&) {
    const std::size_t i = std::min(cell, control.controls.size() - 1);
    const double end = i + 1 < control.breakpoints.size() ? control.breakpoints[i + 1] : kInf;
    return CellSpec{control.controls[i], end};
  };
}

}  // namespace

StateVec rk4_step(const Model& model, ModeId mode, const StateVec& x, const ControlPoint& c, double h) {
  return rk4_from(model, mode, x, checked_flow(model, mode, x, c), c, h);
}

DensePath integrate_flow(const Model& model, ModeId mode, const StateVec& x0, const ControlSchedule& control,
                         double duration, double step) {
  model.check_mode(mode);
  model.check_state(x0);
  check_schedule(control);
  for (const ControlPoint& c : control.controls) model.check_control(c);
  if (!(duration >= 0.0)) throw ArgumentError("integration duration must be nonnegative");
  if (!(step > 0.0)) throw ArgumentError("integration step must be positive");

  SimulationOptions opt;
  opt.ode_step = step;
  opt.invariance_tolerance = kInf;
  PathSummary summary;
  InvarianceGuard guard(model, opt, summary);
  DensePath path{{0.0}, {x0}};
  // Rates play no part here; an infinite threshold never triggers a jump.
  run_segment(model, mode, x0, 0.0, duration, kInf, schedule_cells(control),
              [&](const Substep& s) {
                path.times.push_back(s.t1);
                path.states.push_back(s.x1);
              },
              guard, opt);
  return path;
}

JumpDraw sample_jump_time(const Model& model, ModeId mode, const StateVec& x0, const ControlSchedule& control,
                          double cap, Rng& rng, const SimulationOptions& options) {
  model.check_mode(mode);
  model.check_state(x0);
  check_schedule(control);
  if (!(cap >= 0.0)) throw ArgumentError("jump-time cap must be nonnegative");
  PathSummary summary;
  InvarianceGuard guard(model, options, summary);
  const double threshold = rng.exponential();
  const SegmentOutcome out =
      run_segment(model, mode, x0, 0.0, cap, threshold, schedule_cells(control), [](const Substep&) {}, guard, options);
  JumpDraw draw;
  if (out.jumped) draw.time = out.elapsed;
  draw.pre_state = out.x;
  draw.control = out.control;
  return draw;
}

ModeId sample_mode(const ModeDistribution& q, double uniform) {
  double total = 0.0;
  for (double p : q) total += p;
  if (!(total > 0.0)) throw ModelError("mode distribution has no mass");
  const double target = uniform * total;
  double cumulative = 0.0;
  ModeId last = 0;
  for (ModeId t = 0; t < q.size(); ++t) {
    if (q[t] <= 0.0) continue;
    cumulative += q[t];
    last = t;
    if (target < cumulative) return t;
  }
  return last;
}

std::pair<ModeId, StateVec> sample_post_jump(const Model& model, ModeId mode, const StateVec& x_pre,
                                             const ControlPoint& c, Rng& rng) {
  const ModeDistribution q = model.mode_distribution(mode, c);
  const ModeId target = sample_mode(q, rng.uniform());
  return {target, model.jump_map(mode, target, x_pre, c)};
}

void check_start(const Model& model, ModeId mode0, const StateVec& x0) {
  model.check_mode(mode0);
  model.check_state(x0);
  if (!all_finite(x0)) throw ArgumentError("initial state must be finite");
  const auto& box = model.info().invariant_box;
  if (box && !box->contains(x0, 1e-12)) {
    throw ArgumentError("initial state " + to_string(x0) + " lies outside the invariant box");
  }
}

PathSummary simulate_path(const Model& model, ModeId mode0, const StateVec& x0, const Policy& policy,
                          double horizon, Rng& rng, const SimulationOptions& options, PathObserver& observer) {
  check_start(model, mode0, x0);
  if (!(horizon > 0.0)) throw ArgumentError("simulation horizon must be positive");
  if (!(options.ode_step > 0.0)) throw ArgumentError("ODE step must be positive");

  PathSummary summary;
  InvarianceGuard guard(model, options, summary);
  ModeId mode = mode0;
  StateVec x = x0;
  StateVec y_jump = x0;
  double t = 0.0;
  std::size_t k = 0;
  const double cell_length = policy.cell_length();

  for (;;) {
    const double threshold = rng.exponential();
    auto cells = [&](std::size_t cell, double s, const StateVec& current) {
      const double end = cell_length == 0.0 ? s + options.ode_step : static_cast<double>(cell + 1) * cell_length;
      return CellSpec{policy.cell_control(mode, y_jump, current, cell, k), end};
    };
    const SegmentOutcome out = run_segment(
        model, mode, x, t, horizon - t, threshold, cells,
        [&](const Substep& s) {
          Substep tagged = s;
          tagged.jump_index = k;
          observer.on_substep(tagged);
        },
        guard, options);
    if (!out.jumped) {
      x = out.x;
      break;
    }
    t += out.elapsed;
    const ModeDistribution q = model.kernel_unchecked(mode, out.control);
    const ModeId target = sample_mode(q, rng.uniform());
    StateVec post = model.jump_unchecked(mode, target, out.x, out.control);
    guard(post, t);
    ++k;
    if (k > options.max_jumps) throw IntegrationError("path exceeded the maximum number of jumps");
    observer.on_jump(JumpEvent{t, k, mode, target, out.x, post, out.control});
    mode = target;
    x = post;
    y_jump = post;
  }
  summary.jumps = k;
  summary.final_mode = mode;
  summary.final_state = x;
  observer.on_end(horizon, mode, x);
  return summary;
}

namespace {

class RecordingObserver final : public PathObserver {
 public:
  explicit RecordingObserver(Trajectory& traj) : traj_(traj) {}

  void on_substep(const Substep& s) override {
    Segment& seg = traj_.segments.back();
    seg.times.push_back(s.t1);
    seg.states.push_back(s.x1);
    seg.controls.push_back(s.control);
  }

  void on_jump(const JumpEvent& e) override {
    traj_.jump_times.push_back(e.time);
    traj_.modes.push_back(e.to);
    traj_.states.push_back(e.post);
    traj_.segments.push_back(Segment{e.to, {e.time}, {e.post}, {}});
  }

 private:
  Trajectory& traj_;
};

}  // namespace

Trajectory simulate_trajectory(const Model& model, ModeId mode0, const StateVec& x0, const Policy& policy,
                               double horizon, RngStream stream, const SimulationOptions& options) {
  policy.check_against(model);
  Trajectory traj;
  traj.horizon = horizon;
  traj.stream = stream;
  traj.jump_times = {0.0};
  traj.modes = {mode0};
  traj.states = {x0};
  traj.segments.push_back(Segment{mode0, {0.0}, {x0}, {}});
  Rng rng(stream);
  RecordingObserver recorder(traj);
  traj.summary = simulate_path(model, mode0, x0, policy, horizon, rng, options, recorder);
  return traj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const std::size_t n = traj.states.empty() ? 0 : traj.states.front().size();
  std::size_t nu = 0;
  std::size_t nv = 0;
  for (const Segment& seg : traj.segments) {
    if (!seg.controls.empty()) {
      nu = seg.controls.front().u.size();
      nv = seg.controls.front().v.size();
      break;
    }
  }
  std::vector<std::string> cols{"t", "mode_id"};
  for (std::size_t i = 1; i <= n; ++i) cols.push_back("x_" + std::to_string(i));
  for (std::size_t i = 1; i <= nu; ++i) cols.push_back("u_" + std::to_string(i));
  for (std::size_t i = 1; i <= nv; ++i) cols.push_back("v_" + std::to_string(i));
  cols.push_back("event");
  write_csv_header(out, cols);

  for (std::size_t k = 0; k < traj.segments.size(); ++k) {
    const Segment& seg = traj.segments[k];
    for (std::size_t i = 0; i < seg.times.size(); ++i) {
      CsvRow row;
      row.add(seg.times[i]).add(seg.mode);
      for (double xi : seg.states[i]) row.add(xi);
      // The control shown on a sample is the one that drove the flow into it.
      const ControlPoint* c = i > 0 ? &seg.controls[i - 1] : (seg.controls.empty() ? nullptr : &seg.controls[0]);
      for (std::size_t j = 0; j < nu; ++j) c ? row.add(c->u[j]) : row.add("");
      for (std::size_t j = 0; j < nv; ++j) c ? row.add(c->v[j]) : row.add("");
      row.add(i == 0 && k > 0 ? "jump" : (i == 0 ? "start" : "flow"));
      row.write(out);
    }
  }
}

}  // namespace pdmp
