#include "pdmp/coupling.hpp"

#include <cmath>
#include <ostream>

#include "pdmp/csv.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/parallel.hpp"

namespace pdmp {

Defect selection_defect(const Model& model, ModeId mode, const StateVec& x, const StateVec& y, const ControlVec& u,
                        const ControlVec& v, const ControlVec& w) {
  const ControlPoint cx{u, v};
  const ControlPoint cy{u, w};
  const StateVec diff = x - y;
  const double dist = norm(diff);
  Defect d;
  d.flow = dot(model.flow_unchecked(mode, x, cx) - model.flow_unchecked(mode, y, cy), diff);
  d.cost = std::abs(model.cost_unchecked(mode, x, cx) - model.cost_unchecked(mode, y, cy)) -
           model.bounds().lip_h * dist;
  d.jump = -std::numeric_limits<double>::infinity();
  const ModeDistribution q = model.kernel_unchecked(mode, cx);
  for (ModeId theta = 0; theta < q.size(); ++theta) {
    if (!(q[theta] > 0.0)) continue;
    const double gap = distance(model.jump_unchecked(mode, theta, x, cx), model.jump_unchecked(mode, theta, y, cy));
    d.jump = std::max(d.jump, gap - dist);
  }
  // A mode that never jumps imposes no jump constraint.
  if (!std::isfinite(d.jump)) d.jump = 0.0;
  return d;
}

Selection select_w_hat(const Model& model, ModeId mode, const StateVec& x, const StateVec& y, const ControlVec& u,
                       const ControlVec& v, const std::vector<ControlVec>& v_grid, double tolerance) {
  std::vector<Defect> defects;
  defects.reserve(v_grid.size() + 1);
  defects.push_back(selection_defect(model, mode, x, y, u, v, v));
  double best = defects.front().max();
  for (const ControlVec& w : v_grid) {
    defects.push_back(selection_defect(model, mode, x, y, u, v, w));
    best = std::min(best, defects.back().max());
  }
  Selection s;
  for (std::size_t i = 0; i < defects.size(); ++i) {
    if (defects[i].max() <= best + 1e-12) {
      s.w = i == 0 ? v : v_grid[i - 1];
      s.defect = defects[i];
      break;
    }
  }
  s.feasible = s.defect.max() <= tolerance;
  return s;
}

std::vector<ControlVec> uniform_v_grid(const Model& model, std::size_t points_per_dim) {
  const ControlBox& box = model.info().control_v;
  std::vector<std::vector<double>> levels;
  for (std::size_t d = 0; d < box.dim(); ++d) {
    levels.push_back(box.lo[d] == box.hi[d] ? std::vector<double>{box.lo[d]}
                                            : linspace(box.lo[d], box.hi[d], points_per_dim));
  }
  std::vector<ControlVec> out;
  for (const ControlPoint& c : control_grid(levels, {})) out.push_back(c.u);
  return out;
}

namespace {

double box_diameter(const Model& model) {
  const auto& box = model.info().invariant_box;
  if (!box) throw ModelError("coupling needs an invariant box");
  return distance(box->lo, box->hi);
}

void require_restricted(const Model& model) {
  if (!model.restricted_framework()) {
    throw ModelError("coupling needs jump rates and kernels that depend on (mode, u) only; model '" + model.name() +
                     "' does not declare that");
  }
}

void offer(DefectWitness& w, double value, ModeId mode, const StateVec& x, const StateVec& y, const ControlVec& u,
           const ControlVec& v, const ControlVec& wc) {
  if (value > w.value) w = DefectWitness{value, mode, x, y, u, v, wc};
}

template <std::size_t C>
SmallVec<C> sample(Rng& rng, const BasicBox<C>& box) {
  SmallVec<C> out(box.dim());
  for (std::size_t i = 0; i < box.dim(); ++i) out[i] = rng.uniform(box.lo[i], box.hi[i]);
  return out;
}

}  // namespace

NonexpReport check_nonexpansive_condition(const Model& model, std::size_t n_samples,
                                          const std::vector<ControlVec>& v_grid, std::uint64_t seed,
                                          double tolerance, std::size_t threads) {
  require_restricted(model);
  if (n_samples == 0) throw ArgumentError("need at least one sample");
  const auto& box_opt = model.info().invariant_box;
  if (!box_opt) throw ModelError("the nonexpansive check samples from the invariant box; the model has none");
  const Box box = *box_opt;
  constexpr std::size_t kBlock = 1024;
  const std::size_t blocks = (n_samples + kBlock - 1) / kBlock;
  std::vector<NonexpReport> partial(blocks);
  parallel_for(blocks, threads, [&](std::size_t b) {
    Rng rng({seed, b});
    NonexpReport& r = partial[b];
    const std::size_t end = std::min(n_samples, (b + 1) * kBlock);
    for (std::size_t s = b * kBlock; s < end; ++s) {
      const auto mode = static_cast<ModeId>(rng.uniform() * static_cast<double>(model.mode_count()));
      const StateVec x = sample(rng, box);
      const StateVec y = sample(rng, box);
      const ControlVec u = sample(rng, model.info().control_u);
      const ControlVec v = sample(rng, model.info().control_v);
      const Selection sel = select_w_hat(model, mode, x, y, u, v, v_grid, tolerance);
      offer(r.worst_flow_gap, sel.defect.flow, mode, x, y, u, v, sel.w);
      offer(r.worst_jump_gap, sel.defect.jump, mode, x, y, u, v, sel.w);
      offer(r.worst_cost_gap, sel.defect.cost, mode, x, y, u, v, sel.w);
      offer(r.worst_defect, sel.defect.max(), mode, x, y, u, v, sel.w);
      offer(r.worst_w_equals_v, selection_defect(model, mode, x, y, u, v, v).max(), mode, x, y, u, v, v);
    }
  });
  NonexpReport report;
  report.samples = n_samples;
  report.tolerance = tolerance;
  for (const NonexpReport& r : partial) {
    auto merge = [](DefectWitness& into, const DefectWitness& from) {
      if (from.value > into.value) into = from;
    };
    merge(report.worst_flow_gap, r.worst_flow_gap);
    merge(report.worst_jump_gap, r.worst_jump_gap);
    merge(report.worst_cost_gap, r.worst_cost_gap);
    merge(report.worst_defect, r.worst_defect);
    merge(report.worst_w_equals_v, r.worst_w_equals_v);
  }
  report.pass = report.worst_defect.value <= tolerance;
  return report;
}

// ---------------------------------------------------------------------------
// Coupled simulation

namespace {

StateVec flow_checked(const Model& model, ModeId mode, const StateVec& x, const ControlPoint& c) {
  StateVec f = model.flow_unchecked(mode, x, c);
  if (!all_finite(f)) throw IntegrationError("non-finite vector field at state " + to_string(x));
  return f;
}

/// RK4 step of length h that also returns the end-point slope for the
/// Hermite midpoint.
struct Advance {
  StateVec x1;
  StateVec xm;
  StateVec f1;
};

Advance advance(const Model& model, ModeId mode, const StateVec& x, const StateVec& f0, const ControlPoint& c,
                double h) {
  const StateVec k2 = flow_checked(model, mode, x + (0.5 * h) * f0, c);
  const StateVec k3 = flow_checked(model, mode, x + (0.5 * h) * k2, c);
  const StateVec k4 = flow_checked(model, mode, x + h * k3, c);
  Advance a;
  a.x1 = x + (h / 6.0) * (f0 + 2.0 * k2 + 2.0 * k3 + k4);
  a.f1 = flow_checked(model, mode, a.x1, c);
  a.xm = 0.5 * (x + a.x1) + (h / 8.0) * (f0 - a.f1);
  return a;
}

void guard_state(const Model& model, const SimulationOptions& opt, StateVec& x, double t) {
  if (!all_finite(x)) throw IntegrationError("non-finite state " + to_string(x) + " at t=" + format_real(t));
  const auto& box = model.info().invariant_box;
  if (!box) return;
  const double e = box->excess(x);
  if (e <= opt.invariance_tolerance) return;
  if (opt.invariance == InvarianceMode::kAssert) {
    throw InvarianceError("coupled state " + to_string(x) + " left the invariant box by " + format_real(e) +
                              " at t=" + format_real(t),
                          t);
  }
  x = box->clamp(x);
}

}  // namespace

CoupledSummary run_coupled_path(const Model& model, ModeId mode0, const StateVec& x0, const StateVec& y0,
                                const Policy& policy, unsigned n, double horizon, Rng& rng,
                                const CouplingOptions& options, CoupledObserver& observer) {
  require_restricted(model);
  check_start(model, mode0, x0);
  check_start(model, mode0, y0);
  policy.check_against(model);
  if (n == 0) throw ArgumentError("coupling step parameter n must be positive");
  if (!(horizon > 0.0)) throw ArgumentError("coupling horizon must be positive");
  const PolicyKind kind = policy.kind();
  if (kind == PolicyKind::kFeedbackGrid) {
    throw ArgumentError("coupling needs a constant or stepped policy; feedback-grid controls change every ODE step");
  }
  const unsigned policy_n = kind == PolicyKind::kConstant ? 0 : policy.n();
  if (policy_n != 0 && n % policy_n != 0) {
    throw ArgumentError("coupling n must be a multiple of the policy's step parameter");
  }
  const std::vector<ControlVec> grid = options.v_grid.empty() ? uniform_v_grid(model) : options.v_grid;
  const SimulationOptions& sim = options.simulation;
  const double cell_length = 1.0 / static_cast<double>(n);

  CoupledSummary summary;
  summary.sup_gap = distance(x0, y0);
  ModeId mode = mode0;
  StateVec x = x0;
  StateVec y = y0;
  StateVec y_jump = x0;  // X's post-jump state, which the policy sees
  double t = 0.0;
  std::size_t k = 0;

  for (;;) {
    const double threshold = rng.exponential();
    const double remaining = horizon - t;
    double hazard = 0.0;
    double s = 0.0;
    bool jumped = false;
    ControlPoint cx;
    ControlPoint cy;
    std::size_t policy_cell = std::numeric_limits<std::size_t>::max();
    for (std::size_t j = 0; s < remaining && !jumped; ++j) {
      const double cell_end = std::min(static_cast<double>(j + 1) * cell_length, remaining);
      const double span = cell_end - s;
      if (!(span > 0.0)) continue;
      const std::size_t pc = policy_n == 0 ? 0 : j * policy_n / n;
      if (pc != policy_cell) {
        cx = policy.cell_control(mode, y_jump, x, pc, k);
        policy_cell = pc;
      }
      const Selection sel = select_w_hat(model, mode, x, y, cx.u, cx.v, grid, options.tolerance);
      ++summary.refreshes;
      summary.worst_selection_defect = std::max(summary.worst_selection_defect, sel.defect.max());
      if (!sel.feasible) {
        throw SelectionError("no nonexpansive response control at t=" + format_real(t + s) + " (defect " +
                                 format_real(sel.defect.max()) + ")",
                             t + s);
      }
      cy = ControlPoint{cx.u, sel.w};
      const double rate = model.rate_unchecked(mode, x, cx);
      const auto m = static_cast<std::size_t>(std::max(1.0, std::ceil(span / sim.ode_step - 1e-9)));
      const double h = span / static_cast<double>(m);
      StateVec fx = flow_checked(model, mode, x, cx);
      StateVec fy = flow_checked(model, mode, y, cy);
      for (std::size_t i = 0; i < m; ++i) {
        const double t0 = s;
        const double t1 = i + 1 == m ? cell_end : s + h;
        double step = t1 - t0;
        if (hazard + rate * step >= threshold) {
          step = std::clamp((threshold - hazard) / rate, 0.0, step);
          jumped = true;
        } else {
          hazard += rate * step;
        }
        if (step > 0.0) {
          Advance ax = advance(model, mode, x, fx, cx, step);
          Advance ay = advance(model, mode, y, fy, cy, step);
          guard_state(model, sim, ax.x1, t + t0 + step);
          guard_state(model, sim, ay.x1, t + t0 + step);
          observer.on_substep(Substep{mode, t + t0, t + t0 + step, x, ax.xm, ax.x1, cx, k},
                              Substep{mode, t + t0, t + t0 + step, y, ay.xm, ay.x1, cy, k});
          x = ax.x1;
          y = ay.x1;
          fx = ax.f1;
          fy = ay.f1;
          summary.sup_gap = std::max(summary.sup_gap, distance(x, y));
        }
        s = t0 + step;
        if (jumped) break;
      }
    }
    if (!jumped) break;
    t += s;
    const ModeId target = sample_mode(model.kernel_unchecked(mode, cx), rng.uniform());
    StateVec x_post = model.jump_unchecked(mode, target, x, cx);
    StateVec y_post = model.jump_unchecked(mode, target, y, cy);
    guard_state(model, sim, x_post, t);
    guard_state(model, sim, y_post, t);
    ++k;
    if (k > sim.max_jumps) throw IntegrationError("coupled path exceeded the maximum number of jumps");
    observer.on_jump(JumpEvent{t, k, mode, target, x, x_post, cx}, JumpEvent{t, k, mode, target, y, y_post, cy});
    mode = target;
    x = x_post;
    y = y_post;
    y_jump = x_post;
    summary.sup_gap = std::max(summary.sup_gap, distance(x, y));
  }
  summary.jumps = k;
  observer.on_end(horizon, mode, x, y);
  return summary;
}

namespace {

class PairRecorder final : public CoupledObserver {
 public:
  explicit PairRecorder(CoupledPair& pair) : pair_(pair) {}
  void on_substep(const Substep& x, const Substep& y) override {
    pair_.x_path.push_back(x);
    pair_.y_path.push_back(y);
  }
  void on_jump(const JumpEvent& x, const JumpEvent&) override {
    pair_.jump_times.push_back(x.time);
    pair_.modes.push_back(x.to);
  }

 private:
  CoupledPair& pair_;
};

double simpson_gap(const Model& model, const Substep& x, const Substep& y, double delta) {
  auto g = [&](const StateVec& a, const StateVec& b) {
    return std::abs(model.cost_unchecked(x.mode, a, x.control) - model.cost_unchecked(y.mode, b, y.control));
  };
  const auto w = discounted_simpson_weights(delta, x.t0, x.t1);
  return w[0] * g(x.x0, y.x0) + w[1] * g(x.xm, y.xm) + w[2] * g(x.x1, y.x1);
}

double required_c(const Substep& x, const Substep& y, double d0, double k0, unsigned n) {
  const double gap = distance(x.x1, y.x1);
  const double grow = gap * gap - d0 * d0;
  if (grow <= 0.0) return 0.0;
  const double scale = (x.t1 + static_cast<double>(x.jump_index) * (4.0 * k0 + 1.0)) / static_cast<double>(n);
  return grow / scale;
}

class GapIntegrator final : public CoupledObserver {
 public:
  GapIntegrator(const Model& model, double delta, double d0, double k0, unsigned n)
      : model_(model), delta_(delta), d0_(d0), k0_(k0), n_(n) {}
  void on_substep(const Substep& x, const Substep& y) override {
    total_ += simpson_gap(model_, x, y, delta_);
    c_ = std::max(c_, required_c(x, y, d0_, k0_, n_));
  }
  double total() const { return total_; }
  double fitted_c() const { return c_; }

 private:
  const Model& model_;
  double delta_;
  double d0_;
  double k0_;
  unsigned n_;
  double total_ = 0.0;
  double c_ = 0.0;
};

}  // namespace

CoupledPair simulate_coupled(const Model& model, ModeId mode0, const StateVec& x0, const StateVec& y0,
                             const Policy& policy, unsigned n, double horizon, RngStream stream,
                             const CouplingOptions& options) {
  CoupledPair pair;
  pair.n = n;
  pair.horizon = horizon;
  pair.jump_times = {0.0};
  pair.modes = {mode0};
  Rng rng(stream);
  PairRecorder rec(pair);
  pair.summary = run_coupled_path(model, mode0, x0, y0, policy, n, horizon, rng, options, rec);
  return pair;
}

double pair_cost_gap(const Model& model, const CoupledPair& pair, double delta) {
  if (!(delta > 0.0)) throw ArgumentError("discount delta must be positive");
  double total = 0.0;
  for (std::size_t i = 0; i < pair.x_path.size(); ++i) total += simpson_gap(model, pair.x_path[i], pair.y_path[i], delta);
  return total;
}

double fitted_pathwise_constant(const CoupledPair& pair, double k0) {
  if (pair.x_path.empty()) return 0.0;
  const double d0 = distance(pair.x_path.front().x0, pair.y_path.front().x0);
  double c = 0.0;
  for (std::size_t i = 0; i < pair.x_path.size(); ++i) {
    c = std::max(c, required_c(pair.x_path[i], pair.y_path[i], d0, k0, pair.n));
  }
  return c;
}

double coupling_epsilon(const Model& model, double c, double d0, double delta, unsigned n, double k0) {
  if (!(delta > 0.0) || n == 0) throw ArgumentError("coupling_epsilon needs delta > 0 and n > 0");
  if (c <= 0.0) return 0.0;
  const double spread = c * (1.0 + model.bounds().lambda_max * (4.0 * k0 + 1.0)) / (delta * static_cast<double>(n));
  return model.bounds().lip_h * (std::sqrt(d0 * d0 + spread) - d0);
}

CouplingGapResult coupling_gap(const Model& model, ModeId mode0, const StateVec& x0, const StateVec& y0,
                               const Policy& policy, unsigned n, double delta, std::size_t n_paths,
                               std::uint64_t seed, const CouplingOptions& options) {
  if (!(delta > 0.0)) throw ArgumentError("discount delta must be positive");
  if (n_paths == 0) throw ArgumentError("need at least one path");
  const double h_max = model.bounds().h_max;
  const double horizon = std::max(abel_horizon(2.0 * h_max, delta, options.bias), options.simulation.ode_step);
  const double k0 = options.k0 > 0.0 ? options.k0 : box_diameter(model);
  const double d0 = distance(x0, y0);
  CouplingGapResult result;
  result.k0 = k0;
  result.rows.resize(n_paths);
  std::vector<double> samples(n_paths);
  parallel_for(n_paths, options.threads, [&](std::size_t i) {
    Rng rng({seed, i});
    GapIntegrator integ(model, delta, d0, k0, n);
    const CoupledSummary s = run_coupled_path(model, mode0, x0, y0, policy, n, horizon, rng, options, integ);
    samples[i] = integ.total();
    result.rows[i] = CouplingRow{i, n, d0, s.jumps, s.sup_gap, samples[i], integ.fitted_c()};
  });
  result.gap = summarize(samples);
  result.gap.truncation_horizon = horizon;
  result.gap.truncation_bias_bound = 2.0 * h_max * std::exp(-delta * horizon);
  for (const CouplingRow& r : result.rows) {
    result.max_sup_gap = std::max(result.max_sup_gap, r.sup_gap);
    result.fitted_c = std::max(result.fitted_c, r.fitted_c);
  }
  result.epsilon = coupling_epsilon(model, result.fitted_c, d0, delta, n, k0);
  return result;
}

namespace {

class SplitRecorder final : public CoupledObserver {
 public:
  SplitRecorder(OccupationRecorder& x, OccupationRecorder& y) : x_(x), y_(y) {}
  void on_substep(const Substep& xs, const Substep& ys) override {
    x_.on_substep(xs);
    y_.on_substep(ys);
  }
  void on_end(double horizon, ModeId mode, const StateVec& x, const StateVec& y) override {
    x_.on_end(horizon, mode, x);
    y_.on_end(horizon, mode, y);
  }

 private:
  OccupationRecorder& x_;
  OccupationRecorder& y_;
};

}  // namespace

CoupledOccupations coupled_occupations(const Model& model, ModeId mode0, const StateVec& x0, const StateVec& y0,
                                       const Policy& policy, unsigned n, double delta, std::size_t n_paths,
                                       std::uint64_t seed, const CouplingOptions& options, std::size_t max_atoms) {
  if (!(delta > 0.0)) throw ArgumentError("discount delta must be positive");
  if (n_paths == 0) throw ArgumentError("need at least one path");
  const double horizon = std::max(abel_horizon(1.0, delta, options.bias), options.simulation.ode_step);
  const double substeps = std::ceil(horizon / options.simulation.ode_step) + std::ceil(horizon * n) +
                          std::ceil(model.bounds().lambda_max * horizon * 2.0) + 2.0;
  const std::size_t thinning = thinning_factor(static_cast<std::size_t>(3.0 * substeps) * n_paths, max_atoms);

  std::vector<std::vector<Atom>> xa(n_paths), ya(n_paths);
  std::vector<Atom> xt(n_paths), yt(n_paths);
  const double w = 1.0 / static_cast<double>(n_paths);
  const std::uint64_t thin_x = derive_seed(seed, 0x78ULL);
  const std::uint64_t thin_y = derive_seed(seed, 0x79ULL);
  parallel_for(n_paths, options.threads, [&](std::size_t i) {
    Rng rng({seed, i});
    Rng rx({thin_x, i});
    Rng ry({thin_y, i});
    OccupationRecorder recx(delta, w, static_cast<std::uint32_t>(i), thinning, &rx);
    OccupationRecorder recy(delta, w, static_cast<std::uint32_t>(i), thinning, &ry);
    SplitRecorder split(recx, recy);
    run_coupled_path(model, mode0, x0, y0, policy, n, horizon, rng, options, split);
    xa[i] = std::move(recx.atoms());
    ya[i] = std::move(recy.atoms());
    xt[i] = recx.terminal();
    yt[i] = recy.terminal();
  });
  auto assemble = [&](std::vector<std::vector<Atom>>& per_path, std::vector<Atom>& terminal, const StateVec& origin) {
    EmpiricalOccupation m;
    m.delta = delta;
    m.origin_mode = mode0;
    m.origin_state = origin;
    m.n_paths = n_paths;
    m.horizon = horizon;
    m.thinning = thinning;
    for (auto& v : per_path) {
      m.atoms.insert(m.atoms.end(), v.begin(), v.end());
      std::vector<Atom>().swap(v);
    }
    m.terminal = std::move(terminal);
    for (const Atom& a : m.atoms) m.total_weight += a.weight;
    m.tail_mass = std::exp(-delta * horizon);
    return m;
  };
  CoupledOccupations out;
  out.x = assemble(xa, xt, x0);
  out.y = assemble(ya, yt, y0);
  return out;
}

void write_coupling_csv(std::ostream& out, const std::vector<CouplingRow>& rows) {
  write_csv_header(out, {"path", "n", "initial_distance", "jumps", "sup_gap", "cost_gap", "fitted_c"});
  for (const CouplingRow& r : rows) {
    CsvRow()
        .add(r.path)
        .add(r.n)
        .add(r.initial_distance)
        .add(r.jumps)
        .add(r.sup_gap)
        .add(r.cost_gap)
        .add(r.fitted_c)
        .write(out);
  }
}

}  // namespace pdmp
