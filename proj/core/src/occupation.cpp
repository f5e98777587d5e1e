#include "pdmp/occupation.hpp"

#include <cmath>
#include <ostream>

#include "pdmp/csv.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/parallel.hpp"
#include "pdmp/value.hpp"

namespace pdmp {

OccupationRecorder::OccupationRecorder(double delta, double path_weight, std::uint32_t path, std::size_t thinning,
                                       Rng* thinning_rng)
    : delta_(delta), path_weight_(path_weight), path_(path), thinning_(std::max<std::size_t>(1, thinning)),
      rng_(thinning_rng) {
  if (thinning_ > 1 && !rng_) throw ArgumentError("thinning needs a random stream");
}

void OccupationRecorder::push(ModeId mode, const StateVec& y, const ControlPoint& c, double weight) {
  Atom a{mode, y, c, weight, path_};
  if (thinning_ == 1) {
    atoms_.push_back(std::move(a));
    return;
  }
  block_.push_back(std::move(a));
  if (block_.size() == thinning_) flush();
}

void OccupationRecorder::flush() {
  if (block_.empty()) return;
  double total = 0.0;
  for (const Atom& a : block_) total += a.weight;
  const auto pick = std::min(block_.size() - 1, static_cast<std::size_t>(rng_->uniform() * block_.size()));
  Atom kept = block_[pick];
  kept.weight = total;
  atoms_.push_back(std::move(kept));
  block_.clear();
}

void OccupationRecorder::on_substep(const Substep& s) {
  const auto w = discounted_simpson_weights(delta_, s.t0, s.t1);
  push(s.mode, s.x0, s.control, path_weight_ * w[0]);
  push(s.mode, s.xm, s.control, path_weight_ * w[1]);
  push(s.mode, s.x1, s.control, path_weight_ * w[2]);
  last_control_ = s.control;
}

void OccupationRecorder::on_end(double horizon, ModeId mode, const StateVec& x) {
  flush();
  terminal_ = Atom{mode, x, last_control_, path_weight_ * std::exp(-delta_ * horizon), path_};
}

namespace {

void finish(EmpiricalOccupation& m) {
  m.total_weight = 0.0;
  for (const Atom& a : m.atoms) m.total_weight += a.weight;
  m.tail_mass = std::exp(-m.delta * m.horizon);
}

}  // namespace

EmpiricalOccupation empirical_occupation(const Model& model, const std::vector<Trajectory>& trajectories,
                                         double delta) {
  if (!(delta > 0.0)) throw ArgumentError("discount delta must be positive");
  if (trajectories.empty()) throw ArgumentError("need at least one trajectory");
  EmpiricalOccupation m;
  m.delta = delta;
  m.origin_mode = trajectories.front().modes.front();
  m.origin_state = trajectories.front().states.front();
  m.horizon = trajectories.front().horizon;
  m.n_paths = trajectories.size();
  const double path_weight = 1.0 / static_cast<double>(trajectories.size());
  for (std::size_t p = 0; p < trajectories.size(); ++p) {
    const Trajectory& tr = trajectories[p];
    if (tr.modes.front() != m.origin_mode || !(tr.states.front() == m.origin_state)) {
      throw ArgumentError("trajectories have mixed origins");
    }
    if (tr.horizon != m.horizon) throw ArgumentError("trajectories have different horizons");
    OccupationRecorder rec(delta, path_weight, static_cast<std::uint32_t>(p), 1, nullptr);
    for (std::size_t k = 0; k < tr.segments.size(); ++k) {
      const Segment& seg = tr.segments[k];
      for (std::size_t i = 0; i + 1 < seg.times.size(); ++i) {
        const ControlPoint& c = seg.controls[i];
        const double h = seg.times[i + 1] - seg.times[i];
        const StateVec f0 = model.flow_unchecked(seg.mode, seg.states[i], c);
        const StateVec f1 = model.flow_unchecked(seg.mode, seg.states[i + 1], c);
        const StateVec xm = 0.5 * (seg.states[i] + seg.states[i + 1]) + (h / 8.0) * (f0 - f1);
        rec.on_substep(Substep{seg.mode, seg.times[i], seg.times[i + 1], seg.states[i], xm, seg.states[i + 1], c, k});
      }
    }
    const Segment& last = tr.segments.back();
    rec.on_end(tr.horizon, last.mode, last.states.back());
    auto& atoms = rec.atoms();
    m.atoms.insert(m.atoms.end(), atoms.begin(), atoms.end());
    m.terminal.push_back(rec.terminal());
  }
  finish(m);
  return m;
}

std::size_t thinning_factor(std::size_t expected_atoms, std::size_t max_atoms) {
  if (max_atoms == 0) throw ArgumentError("atom cap must be positive");
  return std::max<std::size_t>(1, (expected_atoms + max_atoms - 1) / max_atoms);
}

EmpiricalOccupation simulate_occupation(const Model& model, const Policy& policy, ModeId mode0, const StateVec& x0,
                                        double delta, std::size_t n_paths, std::uint64_t seed,
                                        const OccupationOptions& options) {
  if (n_paths == 0) throw ArgumentError("need at least one path");
  check_start(model, mode0, x0);
  policy.check_against(model);
  const double horizon = std::max(abel_horizon(1.0, delta, options.bias), options.simulation.ode_step);

  // Generous atom count: every substep, every cell boundary and every jump adds a substep.
  const double cells = policy.cell_length() > 0.0 && std::isfinite(policy.cell_length())
                           ? horizon / policy.cell_length()
                           : 0.0;
  const double substeps = std::ceil(horizon / options.simulation.ode_step) + std::ceil(cells) +
                          std::ceil(model.bounds().lambda_max * horizon * 2.0) + 2.0;
  const auto expected = static_cast<std::size_t>(3.0 * substeps) * n_paths;
  const std::size_t thinning = thinning_factor(expected, options.max_atoms);

  EmpiricalOccupation m;
  m.delta = delta;
  m.origin_mode = mode0;
  m.origin_state = x0;
  m.horizon = horizon;
  m.n_paths = n_paths;
  m.thinning = thinning;
  std::vector<std::vector<Atom>> per_path(n_paths);
  std::vector<Atom> terminal(n_paths);
  const double path_weight = 1.0 / static_cast<double>(n_paths);
  const std::uint64_t thin_seed = derive_seed(seed, 0x7468696eULL);
  parallel_for(n_paths, options.threads, [&](std::size_t i) {
    Rng rng({seed, i});
    Rng thin_rng({thin_seed, i});
    OccupationRecorder rec(delta, path_weight, static_cast<std::uint32_t>(i), thinning, &thin_rng);
    simulate_path(model, mode0, x0, policy, horizon, rng, options.simulation, rec);
    per_path[i] = std::move(rec.atoms());
    terminal[i] = rec.terminal();
  });
  std::size_t total = 0;
  for (const auto& v : per_path) total += v.size();
  m.atoms.reserve(total);
  for (auto& v : per_path) {
    m.atoms.insert(m.atoms.end(), v.begin(), v.end());
    std::vector<Atom>().swap(v);
  }
  m.terminal = std::move(terminal);
  finish(m);
  return m;
}

double cost_integral(const EmpiricalOccupation& measure, const Model& model) {
  double s = 0.0;
  for (const Atom& a : measure.atoms) s += a.weight * model.cost_unchecked(a.mode, a.y, a.control);
  for (const Atom& a : measure.terminal) s += a.weight * model.cost_unchecked(a.mode, a.y, a.control);
  return s;
}

double generator_apply(const Model& model, const TestFunction& phi, ModeId mode, const StateVec& y,
                       const ControlPoint& c) {
  double out = dot(model.flow_unchecked(mode, y, c), phi.gradient(mode, y));
  const double lam = model.rate_unchecked(mode, y, c);
  if (lam > 0.0) {
    const ModeDistribution q = model.kernel_unchecked(mode, c);
    const double here = phi.value(mode, y);
    double jump = 0.0;
    for (ModeId theta = 0; theta < q.size(); ++theta) {
      if (q[theta] > 0.0) jump += q[theta] * (phi.value(theta, model.jump_unchecked(mode, theta, y, c)) - here);
    }
    out += lam * jump;
  }
  return out;
}

namespace {

void check_test_function(const Model& model, const TestFunction& phi) {
  if (!phi.value || !phi.gradient) throw ArgumentError("test function '" + phi.id + "' is incomplete");
  const Box box = model.info().invariant_box.value_or(uniform_box(model.dim(), -1.0, 1.0));
  Rng rng({0x5eedULL, 0});
  for (ModeId g = 0; g < model.mode_count(); ++g) {
    for (int s = 0; s < 16; ++s) {
      StateVec x(model.dim());
      for (std::size_t d = 0; d < model.dim(); ++d) x[d] = rng.uniform(box.lo[d], box.hi[d]);
      const double v = phi.value(g, x);
      const StateVec grad = phi.gradient(g, x);
      if (!std::isfinite(v) || grad.size() != model.dim() || !all_finite(grad)) {
        throw ArgumentError("test function '" + phi.id + "' is not finite on K at " + to_string(x));
      }
    }
  }
}

}  // namespace

ResidualResult generator_residual(const Model& model, const EmpiricalOccupation& measure, const TestFunction& phi) {
  check_test_function(model, phi);
  if (measure.n_paths == 0) throw ArgumentError("empty occupation measure");
  const double delta = measure.delta;
  const double phi0 = phi.value(measure.origin_mode, measure.origin_state);
  std::vector<double> per_path(measure.n_paths, 0.0);
  for (const Atom& a : measure.atoms) {
    const double integrand = generator_apply(model, phi, a.mode, a.y, a.control) + delta * (phi0 - phi.value(a.mode, a.y));
    per_path.at(a.path) += a.weight * integrand;
  }
  for (const Atom& a : measure.terminal) per_path.at(a.path) -= delta * a.weight * (phi.value(a.mode, a.y) - phi0);

  ResidualResult r;
  r.id = phi.id;
  const auto n = static_cast<double>(measure.n_paths);
  double total = 0.0;
  for (double c : per_path) total += c;
  r.residual = total;
  if (measure.n_paths > 1) {
    // Delete-one jackknife over paths; each replicate rescales the rest to full mass.
    double mean_rep = 0.0;
    std::vector<double> reps(per_path.size());
    for (std::size_t i = 0; i < per_path.size(); ++i) {
      reps[i] = n / (n - 1.0) * (total - per_path[i]);
      mean_rep += reps[i];
    }
    mean_rep /= n;
    double ss = 0.0;
    for (double rep : reps) ss += (rep - mean_rep) * (rep - mean_rep);
    r.std_error = std::sqrt((n - 1.0) / n * ss);
  }
  return r;
}

std::vector<TestFunction> test_battery(const Model& model) {
  const Box box = model.info().invariant_box.value_or(uniform_box(model.dim(), -1.0, 1.0));
  const std::size_t dim = model.dim();
  struct Monomial {
    std::string name;
    int i = -1;  // first factor, -1 for the constant
    int j = -1;  // second factor, -1 for none
  };
  std::vector<Monomial> monomials{{"1", -1, -1}};
  for (std::size_t i = 0; i < dim; ++i) monomials.push_back({"s" + std::to_string(i + 1), int(i), -1});
  for (std::size_t i = 0; i < dim; ++i) {
    monomials.push_back({"s" + std::to_string(i + 1) + "^2", int(i), int(i)});
  }
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i + 1; j < dim; ++j) {
      monomials.push_back({"s" + std::to_string(i + 1) + "*s" + std::to_string(j + 1), int(i), int(j)});
    }
  }
  std::vector<double> lo(dim), inv(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    lo[d] = box.lo[d];
    const double w = box.hi[d] - box.lo[d];
    inv[d] = w > 0.0 ? 1.0 / w : 1.0;
  }
  std::vector<TestFunction> out;
  for (ModeId g = 0; g < model.mode_count(); ++g) {
    for (const Monomial& mono : monomials) {
      TestFunction f;
      f.id = "1{" + model.info().modes[g].label + "}*" + mono.name;
      f.value = [=](ModeId mode, const StateVec& x) {
        if (mode != g) return 0.0;
        const double a = mono.i < 0 ? 1.0 : (x[mono.i] - lo[mono.i]) * inv[mono.i];
        const double b = mono.j < 0 ? 1.0 : (x[mono.j] - lo[mono.j]) * inv[mono.j];
        return a * b;
      };
      f.gradient = [=](ModeId mode, const StateVec& x) {
        StateVec grad(dim, 0.0);
        if (mode != g || mono.i < 0) return grad;
        const double a = (x[mono.i] - lo[mono.i]) * inv[mono.i];
        if (mono.j < 0) {
          grad[mono.i] = inv[mono.i];
          return grad;
        }
        const double b = (x[mono.j] - lo[mono.j]) * inv[mono.j];
        grad[mono.i] += inv[mono.i] * b;
        grad[mono.j] += inv[mono.j] * a;
        return grad;
      };
      out.push_back(std::move(f));
    }
  }
  return out;
}

std::vector<ResidualResult> residual_report(const Model& model, const EmpiricalOccupation& measure,
                                            const std::vector<TestFunction>& battery, std::size_t threads) {
  std::vector<ResidualResult> rows(battery.size());
  parallel_for(battery.size(), threads,
               [&](std::size_t i) { rows[i] = generator_residual(model, measure, battery[i]); });
  return rows;
}

EmpiricalOccupation mix(const EmpiricalOccupation& a, const EmpiricalOccupation& b, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("mixture weight must lie in [0, 1]");
  if (a.origin_mode != b.origin_mode || !(a.origin_state == b.origin_state) || a.delta != b.delta) {
    throw ArgumentError("mixed measures must share origin and discount");
  }
  if (a.horizon != b.horizon) throw ArgumentError("mixed measures must share the truncation horizon");
  EmpiricalOccupation m = a;
  m.n_paths = a.n_paths + b.n_paths;
  m.thinning = std::max(a.thinning, b.thinning);
  for (Atom& atom : m.atoms) atom.weight *= p;
  for (Atom& atom : m.terminal) atom.weight *= p;
  const auto offset = static_cast<std::uint32_t>(a.n_paths);
  for (Atom atom : b.atoms) {
    atom.weight *= 1.0 - p;
    atom.path += offset;
    m.atoms.push_back(std::move(atom));
  }
  for (Atom atom : b.terminal) {
    atom.weight *= 1.0 - p;
    atom.path += offset;
    m.terminal.push_back(std::move(atom));
  }
  finish(m);
  return m;
}

void write_atoms_csv(std::ostream& out, const EmpiricalOccupation& measure) {
  const std::size_t dim = measure.origin_state.size();
  const std::size_t nu = measure.atoms.empty() ? 0 : measure.atoms.front().control.u.size();
  const std::size_t nv = measure.atoms.empty() ? 0 : measure.atoms.front().control.v.size();
  std::vector<std::string> cols{"mode_id"};
  for (std::size_t i = 1; i <= dim; ++i) cols.push_back("y_" + std::to_string(i));
  for (std::size_t i = 1; i <= nu; ++i) cols.push_back("u_" + std::to_string(i));
  for (std::size_t i = 1; i <= nv; ++i) cols.push_back("v_" + std::to_string(i));
  cols.push_back("weight");
  cols.push_back("path");
  write_csv_header(out, cols);
  for (const Atom& a : measure.atoms) {
    CsvRow row;
    row.add(a.mode);
    for (double y : a.y) row.add(y);
    for (double u : a.control.u) row.add(u);
    for (double v : a.control.v) row.add(v);
    row.add(a.weight).add(a.path);
    row.write(out);
  }
}

void write_residuals_csv(std::ostream& out, const std::vector<ResidualResult>& rows) {
  write_csv_header(out, {"phi_id", "residual", "stderr"});
  for (const ResidualResult& r : rows) CsvRow().add(r.id).add(r.residual).add(r.std_error).write(out);
}

}  // namespace pdmp
