#include "pdmp/solver.hpp"

#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <ostream>

#include "pdmp/csv.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/parallel.hpp"

namespace pdmp {

double ValueTable::value(ModeId mode, const StateVec& x) const {
  if (mode >= values.size()) throw ArgumentError("mode out of range for value table");
  return grid.stencil(x).apply(values[mode]);
}

double ValueTable::sup_norm() const {
  double s = 0.0;
  for (const auto& row : values) {
    for (double v : row) s = std::max(s, std::abs(v));
  }
  return s;
}

ValueTable make_table(const Model& model, const StateGrid& grid, double delta, unsigned n,
                      std::vector<ControlPoint> controls) {
  ValueTable t;
  t.grid = grid;
  t.delta = delta;
  t.n = n;
  t.controls = std::move(controls);
  t.values.assign(model.mode_count(), std::vector<double>(grid.node_count(), 0.0));
  return t;
}

double sup_distance(const ValueTable& a, const ValueTable& b) {
  if (a.values.size() != b.values.size()) throw ArgumentError("value tables have different mode counts");
  double s = 0.0;
  for (std::size_t m = 0; m < a.values.size(); ++m) {
    if (a.values[m].size() != b.values[m].size()) throw ArgumentError("value tables have different grids");
    for (std::size_t i = 0; i < a.values[m].size(); ++i) s = std::max(s, std::abs(a.values[m][i] - b.values[m][i]));
  }
  return s;
}

namespace {

using Values = std::vector<std::vector<double>>;

double sup_change(const Values& a, const Values& b) {
  double s = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) {
    for (std::size_t i = 0; i < a[m].size(); ++i) s = std::max(s, std::abs(a[m][i] - b[m][i]));
  }
  return s;
}

StateVec flow(const Model& model, ModeId mode, const StateVec& x, const ControlPoint& c) {
  StateVec f = model.flow_unchecked(mode, x, c);
  if (!all_finite(f)) throw IntegrationError("non-finite vector field at state " + to_string(x));
  return f;
}

}  // namespace

struct BellmanOperator::Impl {
  StateGrid grid;
  double delta = 0.0;
  unsigned n = 1;
  double lambda_max = 0.0;
  std::vector<ControlPoint> controls;
  std::size_t modes = 0;
  std::size_t nodes = 0;
  std::size_t dim = 0;
  SolverOptions options;

  std::size_t n_active = 0;
  std::array<std::size_t, kMaxStateDim> active{};
  std::array<std::size_t, 1u << kMaxStateDim> corner_offset{};

  // Entry e = (mode * nodes + node) * controls + c.
  std::vector<double> cost;
  std::vector<std::uint32_t> term_begin;
  std::vector<std::uint8_t> term_mode;
  std::vector<std::uint32_t> term_base;
  std::vector<float> term_frac;  // dim per term
  std::vector<double> term_coef;
  std::vector<std::uint32_t> end_base;
  std::vector<float> end_frac;
  std::vector<double> end_coef;

  std::size_t entry(std::size_t mode, std::size_t node, std::size_t c) const {
    return (mode * nodes + node) * controls.size() + c;
  }

  void setup_corners() {
    n_active = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      if (grid.nodes_per_dim()[d] > 1) active[n_active++] = d;
    }
    for (std::size_t corner = 0; corner < (std::size_t{1} << n_active); ++corner) {
      std::size_t off = 0;
      for (std::size_t a = 0; a < n_active; ++a) {
        if ((corner >> a) & 1u) off += grid.stride(active[a]);
      }
      corner_offset[corner] = off;
    }
  }

  void locate(const StateVec& x, std::uint32_t& base, float* frac) const {
    const Box& box = grid.box();
    std::size_t b = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      frac[d] = 0.0f;
      const std::size_t count = grid.nodes_per_dim()[d];
      if (count == 1) continue;
      const double s = std::clamp((x[d] - box.lo[d]) / grid.spacing(d), 0.0, static_cast<double>(count - 1));
      auto i = static_cast<std::size_t>(s);
      if (i >= count - 1) i = count - 2;
      frac[d] = static_cast<float>(s - static_cast<double>(i));
      b += i * grid.stride(d);
    }
    base = static_cast<std::uint32_t>(b);
  }

  double interp(const std::vector<double>& v, std::uint32_t base, const float* frac) const {
    switch (n_active) {
      case 0: return v[base];
      case 1: {
        const double f = frac[active[0]];
        return (1.0 - f) * v[base] + f * v[base + corner_offset[1]];
      }
      case 2: {
        const double f0 = frac[active[0]];
        const double f1 = frac[active[1]];
        return (1.0 - f1) * ((1.0 - f0) * v[base] + f0 * v[base + corner_offset[1]]) +
               f1 * ((1.0 - f0) * v[base + corner_offset[2]] + f0 * v[base + corner_offset[3]]);
      }
      default: {
        double s = 0.0;
        for (std::size_t corner = 0; corner < (std::size_t{1} << n_active); ++corner) {
          double w = 1.0;
          for (std::size_t a = 0; a < n_active; ++a) {
            const double f = frac[active[a]];
            w *= ((corner >> a) & 1u) ? f : 1.0 - f;
          }
          s += w * v[base + corner_offset[corner]];
        }
        return s;
      }
    }
  }

  void check_inside(const StateVec& x, const char* what) const {
    const double e = grid.box().excess(x);
    if (e > options.jump_tolerance) {
      throw ModelError(std::string(what) + " " + to_string(x) + " lies outside the invariant box by " +
                       format_real(e));
    }
  }

  void build(const Model& model) {
    const double cell = 1.0 / static_cast<double>(n);
    const auto m = static_cast<std::size_t>(std::max(1.0, std::ceil(cell / options.max_substep - 1e-9)));
    const double h = cell / static_cast<double>(m);
    const std::size_t entries = modes * nodes * controls.size();
    cost.assign(entries, 0.0);
    term_begin.assign(entries + 1, 0);
    end_base.assign(entries, 0);
    end_frac.assign(entries * dim, 0.0f);
    end_coef.assign(entries, 0.0);

    std::array<float, kMaxStateDim> frac{};
    for (std::size_t g = 0; g < modes; ++g) {
      for (std::size_t node = 0; node < nodes; ++node) {
        const StateVec x0 = grid.node(node);
        for (std::size_t ci = 0; ci < controls.size(); ++ci) {
          const ControlPoint& c = controls[ci];
          const std::size_t e = entry(g, node, ci);
          term_begin[e] = static_cast<std::uint32_t>(term_coef.size());
          const ModeDistribution q = model.kernel_unchecked(g, c);
          double mass = 0.0;
          for (ModeId t = 0; t < q.size(); ++t) mass += q[t] > 0.0 ? q[t] : 0.0;

          double running_cost = 0.0;
          double exit_mass = 0.0;
          auto point = [&](double t, const StateVec& x, double hazard, double weight) {
            const double d = weight * std::exp(-hazard - delta * t);
            running_cost += d * delta * model.cost_unchecked(g, x, c);
            const double lam = model.rate_unchecked(g, x, c);
            exit_mass += d * (delta + std::max(lam, 0.0));
            if (!(lam > 0.0)) return;
            if (!(mass > 0.0)) throw ModelError("positive jump rate with an empty mode kernel");
            for (ModeId theta = 0; theta < q.size(); ++theta) {
              if (!(q[theta] > 0.0)) continue;
              const StateVec post = model.jump_unchecked(g, theta, x, c);
              check_inside(post, "post-jump point");
              std::uint32_t base = 0;
              locate(post, base, frac.data());
              term_mode.push_back(static_cast<std::uint8_t>(theta));
              term_base.push_back(base);
              term_frac.insert(term_frac.end(), frac.begin(), frac.begin() + static_cast<std::ptrdiff_t>(dim));
              term_coef.push_back(d * lam * q[theta] / mass);
            }
          };

          StateVec x = x0;
          double hazard = 0.0;
          StateVec f0 = flow(model, g, x, c);
          double l0 = model.rate_unchecked(g, x, c);
          point(0.0, x, 0.0, h / 6.0);
          for (std::size_t s = 0; s < m; ++s) {
            const double t0 = static_cast<double>(s) * h;
            const StateVec xa = x + (0.5 * h) * f0;
            const StateVec k2 = flow(model, g, xa, c);
            const StateVec xb = x + (0.5 * h) * k2;
            const StateVec k3 = flow(model, g, xb, c);
            const StateVec xc = x + h * k3;
            const StateVec k4 = flow(model, g, xc, c);
            const StateVec x1 = x + (h / 6.0) * (f0 + 2.0 * k2 + 2.0 * k3 + k4);
            const double hazard1 =
                hazard + h / 6.0 *
                             (l0 + 2.0 * model.rate_unchecked(g, xa, c) + 2.0 * model.rate_unchecked(g, xb, c) +
                              model.rate_unchecked(g, xc, c));
            const StateVec f1 = flow(model, g, x1, c);
            const double l1 = model.rate_unchecked(g, x1, c);
            const StateVec xm = 0.5 * (x + x1) + (h / 8.0) * (f0 - f1);
            const double hazard_m = 0.5 * (hazard + hazard1) + h / 8.0 * (l0 - l1);
            point(t0 + 0.5 * h, xm, hazard_m, 4.0 * h / 6.0);
            const bool last = s + 1 == m;
            point(last ? cell : t0 + h, x1, hazard1, (last ? 1.0 : 2.0) * h / 6.0);
            x = x1;
            hazard = hazard1;
            f0 = f1;
            l0 = l1;
          }
          check_inside(x, "flow endpoint");
          end_coef[e] = std::exp(-hazard - delta * cell);
          // Rescale the quadrature so discounting, jumping and surviving the
          // cell carry total mass one; constants are then exact fixed points.
          const double scale = (1.0 - end_coef[e]) / exit_mass;
          cost[e] = scale * running_cost;
          for (std::size_t t = term_begin[e]; t < term_coef.size(); ++t) term_coef[t] *= scale;
          locate(x, end_base[e], &end_frac[e * dim]);
          if (term_coef.size() > std::numeric_limits<std::uint32_t>::max()) {
            throw ArgumentError("solver grid too large: term count exceeds 2^32");
          }
        }
      }
    }
    term_begin[entries] = static_cast<std::uint32_t>(term_coef.size());
  }

  double jump_part(std::size_t e, const Values& w) const {
    double s = cost[e];
    for (std::uint32_t t = term_begin[e]; t < term_begin[e + 1]; ++t) {
      s += term_coef[t] * interp(w[term_mode[t]], term_base[t], &term_frac[static_cast<std::size_t>(t) * dim]);
    }
    return s;
  }

  template <typename Body>
  void for_each_node(Body&& body) const {
    const std::size_t per_mode = (nodes + 255) / 256;
    parallel_for(modes * per_mode, options.threads, [&](std::size_t block) {
      const std::size_t g = block / per_mode;
      const std::size_t lo = (block % per_mode) * 256;
      const std::size_t hi = std::min(nodes, lo + 256);
      for (std::size_t node = lo; node < hi; ++node) body(g, node);
    });
  }
};

BellmanOperator::BellmanOperator(const Model& model, StateGrid grid, double delta, unsigned n,
                                 std::vector<ControlPoint> controls, const SolverOptions& options)
    : impl_(std::make_unique<Impl>()) {
  if (!(delta > 0.0)) throw ArgumentError("discount delta must be positive");
  if (n == 0) throw ArgumentError("step parameter n must be positive");
  if (controls.empty()) throw ArgumentError("control set must be nonempty");
  if (!(options.max_substep > 0.0)) throw ArgumentError("max_substep must be positive");
  if (grid.dim() != model.dim()) throw ArgumentError("grid dimension does not match the model");
  if (model.mode_count() > 255) throw ArgumentError("too many modes for the solver");
  if (grid.node_count() > std::numeric_limits<std::uint32_t>::max()) throw ArgumentError("solver grid too large");
  for (const ControlPoint& c : controls) model.check_control(c);
  Impl& s = *impl_;
  s.grid = std::move(grid);
  s.delta = delta;
  s.n = n;
  s.lambda_max = model.bounds().lambda_max;
  s.controls = std::move(controls);
  s.modes = model.mode_count();
  s.nodes = s.grid.node_count();
  s.dim = model.dim();
  s.options = options;
  s.setup_corners();
  s.build(model);
}

BellmanOperator::~BellmanOperator() = default;
BellmanOperator::BellmanOperator(BellmanOperator&&) noexcept = default;
BellmanOperator& BellmanOperator::operator=(BellmanOperator&&) noexcept = default;

const StateGrid& BellmanOperator::grid() const { return impl_->grid; }
std::size_t BellmanOperator::mode_count() const { return impl_->modes; }
std::size_t BellmanOperator::term_count() const { return impl_->term_coef.size(); }

double BellmanOperator::contraction_bound(BellmanScheme scheme) const {
  const double lam = impl_->lambda_max;
  const double delta = impl_->delta;
  if (scheme == BellmanScheme::kJumpRecursion) return lam / (delta + lam);
  const double cell = 1.0 / static_cast<double>(impl_->n);
  return 1.0 - delta / (lam + delta) * (-std::expm1(-(lam + delta) * cell));
}

void BellmanOperator::apply(const Values& in, Values& out, std::vector<std::vector<std::uint32_t>>* argmin) const {
  const Impl& s = *impl_;
  out.resize(s.modes);
  for (auto& row : out) row.resize(s.nodes);
  if (argmin) {
    argmin->resize(s.modes);
    for (auto& row : *argmin) row.resize(s.nodes);
  }
  s.for_each_node([&](std::size_t g, std::size_t node) {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t arg = 0;
    for (std::size_t c = 0; c < s.controls.size(); ++c) {
      const std::size_t e = s.entry(g, node, c);
      const double v = s.jump_part(e, in) + s.end_coef[e] * s.interp(in[g], s.end_base[e], &s.end_frac[e * s.dim]);
      if (v < best) {
        best = v;
        arg = static_cast<std::uint32_t>(c);
      }
    }
    out[g][node] = best;
    if (argmin) (*argmin)[g][node] = arg;
  });
}

std::size_t BellmanOperator::apply_jump_recursion(const Values& previous, Values& out, double inner_tolerance,
                                                  std::vector<std::vector<std::uint32_t>>* argmin) const {
  const Impl& s = *impl_;
  const std::size_t nc = s.controls.size();
  std::vector<double> jump(s.modes * s.nodes * nc);
  s.for_each_node([&](std::size_t g, std::size_t node) {
    for (std::size_t c = 0; c < nc; ++c) {
      const std::size_t e = s.entry(g, node, c);
      jump[e] = s.jump_part(e, previous);
    }
  });
  out.resize(s.modes);
  for (auto& row : out) row.resize(s.nodes, 0.0);
  Values next = out;
  std::vector<std::vector<std::uint32_t>> arg(s.modes, std::vector<std::uint32_t>(s.nodes, 0));
  std::size_t iterations = 0;
  for (;;) {
    s.for_each_node([&](std::size_t g, std::size_t node) {
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t a = 0;
      for (std::size_t c = 0; c < nc; ++c) {
        const std::size_t e = s.entry(g, node, c);
        const double v = jump[e] + s.end_coef[e] * s.interp(out[g], s.end_base[e], &s.end_frac[e * s.dim]);
        if (v < best) {
          best = v;
          a = static_cast<std::uint32_t>(c);
        }
      }
      next[g][node] = best;
      arg[g][node] = a;
    });
    ++iterations;
    const double change = sup_change(next, out);
    out.swap(next);
    if (change <= inner_tolerance) break;
    if (iterations >= s.options.max_iterations) {
      throw ConvergenceError("inner deterministic problem did not converge within the iteration limit");
    }
  }
  if (argmin) *argmin = std::move(arg);
  return iterations;
}

ValueTable bellman_step(const Model& model, const ValueTable& table, const SolverOptions& options) {
  BellmanOperator op(model, table.grid, table.delta, table.n, table.controls, options);
  if (table.values.size() != model.mode_count()) throw ArgumentError("value table mode count does not match model");
  ValueTable out = table;
  op.apply(table.values, out.values, &out.argmin);
  return out;
}

namespace {

void check_solver_grid(const Model& model, const StateGrid& grid) {
  const auto& box = model.info().invariant_box;
  if (!box) throw ModelError("the grid solver needs a model with an invariant box");
  for (std::size_t d = 0; d < model.dim(); ++d) {
    if (std::abs(grid.box().lo[d] - box->lo[d]) > 1e-12 || std::abs(grid.box().hi[d] - box->hi[d]) > 1e-12) {
      throw ArgumentError("solver grid must cover the invariant box exactly");
    }
  }
}

std::size_t iteration_bound(double alpha, double tol, double first_change) {
  if (first_change <= tol) return 1;
  if (alpha <= 0.0) return 3;
  const double k = std::log(tol * (1.0 - alpha) / first_change) / std::log(alpha);
  return static_cast<std::size_t>(std::ceil(std::max(0.0, k))) + 2;
}

}  // namespace

SolveResult solve_discounted(const Model& model, double delta, unsigned n, const std::vector<ControlPoint>& controls,
                             const StateGrid& grid, double tol, const SolverOptions& options,
                             const ValueTable* initial) {
  if (!(tol > 0.0)) throw ArgumentError("solver tolerance must be positive");
  check_solver_grid(model, grid);
  BellmanOperator op(model, grid, delta, n, controls, options);

  SolveResult result;
  result.scheme = options.scheme;
  result.table = make_table(model, grid, delta, n, controls);
  if (initial) {
    if (!(initial->grid == grid) || initial->values.size() != model.mode_count()) {
      throw ArgumentError("initial table does not match the solver grid");
    }
    result.table.values = initial->values;
  }
  double alpha = op.contraction_bound(options.scheme);
  // Inner deterministic solves of the jump recursion contract with
  // beta = e^{-delta/n}; stopping them at ratio * (last outer change) leaves
  // each outer iterate within eta * (last change) of the exact one.
  const double beta = std::exp(-delta / static_cast<double>(n));
  const bool exact_inner = options.scheme == BellmanScheme::kJumpRecursion && alpha == 0.0;
  if (options.scheme == BellmanScheme::kJumpRecursion && !exact_inner) {
    alpha += 2.0 * options.inner_tolerance_ratio * beta / (1.0 - beta);
  }
  result.contraction_bound = alpha;
  const double h_max = model.bounds().h_max;
  // Bound for a cold start, where the first change is at most h_max.
  result.iteration_bound = iteration_bound(alpha, tol, std::max(h_max, tol * 2.0));

  Values next = result.table.values;
  double previous = 0.0;
  std::size_t strikes = 0;
  std::size_t bound = result.iteration_bound;
  for (std::size_t it = 1;; ++it) {
    std::size_t inner = 0;
    if (options.scheme == BellmanScheme::kTimeStep) {
      op.apply(result.table.values, next, &result.table.argmin);
    } else {
      const double reference = it == 1 ? std::max(h_max, tol) : previous;
      const double inner_tol = exact_inner ? 0.5 * (1.0 - beta) * tol : options.inner_tolerance_ratio * reference;
      next = result.table.values;
      inner = op.apply_jump_recursion(result.table.values, next, std::max(inner_tol, 1e-15), &result.table.argmin);
    }
    const double change = sup_change(next, result.table.values);
    const double ratio = it > 1 && previous > 0.0 ? change / previous : 0.0;
    result.log.push_back({it, change, ratio, inner});
    result.table.values.swap(next);

    if (it == 1 && initial) bound = iteration_bound(alpha, tol, change);
    if (change <= tol) break;
    if (options.check_contraction && it > 1 && previous > 1e-12) {
      strikes = ratio > alpha + 0.05 ? strikes + 1 : 0;
      if (strikes >= 3) {
        throw ConvergenceError("iteration stopped contracting: ratio " + format_real(ratio) + " against bound " +
                               format_real(alpha) + " at iteration " + std::to_string(it));
      }
    }
    if (options.check_contraction && it >= bound) {
      throw ConvergenceError("no convergence within the guaranteed bound of " + std::to_string(bound) +
                             " iterations (last change " + format_real(change) + ")");
    }
    if (it >= options.max_iterations) throw ConvergenceError("iteration limit reached");
    previous = change;
  }
  return result;
}

double discrete_lipschitz(const ValueTable& table) {
  const StateGrid& grid = table.grid;
  double worst = 0.0;
  for (const auto& row : table.values) {
    for (std::size_t node = 0; node < grid.node_count(); ++node) {
      const auto multi = grid.multi_index(node);
      for (std::size_t d = 0; d < grid.dim(); ++d) {
        if (multi[d] + 1 >= grid.nodes_per_dim()[d]) continue;
        const double slope = std::abs(row[node + grid.stride(d)] - row[node]) / grid.spacing(d);
        worst = std::max(worst, slope);
      }
    }
  }
  return worst;
}

Policy greedy_policy(const ValueTable& table) {
  if (table.argmin.size() != table.values.size()) throw ArgumentError("value table carries no argmin controls");
  std::vector<ControlPoint> cells;
  cells.reserve(table.values.size() * table.grid.node_count());
  for (const auto& row : table.argmin) {
    for (std::uint32_t a : row) cells.push_back(table.controls.at(a));
  }
  return Policy::stepped_feedback(table.n, table.values.size(), table.grid, std::move(cells));
}

std::vector<StepStudyRow> step_convergence_study(const Model& model, double delta, const std::vector<unsigned>& n_list,
                                                 const std::vector<ControlPoint>& controls, const StateGrid& grid,
                                                 double tol, const SolverOptions& options) {
  if (n_list.empty()) throw ArgumentError("step study needs at least one n");
  for (std::size_t i = 1; i < n_list.size(); ++i) {
    if (!(n_list[i] > n_list[i - 1])) throw ArgumentError("step study n list must be increasing");
  }
  std::vector<ValueTable> tables(n_list.size());
  std::vector<StepStudyRow> rows(n_list.size());
  const ValueTable* warm = nullptr;
  for (std::size_t i = n_list.size(); i-- > 0;) {
    SolveResult r = solve_discounted(model, delta, n_list[i], controls, grid, tol, options, warm);
    rows[i].n = n_list[i];
    rows[i].iterations = r.log.size();
    rows[i].value_sup = r.table.sup_norm();
    rows[i].error_bound = tol * r.contraction_bound / (1.0 - r.contraction_bound);
    tables[i] = std::move(r.table);
    warm = &tables[i];
  }
  for (std::size_t i = 0; i < n_list.size(); ++i) rows[i].sup_difference = sup_distance(tables[i], tables.back());
  return rows;
}

HjbResidual hjb_residual(const Model& model, const ValueTable& table) {
  const StateGrid& grid = table.grid;
  const std::size_t dim = grid.dim();
  HjbResidual out;
  out.residual.assign(table.values.size(), std::vector<double>(grid.node_count(), 0.0));
  out.interior.assign(grid.node_count(), true);
  for (std::size_t node = 0; node < grid.node_count(); ++node) {
    const auto multi = grid.multi_index(node);
    for (std::size_t d = 0; d < dim; ++d) {
      const std::size_t count = grid.nodes_per_dim()[d];
      if (count > 1 && (multi[d] == 0 || multi[d] + 1 == count)) out.interior[node] = false;
    }
  }
  for (ModeId g = 0; g < table.values.size(); ++g) {
    const auto& v = table.values[g];
    for (std::size_t node = 0; node < grid.node_count(); ++node) {
      const auto multi = grid.multi_index(node);
      const StateVec x = grid.node(node);
      StateVec p(dim, 0.0);
      for (std::size_t d = 0; d < dim; ++d) {
        const std::size_t count = grid.nodes_per_dim()[d];
        if (count == 1) continue;
        const std::size_t lo = multi[d] == 0 ? node : node - grid.stride(d);
        const std::size_t hi = multi[d] + 1 == count ? node : node + grid.stride(d);
        const double span = static_cast<double>((hi - lo) / grid.stride(d)) * grid.spacing(d);
        p[d] = (v[hi] - v[lo]) / span;
      }
      double hamiltonian = -std::numeric_limits<double>::infinity();
      for (const ControlPoint& c : table.controls) {
        double jump = 0.0;
        const double lam = model.rate_unchecked(g, x, c);
        if (lam > 0.0) {
          const ModeDistribution q = model.kernel_unchecked(g, c);
          for (ModeId theta = 0; theta < q.size(); ++theta) {
            if (q[theta] > 0.0) jump += q[theta] * (table.value(theta, model.jump_unchecked(g, theta, x, c)) - v[node]);
          }
        }
        const double term = -table.delta * model.cost_unchecked(g, x, c) - dot(model.flow_unchecked(g, x, c), p) -
                            lam * jump;
        hamiltonian = std::max(hamiltonian, term);
      }
      const double r = table.delta * v[node] + hamiltonian;
      out.residual[g][node] = r;
      if (out.interior[node]) out.sup_interior = std::max(out.sup_interior, std::abs(r));
    }
  }
  return out;
}

void write_table_csv(std::ostream& out, const ValueTable& table) {
  const std::size_t dim = table.grid.dim();
  std::vector<std::string> cols{"mode_id"};
  for (std::size_t d = 1; d <= dim; ++d) cols.push_back("i_" + std::to_string(d));
  for (std::size_t d = 1; d <= dim; ++d) cols.push_back("x_" + std::to_string(d));
  cols.push_back("value");
  write_csv_header(out, cols);
  for (std::size_t g = 0; g < table.values.size(); ++g) {
    for (std::size_t node = 0; node < table.grid.node_count(); ++node) {
      CsvRow row;
      row.add(g);
      const auto multi = table.grid.multi_index(node);
      for (std::size_t d = 0; d < dim; ++d) row.add(multi[d]);
      const StateVec x = table.grid.node(node);
      for (std::size_t d = 0; d < dim; ++d) row.add(x[d]);
      row.add(table.values[g][node]);
      row.write(out);
    }
  }
}

std::string table_header_json(const ValueTable& table) {
  nlohmann::json j;
  j["delta"] = table.delta;
  j["n"] = table.n;
  j["grid"] = {{"lo", std::vector<double>(table.grid.box().lo.begin(), table.grid.box().lo.end())},
               {"hi", std::vector<double>(table.grid.box().hi.begin(), table.grid.box().hi.end())},
               {"nodes", table.grid.nodes_per_dim()}};
  nlohmann::json controls = nlohmann::json::array();
  for (const ControlPoint& c : table.controls) {
    controls.push_back({{"u", std::vector<double>(c.u.begin(), c.u.end())},
                        {"v", std::vector<double>(c.v.begin(), c.v.end())}});
  }
  j["controls"] = std::move(controls);
  j["modes"] = table.values.size();
  return j.dump(1);
}

}  // namespace pdmp
