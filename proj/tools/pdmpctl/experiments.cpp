#include "experiments.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "pdmp/coupling.hpp"
#include "pdmp/csv.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/grid.hpp"
#include "pdmp/occupation.hpp"
#include "pdmp/simulate.hpp"
#include "pdmp/solver.hpp"
#include "pdmp/value.hpp"

namespace pdmpctl {

bool RunOutcome::passed() const {
  for (const Assertion& a : assertions) {
    if (!a.pass) return false;
  }
  return true;
}

namespace {

using pdmp::format_real;

class Run {
 public:
  Run(const ExperimentConfig& cfg, std::filesystem::path dir, std::size_t threads)
      : cfg_(cfg), dir_(std::move(dir)), threads_(threads), model_(build_model(cfg.model)) {}

  RunOutcome execute() {
    std::filesystem::create_directories(dir_);
    switch (cfg_.experiment) {
      case ExperimentKind::kAbel: abel(); break;
      case ExperimentKind::kCesaro: cesaro(); break;
      case ExperimentKind::kTauberian: tauberian(); break;
      case ExperimentKind::kSolve: solve(); break;
      case ExperimentKind::kStepStudy: step_study(); break;
      case ExperimentKind::kCoupling: coupling(); break;
      case ExperimentKind::kNonexpCheck: nonexp(); break;
      case ExperimentKind::kOccupation: occupation(); break;
      case ExperimentKind::kValidate: validate(); break;
    }
    return std::move(out_);
  }

 private:
  std::ofstream open(const std::string& name) {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    out_.files.push_back(name);
    return f;
  }

  void check(std::string name, bool pass, std::string detail) {
    out_.assertions.push_back({std::move(name), pass, std::move(detail)});
  }

  pdmp::EstimatorOptions estimator() const {
    pdmp::EstimatorOptions o;
    o.simulation = cfg_.simulation;
    o.threads = threads_;
    o.bias = cfg_.bias;
    return o;
  }

  const pdmp::Model& model() const { return *model_; }

  void write_trajectories(const pdmp::Policy& policy, const StartPoint& start, double horizon, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      const pdmp::Trajectory t = pdmp::simulate_trajectory(model(), start.mode, start.x, policy, horizon,
                                                           {cfg_.seed, i}, cfg_.simulation);
      std::ofstream f = open("trajectory_" + std::to_string(i) + ".csv");
      pdmp::write_trajectory_csv(f, t);
    }
  }

  void bounded(const std::string& what, const std::vector<pdmp::ValueEstimate>& rows) {
    const double h_max = model().bounds().h_max;
    bool ok = true;
    double worst = 0.0;
    for (const auto& r : rows) {
      const double excess = std::abs(r.mean) - (h_max + 3.0 * r.std_error + r.truncation_bias_bound);
      worst = std::max(worst, std::abs(r.mean));
      ok = ok && excess <= 0.0 && std::isfinite(r.std_error);
    }
    check(what + "_within_h_max", ok, "max |mean| " + format_real(worst) + ", h_max " + format_real(h_max));
  }

  void abel() {
    const AbelBlock& b = *cfg_.abel;
    std::ofstream f = open("abel.csv");
    pdmp::write_csv_header(f, {"delta", "member", "mean", "stderr", "n_paths", "horizon", "bias_bound"});
    std::ofstream fam;
    if (b.family) {
      fam = open("abel_family.csv");
      pdmp::write_csv_header(fam, {"delta", "member", "mean", "stderr"});
    }
    std::vector<pdmp::ValueEstimate> rows;
    pdmp::Policy last = b.policy;
    for (double delta : b.deltas) {
      pdmp::ValueEstimate e;
      std::size_t member = 0;
      if (b.family) {
        const pdmp::OptimizationResult r = pdmp::optimize_value(model(), *b.family, b.start.mode, b.start.x,
                                                                pdmp::Objective::abel(delta), b.n_paths, cfg_.seed,
                                                                estimator());
        for (std::size_t i = 0; i < r.table.size(); ++i) {
          pdmp::CsvRow().add(delta).add(i).add(r.table[i].mean).add(r.table[i].std_error).write(fam);
        }
        e = r.best;
        member = r.best_index;
        last = r.best_policy;
      } else {
        e = pdmp::estimate_abel(model(), b.policy, b.start.mode, b.start.x, delta, b.n_paths, cfg_.seed, estimator());
      }
      pdmp::CsvRow()
          .add(delta)
          .add(member)
          .add(e.mean)
          .add(e.std_error)
          .add(e.n_paths)
          .add(e.truncation_horizon)
          .add(e.truncation_bias_bound)
          .write(f);
      rows.push_back(e);
    }
    bounded("abel", rows);
    if (b.trajectories > 0) write_trajectories(last, b.start, rows.back().truncation_horizon, b.trajectories);
  }

  void cesaro() {
    const CesaroBlock& b = *cfg_.cesaro;
    std::ofstream f = open("cesaro.csv");
    pdmp::write_csv_header(f, {"T", "member", "mean", "stderr", "n_paths"});
    std::ofstream fam;
    if (b.family) {
      fam = open("cesaro_family.csv");
      pdmp::write_csv_header(fam, {"T", "member", "mean", "stderr"});
    }
    std::vector<pdmp::ValueEstimate> rows;
    pdmp::Policy last = b.policy;
    for (double T : b.horizons) {
      pdmp::ValueEstimate e;
      std::size_t member = 0;
      if (b.family) {
        const pdmp::OptimizationResult r = pdmp::optimize_value(model(), *b.family, b.start.mode, b.start.x,
                                                                pdmp::Objective::cesaro(T), b.n_paths, cfg_.seed,
                                                                estimator());
        for (std::size_t i = 0; i < r.table.size(); ++i) {
          pdmp::CsvRow().add(T).add(i).add(r.table[i].mean).add(r.table[i].std_error).write(fam);
        }
        e = r.best;
        member = r.best_index;
        last = r.best_policy;
      } else {
        e = pdmp::estimate_cesaro(model(), b.policy, b.start.mode, b.start.x, T, b.n_paths, cfg_.seed, estimator());
      }
      pdmp::CsvRow().add(T).add(member).add(e.mean).add(e.std_error).add(e.n_paths).write(f);
      rows.push_back(e);
    }
    bounded("cesaro", rows);
    if (b.trajectories > 0) write_trajectories(last, b.start, b.horizons.back(), b.trajectories);
  }

  void tauberian() {
    const TauberianBlock& b = *cfg_.tauberian;
    const auto rows =
        pdmp::tauberian_experiment(model(), b.family, b.probes, b.deltas, b.n_paths, cfg_.seed, estimator());
    std::ofstream f = open("tauberian.csv");
    pdmp::write_csv_header(f, {"delta", "T", "d", "d_stderr", "argmax_probe"});
    std::ofstream p = open("tauberian_probes.csv");
    std::vector<std::string> cols = {"delta", "probe", "mode_id"};
    for (std::size_t i = 0; i < model().dim(); ++i) cols.push_back("x_" + std::to_string(i + 1));
    for (const char* c : {"abel", "abel_stderr", "abel_member", "cesaro", "cesaro_stderr", "cesaro_member", "gap",
                          "gap_stderr"}) {
      cols.emplace_back(c);
    }
    pdmp::write_csv_header(p, cols);
    for (const auto& r : rows) {
      pdmp::CsvRow().add(r.delta).add(r.T).add(r.d).add(r.d_std_error).add(r.argmax_probe).write(f);
      for (std::size_t i = 0; i < r.probes.size(); ++i) {
        const auto& pr = r.probes[i];
        pdmp::CsvRow row;
        row.add(r.delta).add(i).add(pr.probe.mode);
        for (double x : pr.probe.x) row.add(x);
        row.add(pr.abel.best.mean)
            .add(pr.abel.best.std_error)
            .add(pr.abel.best_index)
            .add(pr.cesaro.best.mean)
            .add(pr.cesaro.best.std_error)
            .add(pr.cesaro.best_index)
            .add(pr.gap)
            .add(pr.gap_std_error);
        row.write(p);
      }
    }
    // Rounding floor so exact-zero gaps are not compared at the 1e-16 level.
    constexpr double kFloor = 1e-12;
    bool trend = true;
    std::string worst;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double slack = 2.0 * std::hypot(rows[i].d_std_error, rows[i - 1].d_std_error) + kFloor;
      if (rows[i].d > rows[i - 1].d + slack) {
        trend = false;
        worst = "d(" + format_real(rows[i].delta) + ")=" + format_real(rows[i].d) + " > d(" +
                format_real(rows[i - 1].delta) + ")=" + format_real(rows[i - 1].d) + " + " + format_real(slack);
      }
    }
    check("d_nonincreasing_within_2se", trend, trend ? "all consecutive rows within 2 standard errors" : worst);
    check("d_last_le_d_first", rows.back().d <= rows.front().d + kFloor,
          "d(" + format_real(rows.back().delta) + ")=" + format_real(rows.back().d) + ", d(" +
              format_real(rows.front().delta) + ")=" + format_real(rows.front().d));
  }

  pdmp::StateGrid grid(const std::vector<std::size_t>& nodes) const {
    const auto& box = model().info().invariant_box;
    if (!box) throw pdmp::ModelError("the grid solver needs a model with an invariant box");
    return pdmp::StateGrid(*box, nodes);
  }

  pdmp::SolverOptions solver(pdmp::BellmanScheme scheme, double max_substep) const {
    pdmp::SolverOptions o;
    o.scheme = scheme;
    o.max_substep = max_substep;
    o.threads = threads_;
    return o;
  }

  void write_table(const pdmp::ValueTable& t, const std::string& stem) {
    {
      std::ofstream f = open(stem + ".csv");
      pdmp::write_table_csv(f, t);
    }
    std::ofstream h = open(stem + ".json");
    h << pdmp::table_header_json(t) << '\n';
  }

  void solve() {
    const SolveBlock& b = *cfg_.solve;
    const auto controls = pdmp::control_grid(b.controls.u, b.controls.v);
    const pdmp::SolveResult r = pdmp::solve_discounted(model(), b.delta, b.n, controls, grid(b.nodes), b.tolerance,
                                                       solver(b.scheme, b.max_substep));
    write_table(r.table, "value_table");
    {
      std::ofstream f = open("iterations.csv");
      pdmp::write_csv_header(f, {"iteration", "sup_change", "ratio", "inner_iterations"});
      for (const auto& rec : r.log) {
        pdmp::CsvRow().add(rec.iteration).add(rec.sup_change).add(rec.ratio).add(rec.inner_iterations).write(f);
      }
    }
    const pdmp::HjbResidual hjb = pdmp::hjb_residual(model(), r.table);
    {
      std::ofstream f = open("hjb_residual.csv");
      std::vector<std::string> cols = {"mode_id"};
      const std::size_t dim = r.table.grid.dim();
      for (std::size_t d = 0; d < dim; ++d) cols.push_back("x_" + std::to_string(d + 1));
      cols.emplace_back("residual");
      cols.emplace_back("interior");
      pdmp::write_csv_header(f, cols);
      for (std::size_t g = 0; g < hjb.residual.size(); ++g) {
        for (std::size_t node = 0; node < r.table.grid.node_count(); ++node) {
          pdmp::CsvRow row;
          row.add(g);
          for (double x : r.table.grid.node(node)) row.add(x);
          row.add(hjb.residual[g][node]).add(hjb.interior[node] ? 1 : 0);
          row.write(f);
        }
      }
    }

    double worst_ratio = 0.0;
    for (std::size_t i = 1; i < r.log.size(); ++i) worst_ratio = std::max(worst_ratio, r.log[i].ratio);
    const double limit = r.contraction_bound + 0.02;
    check("contraction_ratio", worst_ratio <= limit,
          "max ratio " + format_real(worst_ratio) + ", limit " + format_real(limit));
    const double lip = pdmp::discrete_lipschitz(r.table);
    const double lip_limit = 1.1 * model().bounds().lip_h;
    check("table_lipschitz", lip <= lip_limit + 1e-12,
          "discrete Lipschitz " + format_real(lip) + ", limit " + format_real(lip_limit));

    if (b.cross_check) {
      const pdmp::Policy greedy = pdmp::greedy_policy(r.table);
      std::ofstream f = open("cross_check.csv");
      std::vector<std::string> cols = {"probe", "mode_id"};
      for (std::size_t d = 0; d < model().dim(); ++d) cols.push_back("x_" + std::to_string(d + 1));
      for (const char* c : {"table", "mc", "mc_stderr", "difference", "limit"}) cols.emplace_back(c);
      pdmp::write_csv_header(f, cols);
      bool ok = true;
      double worst = -HUGE_VAL;
      for (std::size_t i = 0; i < b.cross_check->probes.size(); ++i) {
        const pdmp::Probe& p = b.cross_check->probes[i];
        const double tv = r.table.value(p.mode, p.x);
        const pdmp::ValueEstimate e = pdmp::estimate_abel(model(), greedy, p.mode, p.x, b.delta,
                                                          b.cross_check->n_paths, pdmp::derive_seed(cfg_.seed, i),
                                                          estimator());
        const double diff = std::abs(e.mean - tv);
        const double lim = 3.0 * e.std_error + 2e-2;
        ok = ok && diff <= lim;
        worst = std::max(worst, diff - lim);
        pdmp::CsvRow row;
        row.add(i).add(p.mode);
        for (double x : p.x) row.add(x);
        row.add(tv).add(e.mean).add(e.std_error).add(diff).add(lim).write(f);
      }
      check("mc_matches_table", ok, "worst difference minus limit " + format_real(worst));
    }
  }

  void step_study() {
    const StepStudyBlock& b = *cfg_.step_study;
    const auto controls = pdmp::control_grid(b.controls.u, b.controls.v);
    const auto rows = pdmp::step_convergence_study(model(), b.delta, b.n_list, controls, grid(b.nodes), b.tolerance,
                                                   solver(b.scheme, b.max_substep));
    std::ofstream f = open("step_study.csv");
    pdmp::write_csv_header(f, {"n", "sup_difference", "iterations", "value_sup", "error_bound"});
    for (const auto& r : rows) {
      pdmp::CsvRow().add(r.n).add(r.sup_difference).add(r.iterations).add(r.value_sup).add(r.error_bound).write(f);
    }
    bool ok = true;
    std::string detail = "differences nonincreasing in n";
    const double ref = rows.back().error_bound;
    for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
      const double slack = 2.0 * (rows[i].error_bound + rows[i - 1].error_bound + 2.0 * ref);
      if (rows[i].sup_difference > rows[i - 1].sup_difference + slack) {
        ok = false;
        detail = "n=" + std::to_string(rows[i].n) + " difference " + format_real(rows[i].sup_difference) +
                 " exceeds n=" + std::to_string(rows[i - 1].n) + " difference " +
                 format_real(rows[i - 1].sup_difference) + " + " + format_real(slack);
      }
    }
    check("step_differences_nonincreasing", ok, detail);
  }

  pdmp::CouplingOptions coupling_options(std::size_t v_points, double tolerance, double k0) const {
    pdmp::CouplingOptions o;
    o.simulation = cfg_.simulation;
    o.v_grid = pdmp::uniform_v_grid(model(), v_points);
    o.tolerance = tolerance;
    o.threads = threads_;
    o.bias = cfg_.bias;
    o.k0 = k0;
    return o;
  }

  void coupling() {
    const CouplingBlock& b = *cfg_.coupling;
    const pdmp::CouplingOptions opts = coupling_options(b.v_grid_points, b.tolerance, b.k0);
    const double d0 = pdmp::distance(b.start.x, b.y0);
    const double lip_h = model().bounds().lip_h;
    std::ofstream paths = open("coupling.csv");
    std::ofstream sum = open("coupling_summary.csv");
    pdmp::write_csv_header(sum, {"n", "gap", "gap_stderr", "bias_bound", "lip_bound", "fitted_c", "epsilon",
                                 "max_sup_gap"});
    std::vector<pdmp::CouplingRow> all;
    std::vector<pdmp::CouplingGapResult> results;
    for (unsigned n : b.n_list) {
      pdmp::CouplingGapResult r =
          pdmp::coupling_gap(model(), b.start.mode, b.start.x, b.y0, b.policy, n, b.delta, b.n_paths, cfg_.seed, opts);
      pdmp::CsvRow()
          .add(n)
          .add(r.gap.mean)
          .add(r.gap.std_error)
          .add(r.gap.truncation_bias_bound)
          .add(lip_h * d0)
          .add(r.fitted_c)
          .add(r.epsilon)
          .add(r.max_sup_gap)
          .write(sum);
      all.insert(all.end(), r.rows.begin(), r.rows.end());
      results.push_back(std::move(r));
    }
    pdmp::write_coupling_csv(paths, all);

    if (d0 == 0.0) {
      bool zero = true;
      for (const auto& r : results) zero = zero && r.max_sup_gap == 0.0 && r.gap.mean == 0.0;
      check("equal_starts_zero_gap", zero, zero ? "every path pair identical" : "nonzero gap from equal starts");
    }
    bool bound = true;
    bool trend = true;
    std::string detail_bound = "gap <= Lip(h) |x0 - y0| + epsilon(n) + 2 stderr for every n";
    std::string detail_trend = "epsilon(n) nonincreasing";
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i];
      const double limit = lip_h * d0 + r.epsilon + 2.0 * r.gap.std_error + r.gap.truncation_bias_bound;
      if (r.gap.mean > limit) {
        bound = false;
        detail_bound = "n=" + std::to_string(b.n_list[i]) + " gap " + format_real(r.gap.mean) + " > " +
                       format_real(limit);
      }
      if (i > 0 && r.epsilon > results[i - 1].epsilon + 2.0 * std::hypot(r.gap.std_error, results[i - 1].gap.std_error)) {
        trend = false;
        detail_trend = "epsilon(" + std::to_string(b.n_list[i]) + ")=" + format_real(r.epsilon) + " > epsilon(" +
                       std::to_string(b.n_list[i - 1]) + ")=" + format_real(results[i - 1].epsilon);
      }
    }
    check("gap_within_bound", bound, detail_bound);
    check("epsilon_nonincreasing", trend, detail_trend);
  }

  void nonexp() {
    const NonexpBlock& b = *cfg_.nonexp_check;
    const pdmp::NonexpReport r = pdmp::check_nonexpansive_condition(
        model(), b.n_samples, pdmp::uniform_v_grid(model(), b.v_grid_points), cfg_.seed, b.tolerance, threads_);
    std::ofstream f = open("nonexp.csv");
    std::vector<std::string> cols = {"quantity", "value", "mode_id"};
    for (std::size_t d = 0; d < model().dim(); ++d) cols.push_back("x_" + std::to_string(d + 1));
    for (std::size_t d = 0; d < model().dim(); ++d) cols.push_back("y_" + std::to_string(d + 1));
    for (std::size_t d = 0; d < model().info().control_u.dim(); ++d) cols.push_back("u_" + std::to_string(d + 1));
    for (std::size_t d = 0; d < model().info().control_v.dim(); ++d) cols.push_back("v_" + std::to_string(d + 1));
    for (std::size_t d = 0; d < model().info().control_v.dim(); ++d) cols.push_back("w_" + std::to_string(d + 1));
    pdmp::write_csv_header(f, cols);
    const std::pair<const char*, const pdmp::DefectWitness*> rows[] = {
        {"flow", &r.worst_flow_gap},
        {"jump", &r.worst_jump_gap},
        {"cost", &r.worst_cost_gap},
        {"selected", &r.worst_defect},
        {"w_equals_v", &r.worst_w_equals_v}};
    for (const auto& [name, w] : rows) {
      pdmp::CsvRow row;
      row.add(name).add(w->value).add(w->mode);
      for (double x : w->x) row.add(x);
      for (double x : w->y) row.add(x);
      for (double x : w->u) row.add(x);
      for (double x : w->v) row.add(x);
      for (double x : w->w) row.add(x);
      row.write(f);
    }
    check("nonexpansive_condition", r.pass,
          "worst defect " + format_real(r.worst_defect.value) + " over " + std::to_string(r.samples) +
              " samples, tolerance " + format_real(r.tolerance));
  }

  void residuals(const std::string& stem, const pdmp::EmpiricalOccupation& m, double sigma, bool atoms) {
    const auto battery = pdmp::test_battery(model());
    const auto rows = pdmp::residual_report(model(), m, battery, threads_);
    {
      std::ofstream f = open(stem + "_residuals.csv");
      pdmp::write_residuals_csv(f, rows);
    }
    if (atoms) {
      std::ofstream f = open(stem + "_atoms.csv");
      pdmp::write_atoms_csv(f, m);
    }
    std::size_t bad = 0;
    double worst = 0.0;
    for (const auto& r : rows) {
      const double z = r.std_error > 0.0 ? std::abs(r.residual) / r.std_error : (r.residual == 0.0 ? 0.0 : HUGE_VAL);
      worst = std::max(worst, z);
      if (std::abs(r.residual) > sigma * r.std_error) ++bad;
    }
    check(stem + "_residuals_within_" + format_real(sigma) + "se", bad == 0,
          std::to_string(bad) + " of " + std::to_string(rows.size()) + " test functions outside; worst |z| " +
              format_real(worst));
  }

  void occupation() {
    const OccupationBlock& b = *cfg_.occupation;
    pdmp::OccupationOptions o;
    o.threads = threads_;
    o.simulation = cfg_.simulation;
    o.bias = cfg_.bias;
    o.max_atoms = b.max_atoms;
    {
      const pdmp::EmpiricalOccupation m =
          pdmp::simulate_occupation(model(), b.policy, b.start.mode, b.start.x, b.delta, b.n_paths, cfg_.seed, o);
      residuals("x", m, b.sigma, b.write_atoms);
    }
    if (b.coupled) {
      pdmp::CouplingOptions co;
      co.simulation = cfg_.simulation;
      co.threads = threads_;
      co.bias = cfg_.bias;
      const pdmp::CoupledOccupations c =
          pdmp::coupled_occupations(model(), b.start.mode, b.start.x, b.coupled->y0, b.policy, b.coupled->n, b.delta,
                                    b.n_paths, pdmp::derive_seed(cfg_.seed, 1), co, b.max_atoms);
      residuals("y", c.y, b.sigma, b.write_atoms);
    }
  }

  void validate() {
    const ValidateBlock& b = *cfg_.validate;
    const pdmp::ValidationReport r = pdmp::validate_model(model(), b.n_samples, cfg_.seed);
    std::ofstream f = open("validation.csv");
    pdmp::write_csv_header(f, {"quantity", "observed", "declared", "violation"});
    for (const auto& w : r.worst) {
      bool violated = false;
      for (const auto* list : {&r.bound_violations, &r.lipschitz_violations, &r.kernel_failures}) {
        for (const auto& v : *list) violated = violated || v.quantity == w.quantity;
      }
      pdmp::CsvRow().add(w.quantity).add(w.observed).add(w.declared).add(violated ? 1 : 0).write(f);
    }
    check("declared_bounds_hold", r.passed(),
          std::to_string(r.bound_violations.size() + r.lipschitz_violations.size() + r.kernel_failures.size()) +
              " violations over " + std::to_string(r.samples) + " samples");
  }

  const ExperimentConfig& cfg_;
  std::filesystem::path dir_;
  std::size_t threads_;
  pdmp::ModelPtr model_;
  RunOutcome out_;
};

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& config, const std::filesystem::path& output_dir,
                          std::size_t threads) {
  return Run(config, output_dir, threads).execute();
}

std::string format_summary(const ExperimentConfig& config, const RunOutcome& outcome) {
  std::ostringstream s;
  s << "experiment " << experiment_name(config.experiment) << " on " << config.model.name << ", seed "
    << config.seed << '\n';
  for (const Assertion& a : outcome.assertions) {
    s << (a.pass ? "PASS " : "FAIL ") << a.name << ": " << a.detail << '\n';
  }
  s << (outcome.passed() ? "result: pass" : "result: fail") << '\n';
  return s.str();
}

}  // namespace pdmpctl
