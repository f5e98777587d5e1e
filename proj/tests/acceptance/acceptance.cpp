// Acceptance suite: one PASS/FAIL line per criterion. Arguments select
// criteria by id (C1..C11); none runs all.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "experiments.hpp"
#include "pdmp/coupling.hpp"
#include "pdmp/models.hpp"
#include "pdmp/occupation.hpp"
#include "pdmp/solver.hpp"
#include "pdmp/value.hpp"

using namespace pdmp;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kInvarianceTol = 1e-6;
constexpr double kDefectTol = 1e-9;
constexpr double kOracleTol = 1e-3;
constexpr double kRatioSlack = 0.02;
constexpr double kCrossAbs = 2e-2;
constexpr double kCrossSigma = 3.0;
constexpr double kCrossMaxStderr = 1e-2;
constexpr double kLipFactor = 1.1;
constexpr double kTrendSigma = 2.0;
constexpr double kResidualSigma = 3.0;
constexpr double kZeroFloor = 1e-12;

constexpr double kPhageDelta = 0.5;
constexpr unsigned kPhageN = 4;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

std::vector<ControlPoint> phage_controls() { return control_grid({linspace(0, 1, 5)}, {linspace(0, 1, 5)}); }

const SolveResult& phage_solution() {
  static const SolveResult r = [] {
    const auto m = phage_lambda_model();
    SolverOptions o;
    o.scheme = BellmanScheme::kJumpRecursion;
    return solve_discounted(*m, kPhageDelta, kPhageN, phage_controls(), StateGrid(*m->info().invariant_box, {64, 64}),
                            1e-8, o);
  }();
  return r;
}

class BoxWatch final : public PathObserver {
 public:
  explicit BoxWatch(double hi) : hi_(hi) {}
  void on_substep(const Substep& s) override {
    see(s.x0);
    see(s.xm);
    see(s.x1);
  }
  void on_jump(const JumpEvent& j) override { see(j.post); }
  void on_end(double, ModeId, const StateVec& x) override { see(x); }
  double worst = 0.0;
  std::size_t states = 0;

 private:
  void see(const StateVec& x) {
    ++states;
    for (double c : x) worst = std::max({worst, -c, c - hi_});
  }
  double hi_;
};

Outcome c1_invariance() {
  const auto m = phage_lambda_model();
  const double alpha = 10.0;
  const std::size_t n_paths = 10'000;
  SimulationOptions o;
  o.invariance = InvarianceMode::kClamp;
  o.invariance_tolerance = kInvarianceTol;
  const auto levels = linspace(0, 1, 3);
  std::mt19937_64 gen(101);
  std::uniform_real_distribution<double> box(0.0, alpha);
  double worst = 0.0;
  std::size_t outside = 0, clamps = 0, states = 0;
  for (std::size_t i = 0; i < n_paths; ++i) {
    const Policy pol = Policy::constant({ControlVec{levels[i % 3]}, ControlVec{levels[(i / 3) % 3]}});
    StateVec x0{box(gen), box(gen)};
    if (i % 10 == 0) x0 = StateVec{alpha * double(i / 10 % 2), alpha * double(i / 20 % 2)};
    BoxWatch watch(alpha);
    Rng rng({101, i});
    const PathSummary s = simulate_path(*m, static_cast<ModeId>(i % 5), x0, pol, 50.0, rng, o, watch);
    worst = std::max({worst, watch.worst, s.max_excess});
    outside += watch.worst > kInvarianceTol ? 1 : 0;
    clamps += s.clamp_events;
    states += watch.states;
  }
  return {outside == 0 && clamps == 0, std::to_string(n_paths) + " paths, " + std::to_string(states) +
                                           " states, max excess " + num(worst) + ", clamps " + std::to_string(clamps)};
}

Outcome c2_nonexp() {
  const auto m = phage_lambda_model();
  const std::size_t samples = 100'000;
  const NonexpReport r = check_nonexpansive_condition(*m, samples, uniform_v_grid(*m, 33), 202, kDefectTol, 1);
  // Direct check of the inner-product and jump inequalities with w = v.
  std::mt19937_64 gen(203);
  std::uniform_real_distribution<double> box(0.0, 10.0), unit(0.0, 1.0);
  double flow = -HUGE_VAL, jump = -HUGE_VAL;
  for (std::size_t i = 0; i < samples; ++i) {
    const ModeId g = static_cast<ModeId>(i % 5);
    const StateVec x{box(gen), box(gen)}, y{box(gen), box(gen)};
    const ControlPoint c{ControlVec{unit(gen)}, ControlVec{unit(gen)}};
    const StateVec fx = m->flow_field(g, x, c), fy = m->flow_field(g, y, c);
    flow = std::max(flow, (x[0] - y[0]) * (fx[0] - fy[0]) + (x[1] - y[1]) * (fx[1] - fy[1]));
    const ModeDistribution q = m->mode_distribution(g, c);
    for (ModeId t = 0; t < q.size(); ++t) {
      if (q[t] <= 0.0) continue;
      jump = std::max(jump, distance(m->jump_map(g, t, x, c), m->jump_map(g, t, y, c)) - distance(x, y));
    }
  }
  const bool ok = r.pass && r.worst_w_equals_v.value <= kDefectTol && flow <= kDefectTol && jump <= kDefectTol;
  return {ok, "selected defect " + num(r.worst_defect.value) + ", w=v defect " + num(r.worst_w_equals_v.value) +
                  ", direct flow " + num(flow) + ", direct jump " + num(jump) + " over " + std::to_string(samples)};
}

Outcome c3_oracles() {
  double worst = 0.0;
  const auto none = control_grid({}, {});
  for (double delta : {0.2, 1.0}) {
    for (ToyKind kind : {ToyKind::kConstantCost, ToyKind::kDecay1d, ToyKind::kFlipflop}) {
      const auto m = toy_model(kind);
      const SolveResult r =
          solve_discounted(*m, delta, 4, none, StateGrid(*m->info().invariant_box, {256}), 1e-9);
      for (ModeId g = 0; g < r.table.mode_count(); ++g) {
        for (std::size_t i = 0; i < r.table.grid.node_count(); ++i) {
          const double x = r.table.grid.node(i)[0];
          double oracle = 0.0;
          switch (kind) {
            case ToyKind::kConstantCost: oracle = 0.75; break;
            case ToyKind::kDecay1d: oracle = delta * x / (delta + 1.0); break;
            default: {
              // Two-state resolvent with flip rate 1, cost 1 in A.
              const double s = delta / (delta + 2.0);
              oracle = g == 0 ? 0.5 * (1.0 + s) : 0.5 * (1.0 - s);
            }
          }
          worst = std::max(worst, std::abs(r.table.values[g][i] - oracle));
        }
      }
    }
  }
  return {worst <= kOracleTol, "sup error " + num(worst) + " over 3 toys, delta in {0.2, 1}, 256 nodes"};
}

Outcome c4_contraction() {
  const auto m = phage_lambda_model();
  const SolveResult& r = phage_solution();
  const double lam = m->bounds().lambda_max;
  const double limit = lam / (kPhageDelta + lam) + kRatioSlack;
  double worst = 0.0;
  for (std::size_t i = 1; i < r.log.size(); ++i) worst = std::max(worst, r.log[i].ratio);
  return {worst <= limit && r.log.size() > 2,
          std::to_string(r.log.size()) + " iterations, max ratio " + num(worst) + ", limit " + num(limit)};
}

Outcome c5_cross_validation() {
  const auto m = phage_lambda_model();
  const SolveResult& r = phage_solution();
  const Policy greedy = greedy_policy(r.table);
  const std::vector<Probe> probes{{phage::kDFree, {5.0, 5.0}},
                                  {phage::kOR2Active, {2.0, 8.0}},
                                  {phage::kOR2Spent, {9.0, 1.0}},
                                  {phage::kOR3, {7.5, 2.5}},
                                  {phage::kBoth, {1.0, 1.0}}};
  bool ok = true;
  std::ostringstream d;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const double tv = r.table.value(probes[i].mode, probes[i].x);
    const ValueEstimate e = estimate_abel(*m, greedy, probes[i].mode, probes[i].x, kPhageDelta, 10'000, 500 + i);
    const double diff = std::abs(e.mean - tv);
    ok = ok && diff <= kCrossSigma * e.std_error + kCrossAbs && e.std_error <= kCrossMaxStderr;
    d << (i ? "; " : "") << "table " << num(tv) << " mc " << num(e.mean) << " se " << num(e.std_error);
  }
  return {ok, d.str()};
}

Outcome c6_lipschitz() {
  const auto m = phage_lambda_model();
  const double lip = discrete_lipschitz(phage_solution().table);
  const double limit = kLipFactor * m->bounds().lip_h;
  return {lip <= limit, "discrete Lipschitz " + num(lip) + ", limit " + num(limit)};
}

Outcome c7_tauberian() {
  const auto m = phage_lambda_model();
  FamilySpec fam;
  fam.u_levels = {{0.0, 1.0}};
  fam.v_levels = {{0.0, 1.0}};
  const std::vector<Probe> probes{{phage::kDFree, {5.0, 5.0}}, {phage::kOR3, {8.0, 2.0}}, {phage::kBoth, {1.0, 9.0}}};
  EstimatorOptions o;
  o.bias = 1e-3;
  const auto rows = tauberian_experiment(*m, fam, probes, {0.5, 0.2, 0.1, 0.05}, 400, 707, o);
  bool trend = true;
  std::ostringstream d;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d << (i ? ", " : "") << "d(" << num(rows[i].delta) << ")=" << num(rows[i].d) << "+-" << num(rows[i].d_std_error);
    if (i > 0) {
      const double slack = kTrendSigma * std::hypot(rows[i].d_std_error, rows[i - 1].d_std_error) + kZeroFloor;
      trend = trend && rows[i].d <= rows[i - 1].d + slack;
    }
  }
  const bool last = rows.back().d <= rows.front().d + kZeroFloor;
  return {trend && last, d.str()};
}

Outcome c8_step_study() {
  const auto m = phage_lambda_model();
  SolverOptions o;
  o.scheme = BellmanScheme::kJumpRecursion;
  const auto rows = step_convergence_study(*m, kPhageDelta, {4, 16, 64, 256}, phage_controls(),
                                           StateGrid(*m->info().invariant_box, {32, 32}), 1e-8, o);
  const double ref = rows.back().error_bound;
  bool ok = true;
  std::ostringstream d;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    d << (i ? ", " : "") << "n=" << rows[i].n << ": " << num(rows[i].sup_difference);
    if (i > 0) {
      const double slack = 2.0 * (rows[i].error_bound + rows[i - 1].error_bound + 2.0 * ref);
      ok = ok && rows[i].sup_difference <= rows[i - 1].sup_difference + slack;
    }
  }
  return {ok, d.str()};
}

Outcome c9_coupling() {
  const auto m = phage_lambda_model();
  const Policy pol = Policy::constant({ControlVec{0.5}, ControlVec{0.5}});
  const StateVec x0{4.0, 5.0}, y0{4.0, 6.0};
  const double lip = m->bounds().lip_h;
  bool ok = true;
  std::ostringstream d;
  std::vector<CouplingGapResult> res;
  const std::vector<unsigned> ns{4, 16, 64, 256};
  for (unsigned n : ns) {
    const CouplingGapResult same = coupling_gap(*m, phage::kDFree, x0, x0, pol, n, kPhageDelta, 200, 900 + n);
    ok = ok && same.gap.mean == 0.0 && same.max_sup_gap == 0.0;
    CouplingGapResult r = coupling_gap(*m, phage::kDFree, x0, y0, pol, n, kPhageDelta, 1000, 950 + n);
    const double limit = lip * 1.0 + r.epsilon + kTrendSigma * r.gap.std_error + r.gap.truncation_bias_bound;
    ok = ok && r.gap.mean <= limit;
    if (!res.empty()) {
      ok = ok && r.epsilon <= res.back().epsilon + kTrendSigma * std::hypot(r.gap.std_error, res.back().gap.std_error);
    }
    d << (res.empty() ? "" : "; ") << "n=" << n << " gap " << num(r.gap.mean) << " eps " << num(r.epsilon);
    res.push_back(std::move(r));
  }
  return {ok, "equal starts zero; " + d.str() + "; Lip(h)=" + num(lip)};
}

Outcome c10_occupation() {
  const auto m = phage_lambda_model();
  const Policy pol = Policy::constant({ControlVec{0.5}, ControlVec{0.5}});
  const auto battery = test_battery(*m);
  const std::size_t n_paths = 10'000;
  auto count = [&](const EmpiricalOccupation& mu, double& worst) {
    std::size_t bad = 0;
    for (const ResidualResult& r : residual_report(*m, mu, battery, 1)) {
      const double z = r.std_error > 0.0 ? std::abs(r.residual) / r.std_error : (r.residual == 0.0 ? 0.0 : HUGE_VAL);
      worst = std::max(worst, z);
      bad += std::abs(r.residual) > kResidualSigma * r.std_error ? 1 : 0;
    }
    return bad;
  };
  double wx = 0.0, wy = 0.0;
  const EmpiricalOccupation x = simulate_occupation(*m, pol, phage::kDFree, {4.0, 5.0}, kPhageDelta, n_paths, 1010);
  const std::size_t bx = count(x, wx);
  const CoupledOccupations c =
      coupled_occupations(*m, phage::kDFree, {4.0, 5.0}, {4.0, 6.0}, pol, kPhageN, kPhageDelta, n_paths, 1011);
  const std::size_t by = count(c.y, wy);
  return {battery.size() == 30 && bx == 0 && by == 0,
          "X: " + std::to_string(bx) + " of " + std::to_string(battery.size()) + " outside, worst |z| " + num(wx) +
              "; Y: " + std::to_string(by) + " outside, worst |z| " + num(wy)};
}

std::map<std::string, std::string> csv_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".csv") continue;
    std::ifstream f(e.path(), std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    out[e.path().filename().string()] = s.str();
  }
  return out;
}

Outcome c11_reproducibility() {
  const std::vector<std::string> configs{
      R"({"model": {"name": "phage_lambda"}, "experiment": "abel", "seed": 1,
          "abel": {"deltas": [0.5], "n_paths": 200, "start": {"mode": 0, "x": [5, 5]},
                   "policy": {"kind": "constant", "table": [{"u": [0.3], "v": [0.7]}]}, "trajectories": 2}})",
      R"({"model": {"name": "phage_lambda"}, "experiment": "tauberian", "seed": 2,
          "tauberian": {"family": {"kind": "constant", "u_levels": [[0, 1]], "v_levels": [[0, 1]]},
                        "probes": [{"mode": 0, "x": [5, 5]}], "deltas": [0.5, 0.2], "n_paths": 50}})",
      R"({"model": {"name": "phage_lambda"}, "experiment": "solve", "seed": 3,
          "solve": {"delta": 0.5, "n": 4, "nodes": [9, 9], "controls": {"u_levels": [[0, 1]], "v_levels": [[0, 1]]},
                    "cross_check": {"probes": [{"mode": 0, "x": [5, 5]}], "n_paths": 100}}})",
      R"({"model": {"name": "phage_lambda"}, "experiment": "coupling", "seed": 4,
          "coupling": {"n_list": [4, 16], "delta": 0.5, "n_paths": 50, "start": {"mode": 0, "x": [4, 5]},
                       "y0": [4, 6], "policy": {"kind": "constant", "table": [{"u": [0.5], "v": [0.5]}]}}})",
      R"({"model": {"name": "phage_lambda"}, "experiment": "occupation", "seed": 5,
          "occupation": {"delta": 0.5, "n_paths": 100, "start": {"mode": 0, "x": [4, 5]},
                         "policy": {"kind": "constant", "table": [{"u": [0.5], "v": [0.5]}]}, "write_atoms": true,
                         "max_atoms": 20000, "coupled": {"y0": [4, 6], "n": 4}}})",
      R"({"model": {"name": "phage_lambda"}, "experiment": "nonexp_check", "seed": 6,
          "nonexp_check": {"n_samples": 5000}})"};
  const fs::path root = fs::temp_directory_path() / "pdmp_acceptance_repro";
  fs::remove_all(root);
  std::size_t compared = 0;
  std::string mismatch;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const pdmpctl::ExperimentConfig cfg = pdmpctl::parse_config(configs[i]);
    std::vector<std::map<std::string, std::string>> runs;
    for (std::size_t threads : {1, 1, 2}) {
      const fs::path dir = root / (std::to_string(i) + "_" + std::to_string(runs.size()));
      pdmpctl::run_experiment(cfg, dir, threads);
      runs.push_back(csv_files(dir));
    }
    for (std::size_t k = 1; k < runs.size(); ++k) {
      if (runs[k] != runs[0]) mismatch = pdmpctl::experiment_name(cfg.experiment);
    }
    compared += runs[0].size();
  }
  fs::remove_all(root);
  return {mismatch.empty() && compared > 0,
          mismatch.empty() ? std::to_string(compared) + " CSVs identical across repeated runs at 1 and 2 threads"
                           : "CSV mismatch in " + mismatch};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::pair<std::string, std::function<Outcome()>>>> criteria{
      {"C1", {"phage_invariance", c1_invariance}},
      {"C2", {"nonexpansive_condition", c2_nonexp}},
      {"C3", {"solver_oracles", c3_oracles}},
      {"C4", {"contraction_certificate", c4_contraction}},
      {"C5", {"mc_solver_cross_validation", c5_cross_validation}},
      {"C6", {"table_lipschitz", c6_lipschitz}},
      {"C7", {"tauberian_trend", c7_tauberian}},
      {"C8", {"step_policy_convergence", c8_step_study}},
      {"C9", {"coupling_gap", c9_coupling}},
      {"C10", {"occupation_residuals", c10_occupation}},
      {"C11", {"reproducibility", c11_reproducibility}},
  };
  const std::set<std::string> only(argv + 1, argv + argc);
  bool all = true;
  for (const auto& [id, entry] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %s %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id.c_str(), entry.first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
