#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/models.hpp"
#include "pdmp/solver.hpp"

using namespace pdmp;

namespace {

StateGrid line_grid(const Model& m, std::size_t nodes) { return StateGrid(*m.info().invariant_box, {nodes}); }

std::vector<ControlPoint> no_control() { return control_grid({}, {}); }

std::vector<std::vector<double>> random_values(std::size_t modes, std::size_t nodes, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<std::vector<double>> v(modes, std::vector<double>(nodes));
  for (auto& row : v) {
    for (double& x : row) x = d(gen);
  }
  return v;
}

double sup_diff(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  double s = 0.0;
  for (std::size_t g = 0; g < a.size(); ++g) {
    for (std::size_t i = 0; i < a[g].size(); ++i) s = std::max(s, std::abs(a[g][i] - b[g][i]));
  }
  return s;
}

}  // namespace

TEST(Bellman, ConstantFixedPoint) {
  const auto m = toy_model(ToyKind::kConstantCost);
  ValueTable t = make_table(*m, line_grid(*m, 9), 0.5, 4, no_control());
  for (double& v : t.values[0]) v = 0.75;
  const ValueTable next = bellman_step(*m, t);
  for (double v : next.values[0]) EXPECT_NEAR(v, 0.75, 1e-14);
}

TEST(Bellman, MonotoneAndContracting) {
  const auto m = phage_lambda_model();
  const StateGrid grid(*m->info().invariant_box, {9, 9});
  const auto controls = control_grid({linspace(0, 1, 3)}, {linspace(0, 1, 3)});
  const BellmanOperator op(*m, grid, 0.5, 4, controls);
  const double modulus = op.contraction_bound(BellmanScheme::kTimeStep);
  EXPECT_LT(modulus, 1.0);
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_values(5, grid.node_count(), gen);
    auto b = random_values(5, grid.node_count(), gen);
    std::vector<std::vector<double>> ba, bb;
    op.apply(a, ba);
    op.apply(b, bb);
    EXPECT_LE(sup_diff(ba, bb), modulus * sup_diff(a, b) + 1e-12);
    // Monotonicity: raise b above a everywhere.
    for (std::size_t g = 0; g < 5; ++g) {
      for (std::size_t i = 0; i < b[g].size(); ++i) b[g][i] = a[g][i] + std::abs(b[g][i]);
    }
    op.apply(b, bb);
    for (std::size_t g = 0; g < 5; ++g) {
      for (std::size_t i = 0; i < ba[g].size(); ++i) EXPECT_LE(ba[g][i], bb[g][i] + 1e-12);
    }
  }
}

TEST(Bellman, JumpRecursionContracts) {
  const auto m = phage_lambda_model();
  const StateGrid grid(*m->info().invariant_box, {7, 7});
  const auto controls = control_grid({linspace(0, 1, 2)}, {linspace(0, 1, 2)});
  const BellmanOperator op(*m, grid, 0.5, 2, controls);
  const double modulus = op.contraction_bound(BellmanScheme::kJumpRecursion);
  EXPECT_NEAR(modulus, 3.0 / 3.5, 1e-12);
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = random_values(5, grid.node_count(), gen);
    const auto b = random_values(5, grid.node_count(), gen);
    std::vector<std::vector<double>> ja(a.size(), std::vector<double>(grid.node_count(), 0.0)), jb = ja;
    op.apply_jump_recursion(a, ja, 1e-13);
    op.apply_jump_recursion(b, jb, 1e-13);
    EXPECT_LE(sup_diff(ja, jb), modulus * sup_diff(a, b) + 1e-9);
  }
}

TEST(Solve, ConstantCostConvergesImmediately) {
  const auto m = toy_model(ToyKind::kConstantCost);
  SolverOptions o;
  o.scheme = BellmanScheme::kJumpRecursion;
  const SolveResult r = solve_discounted(*m, 0.5, 4, no_control(), line_grid(*m, 9), 1e-10, o);
  EXPECT_LE(r.log.size(), 2u);
  for (double v : r.table.values[0]) EXPECT_NEAR(v, 0.75, 1e-10);
}

TEST(Solve, DecayClosedForm) {
  const auto m = toy_model(ToyKind::kDecay1d);
  for (double delta : {0.2, 1.0}) {
    const SolveResult r = solve_discounted(*m, delta, 4, no_control(), line_grid(*m, 65), 1e-10);
    for (std::size_t i = 0; i < r.table.grid.node_count(); ++i) {
      const double x = r.table.grid.node(i)[0];
      EXPECT_NEAR(r.table.values[0][i], delta * x / (delta + 1.0), 1e-6) << delta << ' ' << x;
    }
    EXPECT_NEAR(discrete_lipschitz(r.table), delta / (delta + 1.0), 1e-6);
  }
}

TEST(Solve, FlipflopResolvent) {
  const auto m = toy_model(ToyKind::kFlipflop);
  for (BellmanScheme scheme : {BellmanScheme::kTimeStep, BellmanScheme::kJumpRecursion}) {
    SolverOptions o;
    o.scheme = scheme;
    for (double delta : {0.2, 1.0}) {
      const SolveResult r = solve_discounted(*m, delta, 4, no_control(), line_grid(*m, 256), 1e-9, o);
      for (double v : r.table.values[0]) EXPECT_NEAR(v, fixtures::flipflop_abel(delta, 1.0, true), 1e-3);
      for (double v : r.table.values[1]) EXPECT_NEAR(v, fixtures::flipflop_abel(delta, 1.0, false), 1e-3);
    }
  }
}

TEST(Solve, ControlledDecayPicksFullRate) {
  const auto m = toy_model(ToyKind::kControlledDecay);
  const auto controls = control_grid({{0.0, 0.5, 1.0}}, {});
  const SolveResult r = solve_discounted(*m, 1.0, 4, controls, line_grid(*m, 33), 1e-10);
  for (std::size_t i = 1; i < r.table.grid.node_count(); ++i) {
    const double x = r.table.grid.node(i)[0];
    EXPECT_NEAR(r.table.values[0][i], 0.5 * x, 1e-6);
    EXPECT_EQ(r.table.argmin[0][i], 2u);
  }
  const Policy g = greedy_policy(r.table);
  EXPECT_EQ(g.kind(), PolicyKind::kSteppedFeedback);
  EXPECT_EQ(g.n(), 4u);
}

TEST(Solve, LogRatiosBelowModulus) {
  const auto m = phage_lambda_model();
  const StateGrid grid(*m->info().invariant_box, {9, 9});
  const auto controls = control_grid({linspace(0, 1, 3)}, {linspace(0, 1, 3)});
  SolverOptions o;
  o.scheme = BellmanScheme::kJumpRecursion;
  const SolveResult r = solve_discounted(*m, 0.5, 4, controls, grid, 1e-8, o);
  ASSERT_GE(r.log.size(), 3u);
  for (std::size_t i = 1; i < r.log.size(); ++i) EXPECT_LE(r.log[i].ratio, r.contraction_bound + 0.02);
  EXPECT_LE(r.log.back().sup_change, 1e-8);
  // Lipschitz continuity in x with the cost's constant.
  EXPECT_LE(discrete_lipschitz(r.table), 1.1 * m->bounds().lip_h + 1e-12);
  for (const auto& row : r.table.values) {
    for (double v : row) {
      EXPECT_GE(v, -1e-12);
      EXPECT_LE(v, 1.0 + 1e-12);
    }
  }
}

TEST(Solve, IterationBoundEnforced) {
  const auto m = toy_model(ToyKind::kFlipflop);
  SolverOptions o;
  o.max_iterations = 2;
  EXPECT_THROW(solve_discounted(*m, 0.01, 4, no_control(), line_grid(*m, 3), 1e-12, o), ConvergenceError);
}

TEST(Hjb, DecayResidualVanishes) {
  const auto m = toy_model(ToyKind::kDecay1d);
  const SolveResult r = solve_discounted(*m, 1.0, 4, no_control(), line_grid(*m, 65), 1e-10);
  const HjbResidual h = hjb_residual(*m, r.table);
  EXPECT_LT(h.sup_interior, 1e-5);
  EXPECT_FALSE(h.interior.front());
  EXPECT_FALSE(h.interior.back());
}

TEST(Hjb, FlipflopResidualVanishes) {
  const auto m = toy_model(ToyKind::kFlipflop);
  const SolveResult r = solve_discounted(*m, 1.0, 4, no_control(), line_grid(*m, 17), 1e-10);
  EXPECT_LT(hjb_residual(*m, r.table).sup_interior, 1e-6);
}

TEST(StepStudy, NoJumpModelIsStepIndependent) {
  const auto m = toy_model(ToyKind::kControlledDecay);
  const auto controls = control_grid({{0.0, 1.0}}, {});
  const double tol = 1e-10;
  SolverOptions o;
  o.max_substep = 1e-3;  // keeps the RK4 flow error below tol
  const auto rows = step_convergence_study(*m, 1.0, {2, 4, 8}, controls, line_grid(*m, 17), tol, o);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows.back().sup_difference, 0.0);
  for (const auto& row : rows) EXPECT_LE(row.sup_difference, 2.0 * (row.error_bound + rows.back().error_bound) + 1e-8);
}

TEST(StepStudy, RequiresIncreasingList) {
  const auto m = toy_model(ToyKind::kDecay1d);
  EXPECT_THROW(step_convergence_study(*m, 1.0, {4, 2}, no_control(), line_grid(*m, 5), 1e-8), ArgumentError);
}

TEST(Table, CsvAndHeader) {
  const auto m = toy_model(ToyKind::kFlipflop);
  const ValueTable t = make_table(*m, line_grid(*m, 3), 0.5, 2, no_control());
  std::ostringstream s;
  write_table_csv(s, t);
  const std::string text = s.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "mode_id,i_1,x_1,value");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
  EXPECT_NE(table_header_json(t).find("\"delta\""), std::string::npos);
}
