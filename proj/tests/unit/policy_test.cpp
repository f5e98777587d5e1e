#include <gtest/gtest.h>

#include "pdmp/errors.hpp"
#include "pdmp/models.hpp"
#include "pdmp/policy.hpp"

using namespace pdmp;

namespace {

ControlPoint cp(double u, double v) { return {ControlVec{u}, ControlVec{v}}; }

Policy two_step(const Model& m, ControlPoint a, ControlPoint b) {
  return Policy::stepped_open_loop(2, 1, 1, StateGrid::single(*m.info().invariant_box), 2, {a, b});
}

}  // namespace

TEST(StepIndex, LeftContinuousCells) {
  EXPECT_EQ(step_index(0.0, 2), 0u);
  EXPECT_EQ(step_index(0.5, 2), 0u);
  EXPECT_EQ(step_index(0.500001, 2), 1u);
  EXPECT_EQ(step_index(1.0, 2), 1u);
  EXPECT_EQ(step_index(1.0000001, 2), 2u);
  EXPECT_EQ(step_index(0.25, 4), 0u);
}

TEST(Policy, ConstantEverywhere) {
  const Policy p = Policy::constant(cp(0.3, 0.6));
  for (double t : {0.0, 0.1, 7.0, 1e6}) {
    EXPECT_EQ(evaluate_policy(p, 2, StateVec{1.0, 1.0}, t, 5), cp(0.3, 0.6));
  }
}

TEST(Policy, SteppedBoundaryInclusion) {
  const auto m = phage_lambda_model();
  const Policy p = two_step(*m, cp(0.1, 0.1), cp(0.9, 0.9));
  EXPECT_EQ(evaluate_policy(p, 0, StateVec{1.0, 1.0}, 0.0, 0), cp(0.1, 0.1));
  EXPECT_EQ(evaluate_policy(p, 0, StateVec{1.0, 1.0}, 0.5, 0), cp(0.1, 0.1));
  EXPECT_EQ(evaluate_policy(p, 0, StateVec{1.0, 1.0}, 0.500001, 0), cp(0.9, 0.9));
  // Tables wrap cyclically in the step index.
  EXPECT_EQ(evaluate_policy(p, 0, StateVec{1.0, 1.0}, 1.2, 0), cp(0.1, 0.1));
}

TEST(Policy, RefinementPreservesControls) {
  const auto m = phage_lambda_model();
  const Policy p = two_step(*m, cp(0.1, 0.2), cp(0.8, 0.7));
  const Policy r = p.refined(3);
  EXPECT_EQ(r.n(), 6u);
  for (int i = 0; i <= 400; ++i) {
    const double t = i * 0.0173;
    EXPECT_EQ(evaluate_policy(p, 1, StateVec{2.0, 2.0}, t, 3), evaluate_policy(r, 1, StateVec{2.0, 2.0}, t, 3)) << t;
  }
}

TEST(Policy, JsonRoundTrip) {
  const auto m = phage_lambda_model();
  const StateGrid grid(*m->info().invariant_box, {3, 2});
  std::vector<ControlPoint> table;
  for (std::size_t i = 0; i < 2 * 5 * grid.node_count() * 3; ++i) table.push_back(cp((i % 7) / 7.0, (i % 5) / 5.0));
  const Policy p = Policy::stepped_open_loop(4, 2, 5, grid, 3, table);
  EXPECT_EQ(policy_from_json(policy_to_json(p)), p);
  const Policy c = Policy::constant(cp(0.25, 0.5));
  EXPECT_EQ(policy_from_json(policy_to_json(c)), c);
}

TEST(Policy, CheckAgainstRejectsOutOfBoxControls) {
  const auto m = phage_lambda_model();
  EXPECT_NO_THROW(Policy::constant(cp(1.0, 0.0)).check_against(*m));
  EXPECT_THROW(Policy::constant(cp(1.5, 0.0)).check_against(*m), ModelError);
}

TEST(PolicyFamily, ConstantProductCount) {
  const auto m = phage_lambda_model();
  FamilySpec spec;
  spec.u_levels = {{0.0, 0.5, 1.0}};
  spec.v_levels = {{0.0, 1.0}};
  const PolicyFamily f = enumerate_policy_family(spec, *m);
  ASSERT_EQ(f.size(), 6u);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(f.at(i).kind(), PolicyKind::kConstant);
  EXPECT_EQ(evaluate_policy(f.at(5), 0, StateVec{1.0, 1.0}, 0.3, 0), cp(1.0, 1.0));
}

TEST(PolicyFamily, SteppedCount) {
  const auto m = toy_model(ToyKind::kControlledDecay);
  FamilySpec spec;
  spec.kind = FamilySpec::Kind::kStepped;
  spec.u_levels = {{0.0, 1.0}};
  spec.n = 1;
  spec.steps = 2;
  const PolicyFamily f = enumerate_policy_family(spec, *m);
  ASSERT_EQ(f.size(), 4u);
  // First cell varies slowest.
  const auto u = [&](std::size_t i, double t) { return evaluate_policy(f.at(i), 0, StateVec{0.5}, t, 0).u[0]; };
  EXPECT_EQ(u(1, 0.5), 0.0);
  EXPECT_EQ(u(1, 1.5), 1.0);
  EXPECT_EQ(u(2, 0.5), 1.0);
  EXPECT_EQ(u(2, 1.5), 0.0);
}

TEST(PolicyFamily, CapExceeded) {
  const auto m = toy_model(ToyKind::kControlledDecay);
  FamilySpec spec;
  spec.kind = FamilySpec::Kind::kStepped;
  spec.u_levels = {linspace(0.0, 1.0, 10)};
  spec.steps = 7;
  try {
    enumerate_policy_family(spec, *m);
    FAIL() << "expected ArgumentError";
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("10000000"), std::string::npos) << e.what();
  }
}

TEST(PolicyFamily, LevelsOutsideBoxRejected) {
  const auto m = toy_model(ToyKind::kControlledDecay);
  FamilySpec spec;
  spec.u_levels = {{0.0, 2.0}};
  EXPECT_THROW(enumerate_policy_family(spec, *m), std::exception);
}
