#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/models.hpp"

using namespace pdmp;

namespace {

ControlPoint cp(double u, double v) { return {ControlVec{u}, ControlVec{v}}; }

}  // namespace

TEST(PhageModel, FlowVanishesWithoutControl) {
  const auto m = phage_lambda_model();
  for (const auto& c : {cp(0.0, 0.7), cp(0.4, 0.0)}) {
    const StateVec f = m->flow_field(phage::kOR3, StateVec{3.0, 7.0}, c);
    EXPECT_EQ(f[0], 0.0);
    EXPECT_EQ(f[1], 0.0);
  }
}

TEST(PhageModel, FlowHandValue) {
  PhageParams p;
  p.alpha = 2.0;
  const auto m = phage_lambda_model(p);
  const StateVec f = m->flow_field(phage::kDFree, StateVec{1.0, 1.0}, cp(1.0, 1.0));
  EXPECT_NEAR(f[0], 0.0, 1e-15);
  EXPECT_NEAR(f[1], -0.5, 1e-15);
}

TEST(PhageModel, RateTable) {
  const PhageParams p;
  const auto m = phage_lambda_model(p);
  EXPECT_DOUBLE_EQ(m->jump_rate(phage::kDFree, StateVec{1.0, 2.0}, cp(0.3, 0.9)), (p.k2 + p.k3) * (0.3 + p.u0));
  EXPECT_DOUBLE_EQ(m->jump_rate(phage::kOR3, StateVec{1.0, 2.0}, cp(0.0, 0.9)), p.k_m3 * p.u0);
  EXPECT_DOUBLE_EQ(m->bounds().lambda_max, 3.0);
}

TEST(PhageModel, KernelRows) {
  PhageParams p;
  p.k2 = 1.0;
  p.k3 = 3.0;
  const auto m = phage_lambda_model(p);
  const ModeDistribution q = m->mode_distribution(phage::kDFree, cp(0.5, 0.5));
  EXPECT_DOUBLE_EQ(q[phage::kOR2Active], 0.25);
  EXPECT_DOUBLE_EQ(q[phage::kOR3], 0.75);
  const ModeDistribution q3 = m->mode_distribution(phage::kOR3, cp(0.5, 0.5));
  EXPECT_EQ(q3[phage::kDFree], 1.0);

  const auto sym = phage_lambda_model();
  const ModeDistribution qs = sym->mode_distribution(phage::kDFree, cp(0.5, 0.5));
  EXPECT_DOUBLE_EQ(qs[phage::kOR2Active], 0.5);
  EXPECT_DOUBLE_EQ(qs[phage::kOR3], 0.5);
}

TEST(PhageModel, KernelNormalizedWithoutSelfLoops) {
  const auto m = phage_lambda_model();
  for (ModeId g = 0; g < m->mode_count(); ++g) {
    for (double u : {0.0, 0.5, 1.0}) {
      const ModeDistribution q = m->mode_distribution(g, cp(u, 0.5));
      double s = 0.0;
      for (double x : q) s += x;
      EXPECT_NEAR(s, 1.0, 1e-12);
      EXPECT_EQ(q[g], 0.0);
    }
  }
}

TEST(PhageModel, JumpMaps) {
  const PhageParams p;
  const auto m = phage_lambda_model(p);
  const StateVec x{4.0, 0.4};
  const StateVec bound = m->jump_map(phage::kDFree, phage::kOR2Active, x, cp(0.5, 0.5));
  EXPECT_DOUBLE_EQ(bound[0], 4.0);
  EXPECT_DOUBLE_EQ(bound[1], 0.0);
  const StateVec y{8.0, 3.0};
  const StateVec burst = m->jump_map(phage::kOR2Active, phage::kOR2Spent, y, cp(0.5, 0.5));
  EXPECT_DOUBLE_EQ(burst[0], p.alpha);
  EXPECT_DOUBLE_EQ(burst[1], 3.0);
  const StateVec empty = m->jump_map(phage::kDFree, phage::kOR3, StateVec{2.0, 0.0}, cp(0.5, 0.5));
  EXPECT_EQ(empty, (StateVec{2.0, 0.0}));
}

TEST(PhageModel, ModeLabelsAndCost) {
  const auto m = phage_lambda_model();
  ASSERT_EQ(m->mode_count(), 5u);
  const char* labels[] = {"D_free", "OR2_active", "OR2_spent", "OR3", "BOTH"};
  for (ModeId g = 0; g < 5; ++g) EXPECT_EQ(m->info().modes[g].label, labels[g]);
  EXPECT_DOUBLE_EQ(m->running_cost(phage::kBoth, StateVec{10.0, 3.0}, cp(0.1, 0.1)), 1.0);
}

TEST(PhageModel, RandomizedStructuralProperties) {
  const PhageParams p;
  const auto m = phage_lambda_model(p);
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> box(0.0, p.alpha), unit(0.0, 1.0);
  for (int i = 0; i < 20000; ++i) {
    const StateVec x{box(gen), box(gen)};
    const StateVec y{box(gen), box(gen)};
    const ControlPoint c = cp(unit(gen), unit(gen));
    const ModeId g = static_cast<ModeId>(unit(gen) * 5.0);
    const StateVec d = x - y;
    EXPECT_LE(dot(m->flow_field(g, x, c) - m->flow_field(g, y, c), d), 1e-12);
    for (ModeId t = 0; t < 5; ++t) {
      const StateVec jx = m->jump_map(g, t, x, c);
      EXPECT_LE(distance(jx, m->jump_map(g, t, y, c)), norm(d) + 1e-12);
      EXPECT_TRUE(m->info().invariant_box->contains(jx, 0.0));
    }
    // Boundary signs.
    const double s = box(gen);
    EXPECT_GE(m->flow_field(g, StateVec{0.0, s}, c)[0], 0.0);
    EXPECT_GE(m->flow_field(g, StateVec{s, 0.0}, c)[1], 0.0);
    EXPECT_LE(m->flow_field(g, StateVec{p.alpha, s}, c)[0], 0.0);
    EXPECT_LE(m->flow_field(g, StateVec{s, p.alpha}, c)[1], 0.0);
  }
}

TEST(PhageModel, InvalidParamsRejected) {
  PhageParams p;
  p.k2 = -1.0;
  EXPECT_THROW(phage_lambda_model(p), ModelError);
  p = PhageParams{};
  p.alpha = std::nan("");
  EXPECT_THROW(phage_lambda_model(p), ModelError);
}

TEST(PhageModel, CheckedEntryPointsRejectBadInput) {
  const auto m = phage_lambda_model();
  EXPECT_THROW(m->jump_rate(7, StateVec{1.0, 1.0}, cp(0.5, 0.5)), std::exception);
  EXPECT_THROW(m->flow_field(0, StateVec{1.0}, cp(0.5, 0.5)), std::exception);
  EXPECT_THROW(m->flow_field(0, StateVec{1.0, 1.0}, cp(1.5, 0.5)), std::exception);
}

TEST(Validation, PhagePasses) {
  const auto m = phage_lambda_model();
  const ValidationReport r = validate_model(*m, 100000, 3);
  EXPECT_TRUE(r.passed());
  const LipschitzEstimate* g = r.find("lip_jump");
  ASSERT_NE(g, nullptr);
  EXPECT_LE(g->empirical, 1.0 + 1e-12);
}

TEST(Validation, FlagsUnboundedCost) {
  const ValidationReport r = validate_model(*fixtures::lying_cost_model(), 2000, 3);
  EXPECT_FALSE(r.passed());
  bool flagged = false;
  for (const auto& v : r.bound_violations) flagged = flagged || v.quantity == "h_max";
  EXPECT_TRUE(flagged);
}

TEST(Toys, ShapesAndCosts) {
  const auto c = toy_model(ToyKind::kConstantCost);
  EXPECT_EQ(c->mode_count(), 1u);
  EXPECT_DOUBLE_EQ(c->running_cost(0, StateVec{0.3}, {}), ToyParams{}.cost_constant);
  const auto d = toy_model(ToyKind::kDecay1d);
  EXPECT_DOUBLE_EQ(d->running_cost(0, StateVec{0.3}, {}), 0.3);
  EXPECT_DOUBLE_EQ(d->flow_field(0, StateVec{0.3}, {})[0], -0.3);
  EXPECT_EQ(d->jump_rate(0, StateVec{0.3}, {}), 0.0);
  const auto f = toy_model(ToyKind::kFlipflop);
  EXPECT_EQ(f->mode_count(), 2u);
  EXPECT_DOUBLE_EQ(f->jump_rate(1, StateVec{0.3}, {}), 1.0);
  EXPECT_EQ(f->running_cost(0, StateVec{0.3}, {}), 1.0);
  EXPECT_EQ(f->running_cost(1, StateVec{0.3}, {}), 0.0);
}

TEST(Toys, NamesRoundTrip) {
  for (ToyKind k : {ToyKind::kConstantCost, ToyKind::kDecay1d, ToyKind::kFlipflop, ToyKind::kControlledDecay}) {
    EXPECT_EQ(parse_toy_kind(toy_kind_name(k)), k);
  }
  EXPECT_THROW(parse_toy_kind("pendulum"), ModelError);
}

TEST(PhageModel, FlowOnLeftFace) {
  const auto m = phage_lambda_model();
  for (double x2 : {0.0, 2.5, 10.0}) {
    const StateVec f = m->flow_field(phage::kOR2Active, StateVec{0.0, x2}, cp(0.3, 0.8));
    EXPECT_NEAR(f[0], 2.0 * x2 * 0.3 * 0.8, 1e-14);
  }
}
