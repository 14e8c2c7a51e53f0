#include <gtest/gtest.h>

#include "hb/hb.hpp"

namespace {

using hb::NodeId;
using hb::Rational;
using hb::TreeBandit;
using hb::TreeNode;
using hb::Violation;

TreeBandit<double> path_0_4_10() { return hb::path_bandit<double>({0, 4}, {0.5, 1}, {4, 10}); }

TEST(Validate, AcceptsWellFormedTree) {
  EXPECT_TRUE(hb::validate(path_0_4_10()).ok());
}

TEST(Validate, ReportsZeroHaltingMassAtTheNode) {
  std::vector<TreeNode<double>> nodes = {
      {0, 0.0, false, {{1, 1.0, false}}},
      {1, 2.0, false, {{2, 1.0, true}}},
      {2, 3.0, true, {}},
  };
  const auto r = hb::validate(TreeBandit<double>(nodes, 0));
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].kind, Violation::kZeroHaltingMass);
  EXPECT_EQ(r.violations[0].where, 0u);
}

TEST(Validate, ReportsStructuralProblems) {
  std::vector<TreeNode<double>> sum_off = {
      {0, 0.0, false, {{1, 0.5, true}, {2, 0.25, false}}},
      {1, 1.0, true, {}},
      {2, 1.0, false, {{3, 1.0, true}}},
      {3, 1.0, true, {}},
  };
  EXPECT_TRUE(hb::validate(TreeBandit<double>(sum_off, 0)).has(Violation::kProbabilitySum));

  std::vector<TreeNode<double>> dead_end = {
      {0, 0.0, false, {{1, 0.5, true}, {2, 0.5, false}}},
      {1, 1.0, true, {}},
      {2, 1.0, false, {}},
  };
  EXPECT_TRUE(hb::validate(TreeBandit<double>(dead_end, 0)).has(Violation::kDeadEnd));

  std::vector<TreeNode<double>> bad_depth = {
      {0, 0.0, false, {{1, 1.0, true}}},
      {2, 1.0, true, {}},
  };
  EXPECT_TRUE(hb::validate(TreeBandit<double>(bad_depth, 0)).has(Violation::kDepth));

  std::vector<TreeNode<double>> halting_into_live = {
      {0, 0.0, false, {{1, 1.0, true}}},
      {1, 1.0, false, {{2, 1.0, true}}},
      {2, 1.0, true, {}},
  };
  EXPECT_TRUE(hb::validate(TreeBandit<double>(halting_into_live, 0)).has(Violation::kHaltingTarget));

  std::vector<TreeNode<double>> orphan = {
      {0, 0.0, false, {{1, 1.0, true}}},
      {1, 1.0, true, {}},
      {1, 1.0, true, {}},
  };
  EXPECT_TRUE(hb::validate(TreeBandit<double>(orphan, 0)).has(Violation::kUnreachable));
}

TEST(Validate, RespectsConfiguredLimits) {
  hb::TreeLimits limits;
  limits.max_depth = 1;
  EXPECT_TRUE(hb::validate(path_0_4_10(), limits).has(Violation::kLimit));
}

TEST(Validate, RejectsEdgeToUnknownNodeAtConstruction) {
  std::vector<TreeNode<double>> nodes = {{0, 0.0, false, {{7, 1.0, true}}}};
  EXPECT_THROW(TreeBandit<double>(nodes, 0), hb::PreconditionError);
}

TEST(Validate, MarkovChecks) {
  EXPECT_TRUE(hb::validate(hb::geometric_markov(1.0, 0.5)).ok());
  hb::MarkovBandit b = hb::geometric_markov(1.0, 0.5);
  b.states[0].halt_prob = 0.0;
  EXPECT_TRUE(hb::validate(b).has(Violation::kZeroHaltingMass));
  b = hb::geometric_markov(std::vector<double>{1.0, 2.0}, 0.9);
  b.transitions[0] = {0.5, 0.4};
  EXPECT_TRUE(hb::validate(b).has(Violation::kProbabilitySum));
  b.transitions.pop_back();
  EXPECT_TRUE(hb::validate(b).has(Violation::kTransitionShape));
}

TEST(Validate, ProfitBanditNeedsCostsEverywhere) {
  hb::ProfitBandit<double> p{path_0_4_10(), {1.0, 2.0}};
  EXPECT_TRUE(hb::validate(p).has(Violation::kCosts));
}

TEST(Normalize, ShiftsByRootReward) {
  const auto b = hb::path_bandit<double>({3, 5}, {0.5, 1}, {3, 2});
  const auto n = hb::normalize(b);
  EXPECT_EQ(n.node(0).reward, 0.0);
  EXPECT_EQ(n.node(2).reward, 2.0);
  EXPECT_EQ(n.node(3).reward, -1.0);
  EXPECT_EQ(n.node(1).reward, 0.0);
}

TEST(Normalize, IdentityWhenRootIsZeroAndIdempotent) {
  const auto b = path_0_4_10();
  EXPECT_EQ(hb::normalize(b).rewards(), b.rewards());
  const auto shifted = hb::path_bandit<double>({3, 5}, {0.5, 1}, {3, 2});
  EXPECT_EQ(hb::normalize(hb::normalize(shifted)).rewards(), hb::normalize(shifted).rewards());
}

TEST(Normalize, CollectiveValueShiftsByRootRewards) {
  // every policy's CP value drops by exactly X^1_0 + X^2_0 = 3 + 2
  hb::TreeGame<Rational> g;
  g.bandits.push_back(hb::path_bandit<Rational>({3, 5}, {Rational(1, 2), 1}, {4, 1}));
  g.bandits.push_back(hb::path_bandit<Rational>({2, 1}, {Rational(1, 4), 1}, {6, 0}));
  hb::TreeGame<Rational> n = g;
  for (auto& b : n.bandits) b = hb::normalize(b);
  for (const auto& p : hb::enumerate_policies(g)) {
    EXPECT_EQ(hb::evaluate_exact(n, hb::Policy{p}), hb::evaluate_exact(g, hb::Policy{p}) - 5);
  }
}

TEST(GeometricMarkov, Construction) {
  const auto one = hb::geometric_markov(1.0, 0.5);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one.states[0].halt_prob, 0.5);
  const auto two = hb::geometric_markov(std::vector<double>{1.0, 2.0}, 0.9);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_DOUBLE_EQ(two.states[1].halt_prob, 0.1);
  EXPECT_EQ(two.transitions[0][1], 1.0);
  EXPECT_EQ(two.transitions[1][0], 1.0);
}

TEST(GeometricMarkov, RejectsBetaOutsideOpenInterval) {
  EXPECT_THROW(hb::geometric_markov(1.0, 1.0), hb::PreconditionError);
  EXPECT_THROW(hb::geometric_markov(1.0, 0.0), hb::PreconditionError);
}

TEST(GeometricMarkov, ValidatesForAnyBetaInRange) {
  for (double beta : {0.01, 0.3, 0.5, 0.9, 0.999}) {
    EXPECT_TRUE(hb::validate(hb::geometric_markov(std::vector<double>{1.0, -2.0, 5.0}, beta)).ok());
  }
}

TEST(Unroll, ForcesHaltAtDepthLimit) {
  const auto t = hb::unroll(hb::geometric_markov(1.0, 0.5), 3);
  EXPECT_TRUE(hb::validate(t).ok());
  EXPECT_EQ(t.max_depth(), 3);
  int live = 0;
  for (const auto& n : t.nodes()) live += n.halted ? 0 : 1;
  EXPECT_EQ(live, 3);
}

TEST(PathBandit, LayoutAndSubtree) {
  const auto b = path_0_4_10();
  ASSERT_EQ(b.size(), 4u);
  EXPECT_TRUE(b.node(1).halted);
  EXPECT_FALSE(b.node(2).halted);
  EXPECT_EQ(b.node(3).reward, 10.0);
  EXPECT_EQ(hb::subtree(b, 0), (std::vector<NodeId>{0, 1, 2, 3}));
  EXPECT_TRUE(hb::is_ancestor(b, 0, 3));
  EXPECT_FALSE(hb::is_ancestor(b, 1, 3));
  EXPECT_EQ(b.halting_mass(0), 0.5);
}

TEST(Scalar, ExactDecimalParsing) {
  EXPECT_EQ(hb::ScalarTraits<Rational>::from_decimal("0.1"), Rational(1, 10));
  EXPECT_EQ(hb::ScalarTraits<Rational>::from_decimal("3/4"), Rational(3, 4));
  EXPECT_EQ(hb::ScalarTraits<Rational>::from_decimal("-2.5e-1"), Rational(-1, 4));
  EXPECT_EQ(hb::ScalarTraits<Rational>::from_decimal("0.08"), Rational(2, 25));
  EXPECT_THROW(hb::ScalarTraits<Rational>::from_decimal("1.2.3"), hb::ParseError);
  EXPECT_DOUBLE_EQ(hb::ScalarTraits<double>::from_decimal("1/4"), 0.25);
}

}  // namespace
