#include <gtest/gtest.h>

#include "hb/hb.hpp"
#include "support.hpp"

namespace {

using hb::PayoutModel;
using hb::Rational;

// Bandit 0: rewards (0, 4), halting mass 1/2 then 1, halted rewards 4 and 10.
// Bandit 1: halts surely on its first activation with reward 5.
hb::TreeGame<Rational> two_bandit_cp() {
  hb::TreeGame<Rational> g;
  g.bandits.push_back(hb::path_bandit<Rational>({0, 4}, {Rational(1, 2), 1}, {4, 10}));
  g.bandits.push_back(hb::path_bandit<Rational>({0}, {1}, {5}));
  return g;
}

hb::MarkovGame geometric_pair(double beta1, double beta2, PayoutModel model) {
  hb::MarkovGame g;
  g.model = model;
  g.bandits.push_back(hb::geometric_markov(1.0, beta1));
  g.bandits.push_back(hb::geometric_markov(1.0, beta2));
  return g;
}

TEST(Step, GeometricPairSplitsHaltAndContinue) {
  const auto g = geometric_pair(0.5, 0.5, PayoutModel::kCP);
  const auto out = hb::step(g, hb::initial_history(g), 1);
  ASSERT_EQ(out.size(), 2u);
  for (const auto& o : out) EXPECT_EQ(o.probability, 0.5);
  EXPECT_TRUE(out[0].history.halted());
  EXPECT_EQ(*out[0].history.halter, 1u);
  EXPECT_FALSE(out[1].history.halted());
  EXPECT_EQ(out[1].history.local_time, (std::vector<int>{0, 1}));
  EXPECT_EQ(out[1].history.round, 1);
}

TEST(Step, RejectsHaltedHistoryAndUnknownBandit) {
  const auto g = two_bandit_cp();
  EXPECT_THROW(hb::step(g, hb::initial_history(g), 2), hb::PreconditionError);
  auto halted = hb::step(g, hb::initial_history(g), 1)[0].history;
  EXPECT_THROW(hb::step(g, halted, 0), hb::PreconditionError);
}

TEST(Evaluate, TwoBanditCollectivePayout) {
  const auto g = two_bandit_cp();
  EXPECT_EQ(hb::evaluate_exact(g, hb::Policy{hb::IndexPolicy{}}), 7);
  EXPECT_EQ(hb::evaluate_exact(g, hb::Policy{hb::BlockIndexPolicy{}}), 7);
  EXPECT_EQ(hb::evaluate_exact(g, hb::Policy{hb::CyclicPolicy{{0, 1}}}), Rational(13, 2));
  EXPECT_EQ(hb::evaluate_exact(g, hb::Policy{hb::CyclicPolicy{{1, 0}}}), 5);
}

TEST(Evaluate, CyclicPolicyValidation) {
  const auto g = two_bandit_cp();
  EXPECT_THROW(hb::evaluate_exact(g, hb::Policy{hb::CyclicPolicy{}}), hb::PreconditionError);
  EXPECT_THROW(hb::evaluate_exact(g, hb::Policy{hb::CyclicPolicy{{0, 3}}}), hb::PreconditionError);
}

TEST(Evaluate, ConstantCumulativeCyclicIsTwo) {
  const auto r = hb::evaluate_markov(geometric_pair(0.5, 0.5, PayoutModel::kCCP), hb::Policy{hb::CyclicPolicy{{0, 1}}});
  EXPECT_NEAR(r.value, 2.0, 1e-12);
  EXPECT_LE(r.residual, 1e-12);
}

TEST(Evaluate, MarkovRejectsTablePolicies) {
  EXPECT_THROW(hb::evaluate_markov(geometric_pair(0.5, 0.5, PayoutModel::kCCP), hb::Policy{hb::TablePolicy{}}),
               hb::PreconditionError);
}

TEST(Evaluate, MarkovAgreesWithUnrolledTrees) {
  for (auto model : {PayoutModel::kCCP, PayoutModel::kCP, PayoutModel::kSP}) {
    hb::MarkovGame m;
    m.model = model;
    m.bandits.push_back(hb::geometric_markov(std::vector<double>{1.0, 3.0}, 0.25));
    m.bandits.push_back(hb::geometric_markov(std::vector<double>{2.0}, 0.25));
    for (auto& b : m.bandits) {
      for (auto& s : b.states) s.halt_reward = s.reward + 1.0;
    }
    hb::TreeGame<double> t;
    t.model = model;
    for (const auto& b : m.bandits) t.bandits.push_back(hb::unroll(b, 12));
    for (const auto& p : {hb::Policy{hb::CyclicPolicy{{0, 1}}}, hb::Policy{hb::GreedyReward{}}}) {
      EXPECT_NEAR(hb::evaluate_markov(m, p).value, hb::evaluate_exact(t, p), 1e-5)
          << hb::to_string(model) << " " << hb::describe(p);
    }
  }
}

TEST(Trace, ActivationRoundsOfCyclicPolicy) {
  const auto g = geometric_pair(0.5, 0.25, PayoutModel::kCP);
  const auto tr = hb::trace_times(g, hb::Policy{hb::CyclicPolicy{{0, 1}}}, hb::PathDescriptor{{{0, 0, 0}, {0, 0}}});
  ASSERT_EQ(tr.rows.size(), 5u);
  EXPECT_EQ(tr.activation_rounds[0], (std::vector<int>{0, 2, 4}));
  EXPECT_EQ(tr.activation_rounds[1], (std::vector<int>{1, 3}));
  EXPECT_EQ(tr.rows[2].local_times, (std::vector<int>{1, 1}));
  EXPECT_EQ(tr.rows[3].local_times, (std::vector<int>{2, 1}));
  EXPECT_EQ(tr.rows[3].choice, 1u);
  EXPECT_DOUBLE_EQ(tr.rows[0].survival, 0.5);
  EXPECT_DOUBLE_EQ(tr.rows[1].survival, 0.5 * 0.25);
  EXPECT_DOUBLE_EQ(tr.rows[3].survival, 0.5 * 0.5 * 0.25 * 0.25);
  EXPECT_FALSE(tr.global_halting_time.has_value());
}

TEST(Trace, SecondBanditHaltingFirstEndsAtRoundTwo) {
  const auto g = geometric_pair(0.5, 0.5, PayoutModel::kCP);
  const auto tr =
      hb::trace_times(g, hb::Policy{hb::CyclicPolicy{{0, 1}}}, hb::PathDescriptor{{{0, 0, 0}, {hb::kHaltOutcome}}});
  ASSERT_TRUE(tr.global_halting_time.has_value());
  EXPECT_EQ(*tr.global_halting_time, 2);
  EXPECT_TRUE(tr.rows.back().halts);
  EXPECT_EQ(tr.rows.back().choice, 1u);
}

TEST(Trace, RejectsImpossiblePaths) {
  const auto g = geometric_pair(0.5, 0.5, PayoutModel::kCP);
  EXPECT_THROW(hb::trace_times(g, hb::Policy{hb::CyclicPolicy{{0, 1}}}, hb::PathDescriptor{{{3}, {0}}}),
               hb::PreconditionError);
  EXPECT_THROW(hb::trace_times(g, hb::Policy{hb::CyclicPolicy{{0, 1}}}, hb::PathDescriptor{{{0}}}),
               hb::PreconditionError);
  const auto t = two_bandit_cp();
  EXPECT_THROW(hb::trace_times(t, hb::Policy{hb::IndexPolicy{}}, hb::PathDescriptor{{{5}, {0}}}),
               hb::PreconditionError);
}

TEST(Trace, LocalTimesSumToRound) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = hb::random_game<double>(seed, PayoutModel::kCP, 2, 3, hb::testing::small_spec());
    hb::PathDescriptor path;
    for (const auto& b : g.bandits) path.outcomes.push_back(std::vector<long>(static_cast<std::size_t>(b.max_depth()), 0));
    for (const auto& p : {hb::Policy{hb::IndexPolicy{}}, hb::parse_policy("cyclic", g.size())}) {
      const auto tr = hb::trace_times(g, p, path);
      for (const auto& row : tr.rows) {
        int sum = 0;
        for (int t : row.local_times) sum += t;
        EXPECT_EQ(sum, row.round) << "seed " << seed;
      }
    }
  }
}

TEST(Sampling, DeterministicAndConsistentWithExact) {
  const auto g = two_bandit_cp().convert<double>();
  const hb::Policy p{hb::CyclicPolicy{{0, 1}}};
  const auto a = hb::run_policy_sampled(g, p, 42, 20000);
  const auto b = hb::run_policy_sampled(g, p, 42, 20000, 3);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_LT(std::abs(a.mean - 6.5), 5.0 * a.std_error);
  const auto c = hb::run_policy_sampled(g, p, 43, 20000);
  EXPECT_NE(a.mean, c.mean);
}

TEST(Sampling, SingleSampleHasZeroStandardError) {
  const auto g = two_bandit_cp().convert<double>();
  const auto s = hb::run_policy_sampled(g, hb::Policy{hb::IndexPolicy{}}, 7, 1);
  EXPECT_EQ(s.samples, 1u);
  EXPECT_EQ(s.std_error, 0.0);
  EXPECT_TRUE(s.mean == 4.0 || s.mean == 10.0);
  EXPECT_THROW(hb::run_policy_sampled(g, hb::Policy{hb::IndexPolicy{}}, 7, 0), hb::PreconditionError);
}

TEST(Sampling, MarkovCumulativeEstimate) {
  const auto g = geometric_pair(0.5, 0.5, PayoutModel::kCCP);
  const auto s = hb::run_policy_sampled(g, hb::Policy{hb::CyclicPolicy{{0, 1}}}, 5, 20000);
  EXPECT_LT(std::abs(s.mean - 2.0), 5.0 * s.std_error);
}

TEST(IndexPolicy, BlockFormMatchesEveryRoundForm) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = hb::random_game<Rational>(seed, PayoutModel::kCP, 2, 3, hb::testing::small_spec());
    EXPECT_EQ(hb::evaluate_exact(g, hb::Policy{hb::IndexPolicy{}}), hb::evaluate_exact(g, hb::Policy{hb::BlockIndexPolicy{}}))
        << "seed " << seed;
  }
}

TEST(Equivalent, ChainHoldsForEveryPolicyOnSeededGames) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto g = hb::random_game<Rational>(seed, PayoutModel::kCP, 2, 2, hb::testing::small_spec());
    for (const auto& t : hb::enumerate_policies(g)) {
      const auto r = hb::index_chain(g, hb::Policy{t});
      EXPECT_TRUE(r.ok()) << "seed " << seed << " cp " << r.cp_policy << " eq " << r.psp_policy_equivalent << " dec "
                          << r.psp_policy_decomposition << " idx " << r.psp_index_decomposition << " cpidx "
                          << r.cp_index;
    }
  }
}

TEST(Equivalent, RewardIdentityPerBandit) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto g = hb::random_game<Rational>(seed, PayoutModel::kCP, 2, 3, hb::testing::small_spec());
    for (const auto& p : {hb::parse_policy("cyclic", g.size()), hb::Policy{hb::GreedyReward{}}, hb::Policy{hb::IndexPolicy{}}}) {
      for (const auto& [lhs, rhs] : hb::reward_equivalence(g, p)) EXPECT_EQ(lhs, rhs) << "seed " << seed;
    }
  }
}

TEST(Equivalent, BlockValueBoundAndDomination) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto g = hb::random_game<Rational>(seed, PayoutModel::kCP, 2, 2, hb::testing::small_spec());
    for (const auto& p : {hb::parse_policy("cyclic", g.size()), hb::Policy{hb::GreedyReward{}}, hb::Policy{hb::IndexPolicy{}}}) {
      const auto bound = hb::pi_block_bound(g, p);
      EXPECT_GT(bound.checked, 0u);
      EXPECT_TRUE(bound.ok()) << "seed " << seed;
      const auto dom = hb::equivalent_dominated(g, p);
      EXPECT_GT(dom.checked, 0u);
      EXPECT_TRUE(dom.ok()) << "seed " << seed;
    }
  }
}

TEST(Equivalent, EquivalentProcessOnTwoBanditExample) {
  const auto g = two_bandit_cp();
  const hb::Chooser pi = hb::bind_policy(g, hb::Policy{hb::CyclicPolicy{{0, 1}}});
  // the root block of bandit 0 is one activation: (4/2 + 4/2) over halting mass 1/2
  const auto y0 = hb::pi_equivalent_process(g, pi, 0);
  ASSERT_TRUE(y0.count({0, 0}));
  EXPECT_EQ(y0.at({0, 0}), 8);
  EXPECT_THROW(hb::pi_block_value(g, pi, 1, {0, 0}, hb::StoppingRule{0, {}}), hb::PreconditionError);
}

}  // namespace
