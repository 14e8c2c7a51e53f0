#include <gtest/gtest.h>

#include "hb/hb.hpp"
#include "support.hpp"

namespace {

using hb::PayoutModel;
using hb::Rational;

std::string models_dir() { return HB_MODELS_DIR; }

TEST(Json, FloatsUseSeventeenDigits) {
  EXPECT_EQ(hb::dump_json(hb::json(0.1), -1), "0.10000000000000001");
  EXPECT_EQ(hb::dump_json(hb::json(std::nan("")), -1), "null");
  EXPECT_EQ(hb::dump_json(hb::json{{"a", 1}, {"b", {1.5, 2}}}, -1), "{\"a\":1,\"b\":[1.5,2]}");
}

TEST(Json, MalformedTextIsAParseError) {
  EXPECT_THROW(hb::parse_json_text("{\"schema\": 1,"), hb::ParseError);
  EXPECT_THROW(hb::read_json_file("/nonexistent/model.json"), hb::ParseError);
}

TEST(Json, SchemaVersionIsChecked) {
  EXPECT_THROW(hb::model_file_from_json<double>(hb::parse_json_text(R"({"schema": 2, "bandits": []})")), hb::ParseError);
  EXPECT_THROW(hb::model_file_from_json<double>(hb::parse_json_text(R"({"schema": 1, "bandits": []})")), hb::ParseError);
}

TEST(Json, StructuralErrorsAreParseErrors) {
  EXPECT_THROW(hb::bandit_from_json<double>(hb::parse_json_text(R"({"kind": "urn"})")), hb::ParseError);
  EXPECT_THROW(hb::bandit_from_json<double>(hb::parse_json_text(R"({"kind": "tree", "root": 0, "nodes": [
      {"id": 3, "depth": 0, "reward": 0}]})")),
               hb::ParseError);
  EXPECT_THROW(hb::bandit_from_json<double>(hb::parse_json_text(R"({"kind": "tree", "root": 0, "nodes": [
      {"id": 0, "depth": 0, "reward": 0, "edges": [{"to": 9, "p": 1, "halting": true}]}]})")),
               hb::ParseError);
  EXPECT_THROW(hb::bandit_from_json<double>(hb::parse_json_text(R"({"kind": "tree", "root": 0, "nodes": [
      {"id": 0, "depth": 0, "reward": "abc"}]})")),
               hb::ParseError);
}

TEST(Json, RationalModeReadsDecimalsExactly) {
  const auto j = hb::parse_json_text(R"({"kind": "tree", "root": 0, "nodes": [
      {"id": 0, "depth": 0, "reward": 0.1, "edges": [{"to": 1, "p": 0.3, "halting": true}, {"to": 2, "p": "7/10", "halting": true}]},
      {"id": 1, "depth": 1, "reward": "1/3", "halted": true},
      {"id": 2, "depth": 1, "reward": 2, "halted": true}]})");
  const auto b = hb::tree_from_json<Rational>(j);
  EXPECT_EQ(b.node(0).reward, Rational(1, 10));
  EXPECT_EQ(b.node(0).edges[0].p, Rational(3, 10));
  EXPECT_EQ(b.node(1).reward, Rational(1, 3));
  EXPECT_TRUE(hb::validate(b).ok());
  EXPECT_EQ(hb::scalar_to_json(Rational(1, 3)), hb::json("1/3"));
  EXPECT_EQ(hb::scalar_to_json(Rational(4)), hb::json(4));
}

TEST(Json, ModelFilesRoundTripByteIdentically) {
  for (const char* name : {"two_bandit_cp.json", "geometric_ccp.json", "gittins_r3.json", "alternating_gittins.json",
                           "psp_monotone.json", "profit_tp.json"}) {
    const auto f = hb::load_model_file<double>(models_dir() + "/" + name);
    const std::string once = hb::dump_json(hb::to_json(f));
    const std::string twice = hb::dump_json(hb::to_json(hb::model_file_from_json<double>(hb::parse_json_text(once))));
    EXPECT_EQ(once, twice) << name;
  }
}

TEST(Json, RandomTreesRoundTripInBothModes) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = hb::random_game<Rational>(seed, PayoutModel::kTP, 2, 3, hb::testing::small_spec());
    const auto gd = g.convert<double>();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto j = hb::to_json(g.bandits[i], g.costs_of(i));
      const auto back = hb::bandit_from_json<Rational>(j);
      EXPECT_EQ(back.tree().rewards(), g.bandits[i].rewards());
      EXPECT_EQ(*back.costs, g.costs[i]);
      const auto d = hb::bandit_from_json<double>(j);
      EXPECT_EQ(hb::dump_json(hb::to_json(d.tree(), &*d.costs)), hb::dump_json(hb::to_json(gd.bandits[i], &gd.costs[i])));
    }
  }
}

TEST(ModelFiles, GamesBuildFromSamples) {
  const auto cp = hb::tree_game(hb::load_model_file<Rational>(models_dir() + "/two_bandit_cp.json"));
  EXPECT_EQ(cp.model, PayoutModel::kCP);
  EXPECT_EQ(hb::evaluate_exact(cp, hb::Policy{hb::IndexPolicy{}}), 7);
  const auto tp = hb::tree_game(hb::load_model_file<Rational>(models_dir() + "/profit_tp.json"));
  EXPECT_EQ(tp.costs.size(), tp.size());
  hb::require_game(tp);
  const auto ccp = hb::markov_game(hb::load_model_file<double>(models_dir() + "/geometric_ccp.json"));
  EXPECT_NEAR(hb::evaluate_markov(ccp, hb::Policy{hb::CyclicPolicy{{0, 1}}}).value, 2.0, 1e-12);
  EXPECT_THROW(hb::tree_game(hb::load_model_file<double>(models_dir() + "/geometric_ccp.json")), hb::PreconditionError);
  const auto zero = hb::load_model_file<double>(models_dir() + "/zero_halting.json");
  EXPECT_FALSE(hb::validate(zero.bandits[0].tree()).ok());
}

TEST(Policies, ParseNames) {
  EXPECT_TRUE(std::holds_alternative<hb::IndexPolicy>(hb::parse_policy("index", 2)));
  EXPECT_EQ(std::get<hb::IndexPolicy>(hb::parse_policy("index:SP", 2)).model, PayoutModel::kSP);
  EXPECT_TRUE(std::holds_alternative<hb::BlockIndexPolicy>(hb::parse_policy("block-index", 2)));
  EXPECT_TRUE(std::holds_alternative<hb::GreedyReward>(hb::parse_policy("greedy", 2)));
  EXPECT_EQ(std::get<hb::CyclicPolicy>(hb::parse_policy("cyclic", 3)).order, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(std::get<hb::CyclicPolicy>(hb::parse_policy("cyclic:1,0", 2)).order, (std::vector<std::size_t>{1, 0}));
  EXPECT_THROW(hb::parse_policy("cyclic:a", 2), hb::ParseError);
  EXPECT_THROW(hb::parse_policy("best", 2), hb::ParseError);
}

TEST(Policies, TableRoundTrip) {
  const auto sol = hb::dp_optimal(hb::tree_game(hb::load_model_file<Rational>(models_dir() + "/two_bandit_cp.json")));
  const auto back = hb::table_policy_from_json(hb::parse_json_text(hb::dump_json(hb::to_json(sol.policy))));
  EXPECT_EQ(back.choice, sol.policy.choice);
  EXPECT_THROW(hb::table_policy_from_json(hb::parse_json_text(R"({"choices": [{"history": [-1], "bandit": 0}]})")),
               hb::ParseError);
}

}  // namespace
