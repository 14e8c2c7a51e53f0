#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "hb/bandit.hpp"
#include "hb/game.hpp"
#include "hb/reductions.hpp"

namespace hb {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// JSON text with every float printed to 17 significant digits, so a value read back is
/// bit-identical and a second dump is byte-identical.
inline void dump_json(std::ostream& os, const json& j, int indent = 2, int level = 0) {
  auto pad = [&](int l) {
    if (indent >= 0) os << '\n' << std::string(static_cast<std::size_t>(indent * l), ' ');
  };
  switch (j.type()) {
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        os << "null";
      } else {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
      }
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      os << '[';
      bool first = true;
      for (const auto& e : j) {
        if (!first) os << ',';
        first = false;
        pad(level + 1);
        dump_json(os, e, indent, level + 1);
      }
      pad(level);
      os << ']';
      return;
    }
    case json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ',';
        first = false;
        pad(level + 1);
        os << json(it.key()).dump() << (indent >= 0 ? ": " : ":");
        dump_json(os, it.value(), indent, level + 1);
      }
      pad(level);
      os << '}';
      return;
    }
    default: os << j.dump();
  }
}

inline std::string dump_json(const json& j, int indent = 2) {
  std::ostringstream os;
  dump_json(os, j, indent);
  return os.str();
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline json parse_json_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str());
}

// ---------------------------------------------------------------------------
// Scalars

/// Numbers may be JSON numbers or decimal / "p/q" strings. In rational mode a JSON float is
/// read from its shortest decimal text, so 0.1 means exactly 1/10.
template <class S>
S scalar_from_json(const json& j, const std::string& what) {
  if (j.is_string()) return ScalarTraits<S>::from_decimal(j.get<std::string>());
  if (j.is_number_integer()) {
    if constexpr (is_exact_v<S>) {
      return j.is_number_unsigned() ? S(j.get<std::uint64_t>()) : S(j.get<std::int64_t>());
    } else {
      return j.get<double>();
    }
  }
  if (j.is_number_float()) {
    if constexpr (is_exact_v<S>) {
      return ScalarTraits<S>::from_decimal(j.dump());
    } else {
      return j.get<double>();
    }
  }
  throw ParseError(what + " must be a number or a decimal string");
}

template <class S>
json scalar_to_json(const S& v) {
  if constexpr (is_exact_v<S>) {
    if (denominator(v) == 1) {
      const auto& num = numerator(v);
      if (num >= std::numeric_limits<std::int64_t>::min() && num <= std::numeric_limits<std::int64_t>::max()) {
        return json(static_cast<std::int64_t>(num));
      }
    }
    return json(v.str());
  } else {
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9.0e15) return json(static_cast<std::int64_t>(v));
    return json(v);
  }
}

// ---------------------------------------------------------------------------
// Bandits

namespace detail {

inline const json& member(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + " must be an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + " is missing \"" + key + "\"");
  return *it;
}

inline std::size_t index_from_json(const json& j, const std::string& what) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) throw ParseError(what + " must be a nonnegative integer");
  return j.get<std::size_t>();
}

inline bool bool_from_json(const json& j, const std::string& what) {
  if (!j.is_boolean()) throw ParseError(what + " must be true or false");
  return j.get<bool>();
}

}  // namespace detail

template <class S>
TreeBandit<S> tree_from_json(const json& j) {
  const auto& nodes_json = detail::member(j, "nodes", "tree bandit");
  if (!nodes_json.is_array() || nodes_json.empty()) throw ParseError("\"nodes\" must be a non-empty array");
  std::vector<std::optional<TreeNode<S>>> slots(nodes_json.size());
  for (const auto& nj : nodes_json) {
    const std::size_t id = detail::index_from_json(detail::member(nj, "id", "node"), "node id");
    const std::string where = "node " + std::to_string(id);
    if (id >= slots.size()) throw ParseError(where + ": ids must be 0..n-1");
    if (slots[id]) throw ParseError(where + ": duplicate id");
    TreeNode<S> n;
    n.depth = static_cast<int>(detail::index_from_json(detail::member(nj, "depth", where), where + " depth"));
    n.reward = scalar_from_json<S>(detail::member(nj, "reward", where), where + " reward");
    n.halted = nj.contains("halted") ? detail::bool_from_json(nj["halted"], where + " halted") : false;
    if (nj.contains("edges")) {
      if (!nj["edges"].is_array()) throw ParseError(where + ": \"edges\" must be an array");
      for (const auto& ej : nj["edges"]) {
        Edge<S> e;
        e.to = detail::index_from_json(detail::member(ej, "to", where + " edge"), where + " edge target");
        e.p = scalar_from_json<S>(detail::member(ej, "p", where + " edge"), where + " edge probability");
        e.halting = ej.contains("halting") ? detail::bool_from_json(ej["halting"], where + " edge halting") : false;
        n.edges.push_back(std::move(e));
      }
    }
    slots[id] = std::move(n);
  }
  std::vector<TreeNode<S>> nodes;
  for (auto& s : slots) nodes.push_back(std::move(*s));
  const NodeId root = detail::index_from_json(detail::member(j, "root", "tree bandit"), "root");
  try {
    return TreeBandit<S>(std::move(nodes), root);
  } catch (const PreconditionError& e) {
    throw ParseError(e.what());
  }
}

inline MarkovBandit markov_from_json(const json& j) {
  MarkovBandit b;
  const auto& states = detail::member(j, "states", "markov bandit");
  if (!states.is_array()) throw ParseError("\"states\" must be an array");
  for (std::size_t x = 0; x < states.size(); ++x) {
    const std::string where = "state " + std::to_string(x);
    const auto& sj = states[x];
    MarkovState s;
    s.reward = scalar_from_json<double>(detail::member(sj, "reward", where), where + " reward");
    s.halt_prob = scalar_from_json<double>(detail::member(sj, "halt_prob", where), where + " halt_prob");
    s.halt_reward = scalar_from_json<double>(detail::member(sj, "halt_reward", where), where + " halt_reward");
    b.states.push_back(s);
  }
  const auto& rows = detail::member(j, "transitions", "markov bandit");
  if (!rows.is_array()) throw ParseError("\"transitions\" must be an array of rows");
  for (const auto& row : rows) {
    if (!row.is_array()) throw ParseError("transition rows must be arrays");
    std::vector<double> r;
    for (const auto& p : row) r.push_back(scalar_from_json<double>(p, "transition probability"));
    b.transitions.push_back(std::move(r));
  }
  b.initial = j.contains("initial") ? detail::index_from_json(j["initial"], "initial") : 0;
  return b;
}

template <class S>
json to_json(const TreeBandit<S>& b, const std::vector<S>* costs = nullptr) {
  json nodes = json::array();
  for (NodeId v = 0; v < b.size(); ++v) {
    const auto& n = b.node(v);
    json edges = json::array();
    for (const auto& e : n.edges) edges.push_back({{"to", e.to}, {"p", scalar_to_json(e.p)}, {"halting", e.halting}});
    nodes.push_back({{"id", v},
                     {"depth", n.depth},
                     {"reward", scalar_to_json(n.reward)},
                     {"halted", n.halted},
                     {"edges", std::move(edges)}});
  }
  json out = {{"kind", "tree"}, {"root", b.root()}, {"nodes", std::move(nodes)}};
  if (costs != nullptr) {
    json c = json::array();
    for (const auto& v : *costs) c.push_back(scalar_to_json(v));
    out["costs"] = std::move(c);
  }
  return out;
}

inline json to_json(const MarkovBandit& b) {
  json states = json::array();
  for (const auto& s : b.states) {
    states.push_back({{"reward", scalar_to_json(s.reward)},
                      {"halt_prob", scalar_to_json(s.halt_prob)},
                      {"halt_reward", scalar_to_json(s.halt_reward)}});
  }
  json rows = json::array();
  for (const auto& r : b.transitions) {
    json row = json::array();
    for (double p : r) row.push_back(scalar_to_json(p));
    rows.push_back(std::move(row));
  }
  return {{"kind", "markov"}, {"states", std::move(states)}, {"transitions", std::move(rows)}, {"initial", b.initial}};
}

// ---------------------------------------------------------------------------
// Model files

template <class S = double>
struct BanditEntry {
  std::variant<TreeBandit<S>, MarkovBandit> bandit;
  std::optional<std::vector<S>> costs;

  bool is_tree() const { return std::holds_alternative<TreeBandit<S>>(bandit); }
  const TreeBandit<S>& tree() const { return std::get<TreeBandit<S>>(bandit); }
  const MarkovBandit& markov() const { return std::get<MarkovBandit>(bandit); }
};

template <class S = double>
struct ModelFile {
  std::optional<PayoutModel> model;
  std::vector<BanditEntry<S>> bandits;

  bool all_trees() const {
    for (const auto& b : bandits) {
      if (!b.is_tree()) return false;
    }
    return true;
  }

  bool all_markov() const {
    for (const auto& b : bandits) {
      if (b.is_tree()) return false;
    }
    return true;
  }
};

inline void check_schema(const json& j) {
  if (j.is_object() && j.contains("schema")) {
    if (!j["schema"].is_number_integer() || j["schema"].get<int>() != kSchemaVersion) {
      throw ParseError("unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");
    }
  }
}

template <class S>
BanditEntry<S> bandit_from_json(const json& j) {
  const auto& kind = detail::member(j, "kind", "bandit");
  if (!kind.is_string()) throw ParseError("bandit \"kind\" must be a string");
  BanditEntry<S> out{TreeBandit<S>{}, std::nullopt};
  const std::string k = kind.get<std::string>();
  if (k == "tree") {
    out.bandit = tree_from_json<S>(j);
    if (j.contains("costs")) {
      if (!j["costs"].is_array()) throw ParseError("\"costs\" must be an array");
      std::vector<S> costs;
      for (const auto& c : j["costs"]) costs.push_back(scalar_from_json<S>(c, "cost"));
      out.costs = std::move(costs);
    }
  } else if (k == "markov") {
    out.bandit = markov_from_json(j);
  } else {
    throw ParseError("unknown bandit kind '" + k + "'");
  }
  return out;
}

/// Accepts either {"bandits": [...]} or a single bandit object.
template <class S = double>
ModelFile<S> model_file_from_json(const json& j) {
  check_schema(j);
  if (!j.is_object()) throw ParseError("model file must be a JSON object");
  ModelFile<S> out;
  if (j.contains("model")) {
    if (!j["model"].is_string()) throw ParseError("\"model\" must be a string");
    out.model = parse_model(j["model"].get<std::string>());
  }
  if (j.contains("bandits")) {
    if (!j["bandits"].is_array() || j["bandits"].empty()) throw ParseError("\"bandits\" must be a non-empty array");
    for (const auto& b : j["bandits"]) out.bandits.push_back(bandit_from_json<S>(b));
  } else {
    out.bandits.push_back(bandit_from_json<S>(j));
  }
  return out;
}

template <class S = double>
ModelFile<S> load_model_file(const std::string& path) {
  return model_file_from_json<S>(read_json_file(path));
}

template <class S>
json to_json(const ModelFile<S>& f) {
  json bandits = json::array();
  for (const auto& b : f.bandits) {
    if (b.is_tree()) {
      bandits.push_back(to_json(b.tree(), b.costs ? &*b.costs : nullptr));
    } else {
      bandits.push_back(to_json(b.markov()));
    }
  }
  json out = {{"schema", kSchemaVersion}, {"bandits", std::move(bandits)}};
  if (f.model) out["model"] = to_string(*f.model);
  return out;
}

template <class S>
TreeGame<S> tree_game(const ModelFile<S>& f, std::optional<PayoutModel> model = std::nullopt) {
  if (!f.all_trees()) throw PreconditionError("expected tree bandits only");
  TreeGame<S> g;
  g.model = model.value_or(f.model.value_or(PayoutModel::kCP));
  bool any_costs = false;
  for (const auto& b : f.bandits) any_costs = any_costs || b.costs.has_value();
  for (const auto& b : f.bandits) {
    g.bandits.push_back(b.tree());
    if (any_costs) g.costs.push_back(b.costs.value_or(std::vector<S>(b.tree().size(), S(0))));
  }
  return g;
}

template <class S>
MarkovGame markov_game(const ModelFile<S>& f, std::optional<PayoutModel> model = std::nullopt) {
  if (!f.all_markov()) throw PreconditionError("expected Markov bandits only");
  MarkovGame g;
  g.model = model.value_or(f.model.value_or(PayoutModel::kCP));
  for (const auto& b : f.bandits) g.bandits.push_back(b.markov());
  return g;
}

// ---------------------------------------------------------------------------
// Policies

/// Policy names: index, block-index, greedy, cyclic[:i,j,...]. An index policy may carry a
/// model suffix, e.g. index:SP. Table policies come from files (see table_policy_from_json).
inline Policy parse_policy(const std::string& text, std::size_t n_bandits) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? std::string() : text.substr(colon + 1);
  if (head == "index") {
    IndexPolicy p;
    if (!arg.empty()) p.model = parse_model(arg);
    return p;
  }
  if (head == "block-index") {
    BlockIndexPolicy p;
    if (!arg.empty()) p.model = parse_model(arg);
    return p;
  }
  if (head == "greedy") return GreedyReward{};
  if (head == "cyclic") {
    CyclicPolicy p;
    if (arg.empty()) {
      for (std::size_t i = 0; i < n_bandits; ++i) p.order.push_back(i);
    } else {
      std::stringstream ss(arg);
      std::string item;
      while (std::getline(ss, item, ',')) {
        try {
          p.order.push_back(std::stoul(item));
        } catch (const std::exception&) {
          throw ParseError("bad cyclic order entry '" + item + "'");
        }
      }
    }
    return p;
  }
  throw ParseError("unknown policy '" + text + "'");
}

/// {"schema": 1, "choices": [{"history": [positions...], "bandit": k}, ...]}
inline TablePolicy table_policy_from_json(const json& j) {
  check_schema(j);
  TablePolicy p;
  const auto& choices = detail::member(j, "choices", "table policy");
  if (!choices.is_array()) throw ParseError("\"choices\" must be an array");
  for (const auto& c : choices) {
    std::vector<std::size_t> key;
    const auto& hist = detail::member(c, "history", "choice");
    if (!hist.is_array()) throw ParseError("\"history\" must be an array of node ids");
    for (const auto& v : hist) key.push_back(detail::index_from_json(v, "history entry"));
    p.choice[key] = detail::index_from_json(detail::member(c, "bandit", "choice"), "bandit");
  }
  return p;
}

inline json to_json(const TablePolicy& p) {
  json choices = json::array();
  for (const auto& [key, k] : p.choice) choices.push_back({{"history", key}, {"bandit", k}});
  return {{"schema", kSchemaVersion}, {"choices", std::move(choices)}};
}

}  // namespace hb
