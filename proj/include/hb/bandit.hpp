#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "hb/error.hpp"
#include "hb/scalar.hpp"

namespace hb {

using NodeId = std::size_t;
using StateId = std::size_t;

inline constexpr double kProbabilityTolerance = 1e-12;

template <class S>
struct Edge {
  NodeId to = 0;
  S p{};
  bool halting = false;
};

/// One history atom of a bandit. `depth` is the local time; a node entered through a
/// halting edge is `halted`, carries the reward at the halting time, and has no edges.
template <class S>
struct TreeNode {
  int depth = 0;
  S reward{};
  bool halted = false;
  std::vector<Edge<S>> edges;
};

struct TreeLimits {
  int max_depth = 12;
  std::size_t max_branching = 4;
};

/// Finite outcome tree of one bandit's reward process and halting time. Immutable after
/// construction; run `validate` before trusting the structural invariants.
template <class S = double>
class TreeBandit {
 public:
  using scalar_type = S;

  TreeBandit() = default;

  TreeBandit(std::vector<TreeNode<S>> nodes, NodeId root) : nodes_(std::move(nodes)), root_(root) {
    if (nodes_.empty()) throw PreconditionError("tree bandit has no nodes");
    if (root_ >= nodes_.size()) throw PreconditionError("root id out of range");
    parents_.assign(nodes_.size(), std::nullopt);
    for (NodeId v = 0; v < nodes_.size(); ++v) {
      for (const auto& e : nodes_[v].edges) {
        if (e.to >= nodes_.size()) {
          throw PreconditionError("edge from node " + std::to_string(v) + " targets unknown node " +
                                  std::to_string(e.to));
        }
        if (!parents_[e.to]) parents_[e.to] = v;
      }
    }
  }

  const std::vector<TreeNode<S>>& nodes() const { return nodes_; }
  const TreeNode<S>& node(NodeId v) const { return nodes_.at(v); }
  NodeId root() const { return root_; }
  std::size_t size() const { return nodes_.size(); }
  std::optional<NodeId> parent(NodeId v) const { return parents_.at(v); }

  S halting_mass(NodeId v) const {
    S h(0);
    for (const auto& e : nodes_.at(v).edges) {
      if (e.halting) h += e.p;
    }
    return h;
  }

  std::vector<S> rewards() const {
    std::vector<S> out;
    out.reserve(nodes_.size());
    for (const auto& n : nodes_) out.push_back(n.reward);
    return out;
  }

  /// Same tree, new reward labels.
  TreeBandit with_rewards(const std::vector<S>& rewards) const {
    if (rewards.size() != nodes_.size()) throw PreconditionError("reward vector size mismatch");
    auto copy = nodes_;
    for (std::size_t v = 0; v < copy.size(); ++v) copy[v].reward = rewards[v];
    return TreeBandit(std::move(copy), root_);
  }

  template <class T>
  TreeBandit<T> convert() const {
    std::vector<TreeNode<T>> out;
    out.reserve(nodes_.size());
    for (const auto& n : nodes_) {
      TreeNode<T> m;
      m.depth = n.depth;
      m.halted = n.halted;
      m.reward = convert_scalar<T>(n.reward);
      for (const auto& e : n.edges) m.edges.push_back({e.to, convert_scalar<T>(e.p), e.halting});
      out.push_back(std::move(m));
    }
    return TreeBandit<T>(std::move(out), root_);
  }

  int max_depth() const {
    int d = 0;
    for (const auto& n : nodes_) d = std::max(d, n.depth);
    return d;
  }

 private:
  template <class T>
  static T convert_scalar(const S& v) {
    if constexpr (std::is_same_v<T, S>) {
      return v;
    } else if constexpr (std::is_same_v<T, double>) {
      return to_double(v);
    } else {
      return from_double<T>(to_double(v));
    }
  }

  std::vector<TreeNode<S>> nodes_;
  NodeId root_ = 0;
  std::vector<std::optional<NodeId>> parents_;
};

struct MarkovState {
  double reward = 0.0;
  double halt_prob = 1.0;
  double halt_reward = 0.0;
};

/// Finite-state bandit: from state x an activation halts with probability halt_prob(x)
/// (final reward halt_reward(x)) or moves to y with probability (1 - halt_prob(x)) P(x, y).
struct MarkovBandit {
  std::vector<MarkovState> states;
  std::vector<std::vector<double>> transitions;
  StateId initial = 0;

  std::size_t size() const { return states.size(); }
};

/// Reward process R on a tree plus a cost process C on the same nodes.
template <class S = double>
struct ProfitBandit {
  TreeBandit<S> reward_process;
  std::vector<S> costs;
};

// ---------------------------------------------------------------------------
// Validation

enum class Violation {
  kEmpty,
  kRoot,
  kNotATree,
  kUnreachable,
  kDepth,
  kHaltedHasEdges,
  kDeadEnd,
  kEdgeProbability,
  kProbabilitySum,
  kZeroHaltingMass,
  kHaltingTarget,
  kNonFinite,
  kLimit,
  kTransitionShape,
  kCosts,
};

inline const char* to_string(Violation v) {
  switch (v) {
    case Violation::kEmpty: return "empty";
    case Violation::kRoot: return "root";
    case Violation::kNotATree: return "not-a-tree";
    case Violation::kUnreachable: return "unreachable";
    case Violation::kDepth: return "depth";
    case Violation::kHaltedHasEdges: return "halted-has-edges";
    case Violation::kDeadEnd: return "dead-end";
    case Violation::kEdgeProbability: return "edge-probability";
    case Violation::kProbabilitySum: return "probability-sum";
    case Violation::kZeroHaltingMass: return "zero-halting-mass";
    case Violation::kHaltingTarget: return "halting-target";
    case Violation::kNonFinite: return "non-finite";
    case Violation::kLimit: return "limit";
    case Violation::kTransitionShape: return "transition-shape";
    case Violation::kCosts: return "costs";
  }
  return "unknown";
}

struct ViolationEntry {
  Violation kind;
  std::size_t where;  // node or state id
  std::string message;
};

struct ValidationReport {
  std::vector<ViolationEntry> violations;

  bool ok() const { return violations.empty(); }

  bool has(Violation kind) const {
    for (const auto& v : violations) {
      if (v.kind == kind) return true;
    }
    return false;
  }

  std::string summary() const {
    if (ok()) return "pass";
    std::ostringstream os;
    for (const auto& v : violations) os << to_string(v.kind) << " at " << v.where << ": " << v.message << "\n";
    return os.str();
  }
};

template <class S>
ValidationReport validate(const TreeBandit<S>& b, const TreeLimits& limits = {}) {
  ValidationReport r;
  auto add = [&](Violation k, std::size_t where, std::string msg) { r.violations.push_back({k, where, std::move(msg)}); };
  const auto& nodes = b.nodes();
  if (nodes.empty()) {
    add(Violation::kEmpty, 0, "no nodes");
    return r;
  }
  const auto& root = b.node(b.root());
  if (root.depth != 0) add(Violation::kRoot, b.root(), "root depth must be 0");
  if (root.halted) add(Violation::kRoot, b.root(), "root cannot be halted");

  std::vector<int> in_degree(nodes.size(), 0);
  for (NodeId v = 0; v < nodes.size(); ++v) {
    for (const auto& e : nodes[v].edges) ++in_degree[e.to];
  }
  if (in_degree[b.root()] != 0) add(Violation::kNotATree, b.root(), "root has an incoming edge");

  for (NodeId v = 0; v < nodes.size(); ++v) {
    const auto& n = nodes[v];
    if (v != b.root() && in_degree[v] == 0) add(Violation::kUnreachable, v, "node has no parent");
    if (in_degree[v] > 1) add(Violation::kNotATree, v, "node has more than one parent");
    if (!std::isfinite(to_double(n.reward))) add(Violation::kNonFinite, v, "reward is not finite");
    if (n.depth > limits.max_depth) add(Violation::kLimit, v, "depth exceeds configured limit");
    if (n.halted) {
      if (!n.edges.empty()) add(Violation::kHaltedHasEdges, v, "halted node has outgoing edges");
      continue;
    }
    if (n.edges.empty()) {
      add(Violation::kDeadEnd, v, "live node has no outgoing edges");
      continue;
    }
    std::size_t continuation = 0;
    S total(0);
    S halting(0);
    for (const auto& e : n.edges) {
      const auto& child = nodes[e.to];
      if (!(e.p > S(0)) || e.p > S(1)) add(Violation::kEdgeProbability, v, "edge probability outside (0,1]");
      total += e.p;
      if (e.halting) {
        halting += e.p;
        if (!child.halted) add(Violation::kHaltingTarget, e.to, "halting edge enters a live node");
      } else {
        ++continuation;
        if (child.halted) add(Violation::kHaltingTarget, e.to, "halted node entered by a continuation edge");
      }
      if (child.depth != n.depth + 1) add(Violation::kDepth, e.to, "child depth must be parent depth + 1");
    }
    if (continuation > limits.max_branching) add(Violation::kLimit, v, "branching exceeds configured limit");
    if (std::abs(to_double(total) - 1.0) > kProbabilityTolerance) {
      add(Violation::kProbabilitySum, v, "outgoing probabilities do not sum to 1");
    }
    if (!(halting > S(0))) add(Violation::kZeroHaltingMass, v, "halting mass is zero at a live node");
  }
  // Cycles would leave some node unreachable from the root; the in-degree checks plus
  // the depth rule already exclude them.
  return r;
}

inline ValidationReport validate(const MarkovBandit& b) {
  ValidationReport r;
  auto add = [&](Violation k, std::size_t where, std::string msg) { r.violations.push_back({k, where, std::move(msg)}); };
  const std::size_t n = b.states.size();
  if (n == 0) {
    add(Violation::kEmpty, 0, "no states");
    return r;
  }
  if (b.initial >= n) add(Violation::kRoot, b.initial, "initial state out of range");
  if (b.transitions.size() != n) {
    add(Violation::kTransitionShape, 0, "transition matrix must be square with one row per state");
    return r;
  }
  for (StateId x = 0; x < n; ++x) {
    const auto& s = b.states[x];
    if (!std::isfinite(s.reward) || !std::isfinite(s.halt_reward)) add(Violation::kNonFinite, x, "reward is not finite");
    if (!(s.halt_prob > 0.0)) add(Violation::kZeroHaltingMass, x, "halting probability is zero");
    if (s.halt_prob > 1.0) add(Violation::kEdgeProbability, x, "halting probability exceeds 1");
    const auto& row = b.transitions[x];
    if (row.size() != n) {
      add(Violation::kTransitionShape, x, "transition row has wrong length");
      continue;
    }
    double total = 0.0;
    for (double p : row) {
      if (p < 0.0) add(Violation::kEdgeProbability, x, "negative transition probability");
      total += p;
    }
    if (std::abs(total - 1.0) > kProbabilityTolerance) add(Violation::kProbabilitySum, x, "transition row does not sum to 1");
  }
  return r;
}

template <class S>
ValidationReport validate(const ProfitBandit<S>& b, const TreeLimits& limits = {}) {
  auto r = validate(b.reward_process, limits);
  if (b.costs.size() != b.reward_process.size()) {
    r.violations.push_back({Violation::kCosts, 0, "cost process must be defined at every node"});
  }
  return r;
}

template <class B>
void require_valid(const B& bandit) {
  auto report = validate(bandit);
  if (!report.ok()) throw PreconditionError("invalid bandit: " + report.summary());
}

// ---------------------------------------------------------------------------
// Constructors and transforms

/// Shifts every reward by the root reward so that X_0 = 0.
template <class S>
TreeBandit<S> normalize(const TreeBandit<S>& b) {
  const S shift = b.node(b.root()).reward;
  auto rewards = b.rewards();
  for (auto& r : rewards) r -= shift;
  return b.with_rewards(rewards);
}

struct HaltRewardRule {
  enum class Kind { kNext, kCurrent, kZero, kConstant };
  Kind kind = Kind::kNext;
  double value = 0.0;
};

/// Cyclic chain over `rewards` with geometric halting, P(sigma > t) = beta^t.
inline MarkovBandit geometric_markov(const std::vector<double>& rewards, double beta, HaltRewardRule rule = {}) {
  if (!(beta > 0.0 && beta < 1.0)) throw PreconditionError("beta must lie in (0,1)");
  if (rewards.empty()) throw PreconditionError("reward sequence is empty");
  const std::size_t n = rewards.size();
  MarkovBandit b;
  b.transitions.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t x = 0; x < n; ++x) {
    const std::size_t next = (x + 1) % n;
    double halt_reward = 0.0;
    switch (rule.kind) {
      case HaltRewardRule::Kind::kNext: halt_reward = rewards[next]; break;
      case HaltRewardRule::Kind::kCurrent: halt_reward = rewards[x]; break;
      case HaltRewardRule::Kind::kZero: halt_reward = 0.0; break;
      case HaltRewardRule::Kind::kConstant: halt_reward = rule.value; break;
    }
    b.states.push_back({rewards[x], 1.0 - beta, halt_reward});
    b.transitions[x][next] = 1.0;
  }
  return b;
}

inline MarkovBandit geometric_markov(double reward, double beta, HaltRewardRule rule = {}) {
  return geometric_markov(std::vector<double>{reward}, beta, rule);
}

/// Unrolls a Markov bandit into its outcome tree, forcing halting on the activation from
/// depth `depth - 1`. The forced halt perturbs values by at most (1 - h_min)^(depth-1)
/// times the reward range.
inline TreeBandit<double> unroll(const MarkovBandit& b, int depth, StateId start) {
  if (depth < 1) throw PreconditionError("unroll depth must be at least 1");
  if (start >= b.size()) throw PreconditionError("start state out of range");
  std::vector<TreeNode<double>> nodes;
  struct Pending {
    NodeId id;
    StateId state;
  };
  std::vector<Pending> frontier{{0, start}};
  nodes.push_back({0, b.states[start].reward, false, {}});
  while (!frontier.empty()) {
    auto [id, x] = frontier.back();
    frontier.pop_back();
    const auto& s = b.states[x];
    const int d = nodes[id].depth;
    const bool forced = d + 1 >= depth;
    const double h = forced ? 1.0 : s.halt_prob;
    std::vector<Edge<double>> edges;
    const NodeId halted_id = nodes.size();
    nodes.push_back({d + 1, s.halt_reward, true, {}});
    edges.push_back({halted_id, h, true});
    if (!forced && h < 1.0) {
      for (StateId y = 0; y < b.size(); ++y) {
        const double p = b.transitions[x][y];
        if (p <= 0.0) continue;
        const NodeId child = nodes.size();
        nodes.push_back({d + 1, b.states[y].reward, false, {}});
        edges.push_back({child, (1.0 - h) * p, false});
        frontier.push_back({child, y});
      }
    }
    nodes[id].edges = std::move(edges);
  }
  return TreeBandit<double>(std::move(nodes), 0);
}

inline TreeBandit<double> unroll(const MarkovBandit& b, int depth) { return unroll(b, depth, b.initial); }

/// Builds a path-shaped tree: `rewards[t]` is X_t on the surviving path, `halt_mass[t]` the
/// probability of halting on the activation from t, and `halt_rewards[t]` the reward X_{t+1}
/// paid when that activation halts. The last halt mass must be 1.
template <class S = double>
TreeBandit<S> path_bandit(const std::vector<S>& rewards, const std::vector<S>& halt_mass, const std::vector<S>& halt_rewards) {
  if (rewards.empty() || halt_mass.size() != rewards.size() || halt_rewards.size() != rewards.size()) {
    throw PreconditionError("path bandit needs equal-length reward, halt mass and halt reward sequences");
  }
  std::vector<TreeNode<S>> nodes;
  const std::size_t n = rewards.size();
  // live node t gets id 2t, halted child of t gets id 2t+1
  for (std::size_t t = 0; t < n; ++t) {
    TreeNode<S> live{static_cast<int>(t), rewards[t], false, {}};
    live.edges.push_back({2 * t + 1, halt_mass[t], true});
    if (t + 1 < n) live.edges.push_back({2 * t + 2, S(1) - halt_mass[t], false});
    nodes.push_back(std::move(live));
    nodes.push_back({static_cast<int>(t + 1), halt_rewards[t], true, {}});
  }
  return TreeBandit<S>(std::move(nodes), 0);
}

/// Nodes of `b` in depth-first preorder from `from`.
template <class S>
std::vector<NodeId> subtree(const TreeBandit<S>& b, NodeId from) {
  std::vector<NodeId> order;
  std::vector<NodeId> stack{from};
  while (!stack.empty()) {
    NodeId v = stack.back();
    stack.pop_back();
    order.push_back(v);
    const auto& edges = b.node(v).edges;
    for (auto it = edges.rbegin(); it != edges.rend(); ++it) stack.push_back(it->to);
  }
  return order;
}

template <class S>
bool is_ancestor(const TreeBandit<S>& b, NodeId ancestor, NodeId v) {
  std::optional<NodeId> cur = v;
  while (cur) {
    if (*cur == ancestor) return true;
    cur = b.parent(*cur);
  }
  return false;
}

}  // namespace hb
