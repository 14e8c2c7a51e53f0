#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hb/equivalent.hpp"
#include "hb/game.hpp"
#include "hb/stopping.hpp"

namespace hb {

inline constexpr std::uint64_t kDefaultHistoryCap = 10'000'000;
inline constexpr std::uint64_t kDefaultPolicyCap = 10'000;

template <class S>
struct OptimalSolution {
  S value{};
  TablePolicy policy;
  std::map<PositionKey, S> values;  // optimal continuation value at every non-halted history
};

namespace detail {

template <class S>
S action_value(const TreeGame<S>& g, const GlobalHistory& h, std::size_t i, const std::map<PositionKey, S>& values) {
  S total = running_payout(g, h, i);
  for (auto& o : step(g, h, i)) {
    total += o.probability * (o.history.halted() ? terminal_payout(g, h, o.history) : values.at(o.history.position));
  }
  return total;
}

}  // namespace detail

/// Backward induction over joint histories. Ties go to the lowest bandit id.
template <class S>
OptimalSolution<S> dp_optimal(const TreeGame<S>& g, std::uint64_t cap = kDefaultHistoryCap) {
  require_game(g, true);
  OptimalSolution<S> out;
  std::function<S(const GlobalHistory&)> solve = [&](const GlobalHistory& h) -> S {
    if (auto it = out.values.find(h.position); it != out.values.end()) return it->second;
    std::vector<S> q;
    for (std::size_t i = 0; i < g.size(); ++i) {
      S total = running_payout(g, h, i);
      for (auto& o : step(g, h, i)) {
        total += o.probability * (o.history.halted() ? terminal_payout(g, h, o.history) : solve(o.history));
      }
      q.push_back(total);
    }
    const std::size_t best = detail::argmax_lowest(q);
    if (out.values.size() >= cap) throw CapExceeded("history count exceeds cap " + std::to_string(cap));
    out.values.emplace(h.position, q[best]);
    out.policy.choice.emplace(h.position, best);
    return q[best];
  };
  out.value = solve(initial_history(g));
  return out;
}

/// Largest Bellman residual of the solution's value table.
template <class S>
double bellman_residual(const TreeGame<S>& g, const OptimalSolution<S>& sol) {
  double worst = 0.0;
  for (const auto& [key, v] : sol.values) {
    const GlobalHistory h = detail::history_at(g, key);
    S best{};
    for (std::size_t i = 0; i < g.size(); ++i) {
      const S q = detail::action_value(g, h, i, sol.values);
      if (i == 0 || q > best) best = q;
    }
    worst = std::max(worst, std::abs(to_double(S(best - v))));
  }
  return worst;
}

namespace detail {

template <class S>
std::uint64_t count_policies_at(const TreeGame<S>& g, const GlobalHistory& h) {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::uint64_t ways = 1;
    for (auto& o : step(g, h, i)) {
      if (!o.history.halted()) ways = saturating_mul(ways, count_policies_at(g, o.history));
    }
    total = saturating_add(total, ways);
  }
  return total;
}

using Assignment = std::vector<std::pair<PositionKey, std::size_t>>;

template <class S>
std::vector<Assignment> policies_at(const TreeGame<S>& g, const GlobalHistory& h) {
  std::vector<Assignment> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::vector<Assignment> combos{{{h.position, i}}};
    for (auto& o : step(g, h, i)) {
      if (o.history.halted()) continue;
      const auto sub = policies_at(g, o.history);
      std::vector<Assignment> next;
      next.reserve(combos.size() * sub.size());
      for (const auto& a : combos) {
        for (const auto& b : sub) {
          Assignment c = a;
          c.insert(c.end(), b.begin(), b.end());
          next.push_back(std::move(c));
        }
      }
      combos = std::move(next);
    }
    for (auto& c : combos) out.push_back(std::move(c));
  }
  return out;
}

}  // namespace detail

/// Number of deterministic policies that differ on some reachable history (saturating).
template <class S>
std::uint64_t count_policies(const TreeGame<S>& g) {
  require_game(g, true);
  return detail::count_policies_at(g, initial_history(g));
}

/// Every deterministic policy, as a table over the histories it reaches.
template <class S>
std::vector<TablePolicy> enumerate_policies(const TreeGame<S>& g, std::uint64_t cap = kDefaultPolicyCap) {
  const std::uint64_t n = count_policies(g);
  if (n > cap) {
    throw CapExceeded("game has " + std::to_string(n) + " policies, above the cap " + std::to_string(cap));
  }
  std::vector<TablePolicy> out;
  for (auto& a : detail::policies_at(g, initial_history(g))) {
    TablePolicy p;
    for (auto& [key, choice] : a) p.choice.emplace(std::move(key), choice);
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Certificates

struct IndexOptimalityReport {
  std::string index_value;
  std::string dp_value;
  double index_value_double = 0.0;
  double dp_value_double = 0.0;
  std::size_t histories = 0;
  std::size_t unique_index_histories = 0;  // histories where the index argmax is strict
  std::size_t disagreements = 0;           // of those, where the index action is suboptimal
  bool pass = false;
};

namespace detail {

template <class S>
std::string format_value(const S& v) {
  if constexpr (is_exact_v<S>) {
    return v.str();
  } else {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
}

}  // namespace detail

/// Compares the every-round index policy against backward induction on the game, and checks
/// at every history with a unique index maximizer that the index action is optimal.
template <class S>
IndexOptimalityReport certify_index_optimality(const TreeGame<S>& g, double tol = 1e-10,
                                        std::uint64_t cap = kDefaultHistoryCap) {
  require_game(g);
  const auto sol = dp_optimal(g, cap);
  const S index_value = evaluate_exact(g, Policy{IndexPolicy{}});
  std::vector<std::vector<std::optional<S>>> rho;
  for (std::size_t i = 0; i < g.size(); ++i) rho.push_back(node_indices(reduce(g.model, g.bandits[i], g.costs_of(i))));
  IndexOptimalityReport r;
  r.histories = sol.values.size();
  for (const auto& [key, v] : sol.values) {
    std::size_t best = 0;
    bool unique = true;
    for (std::size_t i = 1; i < g.size(); ++i) {
      const S& a = *rho[i][key[i]];
      const S& b = *rho[best][key[best]];
      if (near(a, b, tol)) {
        unique = false;
      } else if (a > b) {
        best = i;
        unique = true;
      }
    }
    if (!unique) continue;
    ++r.unique_index_histories;
    const S q = detail::action_value(g, detail::history_at(g, key), best, sol.values);
    if (!leq(v, q, tol)) ++r.disagreements;
  }
  r.index_value = detail::format_value(index_value);
  r.dp_value = detail::format_value(sol.value);
  r.index_value_double = to_double(index_value);
  r.dp_value_double = to_double(sol.value);
  r.pass = near(index_value, sol.value, tol) && r.disagreements == 0;
  return r;
}

struct GreedyPathwiseReport {
  std::size_t policies = 0;
  std::size_t atoms = 0;
  std::size_t violations = 0;
  bool pass = false;
};

/// True when rewards never increase along live nodes (halted leaves are not constrained).
template <class S>
bool non_increasing(const TreeBandit<S>& b) {
  for (NodeId v = 0; v < b.size(); ++v) {
    const auto& n = b.node(v);
    if (n.halted) continue;
    for (const auto& e : n.edges) {
      if (!b.node(e.to).halted && b.node(e.to).reward > n.reward) return false;
    }
  }
  return true;
}

namespace detail {

/// Root-to-halted-leaf paths of a tree bandit, each as the node sequence by depth.
template <class S>
std::vector<std::vector<NodeId>> leaf_paths(const TreeBandit<S>& b) {
  std::vector<std::vector<NodeId>> out;
  std::vector<NodeId> path;
  std::function<void(NodeId)> walk = [&](NodeId v) {
    path.push_back(v);
    if (b.node(v).halted) {
      out.push_back(path);
    } else {
      for (const auto& e : b.node(v).edges) walk(e.to);
    }
    path.pop_back();
  };
  walk(b.root());
  return out;
}

}  // namespace detail

/// Realized payout of a policy on one joint atom (a fixed leaf path per bandit).
template <class S>
S realized_payout(const TreeGame<S>& g, const Chooser& choose, const std::vector<std::vector<NodeId>>& atom) {
  GlobalHistory h = initial_history(g);
  S total(0);
  while (true) {
    const std::size_t i = choose(h);
    total += running_payout(g, h, i);
    GlobalHistory next = h;
    const NodeId to = atom[i].at(static_cast<std::size_t>(h.local_time[i]) + 1);
    next.position[i] = to;
    next.local_time[i] += 1;
    next.round += 1;
    if (g.bandits[i].node(to).halted) {
      next.halter = i;
      return total + terminal_payout(g, h, next);
    }
    h = std::move(next);
  }
}

/// Pathwise check that greedy play on non-increasing penultimate-payout bandits collects at
/// least as much as every policy on every joint realization.
template <class S>
GreedyPathwiseReport certify_greedy_pathwise(const TreeGame<S>& game, std::uint64_t cap = kDefaultPolicyCap) {
  require_game(game);
  for (const auto& b : game.bandits) {
    if (!non_increasing(b)) throw PreconditionError("greedy certificate needs non-increasing reward processes");
  }
  TreeGame<S> g = game;
  g.model = PayoutModel::kPSP;
  const auto policies = enumerate_policies(g, cap);
  const Chooser greedy = bind_policy(g, Policy{GreedyReward{}});
  std::vector<Chooser> choosers;
  for (const auto& p : policies) choosers.push_back(bind_policy(g, Policy{p}));
  std::vector<std::vector<std::vector<NodeId>>> paths;
  for (const auto& b : g.bandits) paths.push_back(detail::leaf_paths(b));
  GreedyPathwiseReport r;
  r.policies = policies.size();
  std::vector<std::size_t> idx(g.size(), 0);
  while (true) {
    std::vector<std::vector<NodeId>> atom;
    for (std::size_t i = 0; i < g.size(); ++i) atom.push_back(paths[i][idx[i]]);
    ++r.atoms;
    const S best = realized_payout(g, greedy, atom);
    for (const auto& c : choosers) {
      if (realized_payout(g, c, atom) > best) ++r.violations;
    }
    std::size_t k = 0;
    while (k < g.size() && ++idx[k] == paths[k].size()) idx[k++] = 0;
    if (k == g.size()) break;
  }
  r.pass = r.violations == 0;
  return r;
}

}  // namespace hb
