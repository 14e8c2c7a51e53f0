#pragma once

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "hb/game.hpp"
#include "hb/index.hpp"

namespace hb {

using PositionKey = std::vector<std::size_t>;

/// Every non-halted history the policy reaches, keyed by joint position, with its probability.
/// Positions determine the history in a tree game, so the key is unique.
template <class S>
std::map<PositionKey, S> reachable_histories(const TreeGame<S>& g, const Chooser& choose) {
  std::map<PositionKey, S> out;
  std::function<void(const GlobalHistory&, const S&)> walk = [&](const GlobalHistory& h, const S& mass) {
    out[h.position] += mass;
    for (auto& o : step(g, h, choose(h))) {
      if (!o.history.halted()) walk(o.history, S(mass * o.probability));
    }
  };
  walk(initial_history(g), S(1));
  return out;
}

namespace detail {

template <class S>
GlobalHistory history_at(const TreeGame<S>& g, const PositionKey& key) {
  GlobalHistory h = initial_history(g);
  if (key.size() != g.size()) throw PreconditionError("history key does not fit the game");
  for (std::size_t i = 0; i < g.size(); ++i) {
    h.position[i] = key[i];
    h.local_time[i] = g.bandits[i].node(key[i]).depth;
    h.round += h.local_time[i];
  }
  return h;
}

}  // namespace detail

/// Block value of bandit i under policy pi from the anchor history (where pi activates i at
/// its current node) up to the end rule or the end of the game, whichever comes first.
/// Numerator: E[X^i at the end - X^i at the anchor]; denominator: P(i halts the game first).
template <class S>
BlockValue<S> pi_block_value(const TreeGame<S>& g, const Chooser& choose, std::size_t i, const PositionKey& anchor,
                             const StoppingRule& end_rule);

namespace detail {

template <class S>
BlockValue<S> pi_block_value_from(const TreeGame<S>& g, const Chooser& choose, std::size_t i, const PositionKey& anchor,
                                  const StoppingRule& end_rule) {
  const GlobalHistory start = history_at(g, anchor);
  const auto& b = g.bandits[i];
  const S base = b.node(anchor[i]).reward;
  BlockValue<S> out{S(0), S(0), S(0)};
  std::function<void(const GlobalHistory&, const S&)> walk = [&](const GlobalHistory& h, const S& mass) {
    const std::size_t j = choose(h);
    for (auto& o : step(g, h, j)) {
      const S q = mass * o.probability;
      const NodeId v = o.history.position[i];
      if (o.history.halted()) {
        out.numerator += q * (b.node(v).reward - base);
        if (*o.history.halter == i) out.denominator += q;
      } else if (j == i && end_rule.stops_at(v)) {
        out.numerator += q * (b.node(v).reward - base);
      } else {
        walk(o.history, q);
      }
    }
  };
  walk(start, S(1));
  if (out.denominator != S(0)) out.ratio = out.numerator / out.denominator;
  return out;
}

}  // namespace detail

template <class S>
BlockValue<S> pi_block_value(const TreeGame<S>& g, const Chooser& choose, std::size_t i, const PositionKey& anchor,
                             const StoppingRule& end_rule) {
  const auto reach = reachable_histories(g, choose);
  if (!reach.count(anchor)) throw PreconditionError("the policy never reaches the anchor history");
  if (choose(detail::history_at(g, anchor)) != i) {
    throw PreconditionError("the policy does not activate the bandit at the anchor history");
  }
  if (end_rule.anchor != anchor[i]) throw PreconditionError("end rule is not anchored at the bandit's position");
  return detail::pi_block_value_from(g, choose, i, anchor, end_rule);
}

/// Policy-equivalent process of bandit i: at each history where pi activates i, the pi-block
/// value of the index block i is currently in, measured from the history where that block
/// started. Histories where pi does not activate i carry no value.
template <class S>
std::map<PositionKey, S> pi_equivalent_process(const TreeGame<S>& g, const Chooser& choose, std::size_t i) {
  require_game(g, true);
  const auto decomp = index_decomposition(g.bandits[i]);
  std::map<PositionKey, S> out;
  std::function<void(const GlobalHistory&, std::optional<S>)> walk = [&](const GlobalHistory& h,
                                                                         std::optional<S> current) {
    const std::size_t j = choose(h);
    if (j == i) {
      const NodeId v = h.position[i];
      if (decomp.is_anchor(v)) {
        const auto& blk = decomp.blocks[*decomp.block_of[v]];
        current = detail::pi_block_value_from(g, choose, i, h.position, blk.rule).ratio;
      }
      out[h.position] = *current;
    }
    for (auto& o : step(g, h, j)) {
      if (!o.history.halted()) walk(o.history, current);
    }
  };
  walk(initial_history(g), std::nullopt);
  return out;
}

/// V^PSP under pi when the halter is paid its Y_pi value from the halting round.
template <class S>
S psp_value_of_equivalent(const TreeGame<S>& g, const Chooser& choose) {
  std::vector<std::map<PositionKey, S>> ypi;
  for (std::size_t i = 0; i < g.size(); ++i) ypi.push_back(pi_equivalent_process(g, choose, i));
  return evaluate_with(
      g, choose, [](const GlobalHistory&, std::size_t) { return S(0); },
      [&](const GlobalHistory& before, const GlobalHistory& after) { return ypi[*after.halter].at(before.position); });
}

/// V^PSP under pi when the halter is paid the index-decomposition value Y at its current node.
template <class S>
S psp_value_of_decomposition(const TreeGame<S>& g, const Chooser& choose) {
  std::vector<IndexDecomposition<S>> decomps;
  for (const auto& b : g.bandits) decomps.push_back(index_decomposition(b));
  return evaluate_with(
      g, choose, [](const GlobalHistory&, std::size_t) { return S(0); },
      [&](const GlobalHistory& before, const GlobalHistory& after) {
        const std::size_t k = *after.halter;
        return *decomps[k].y[before.position[k]];
      });
}

/// The chain V^CP_pi(X) = V^PSP_pi(Y_pi) <= V^PSP_pi(Y) <= V^PSP_*(Y) = V^CP_*(X) on the
/// normalized game, with * the block-committing index policy.
template <class S>
struct ChainReport {
  S cp_policy{};
  S psp_policy_equivalent{};
  S psp_policy_decomposition{};
  S psp_index_decomposition{};
  S cp_index{};
  bool equivalence = false;
  bool domination = false;
  bool greedy = false;
  bool block_identity = false;

  bool ok() const { return equivalence && domination && greedy && block_identity; }
};

template <class S>
ChainReport<S> index_chain(const TreeGame<S>& game, const Policy& policy, double tol = 1e-10) {
  require_game(game);
  if (game.model != PayoutModel::kCP) throw PreconditionError("the chain is stated for the collective payout model");
  TreeGame<S> g = game;
  for (auto& b : g.bandits) b = normalize(b);
  const Chooser pi = bind_policy(g, policy);
  const Chooser star = bind_policy(g, Policy{BlockIndexPolicy{}});
  ChainReport<S> r;
  r.cp_policy = evaluate_exact(g, pi);
  r.psp_policy_equivalent = psp_value_of_equivalent(g, pi);
  r.psp_policy_decomposition = psp_value_of_decomposition(g, pi);
  r.psp_index_decomposition = psp_value_of_decomposition(g, star);
  r.cp_index = evaluate_exact(g, star);
  r.equivalence = near(r.cp_policy, r.psp_policy_equivalent, tol);
  r.domination = leq(r.psp_policy_equivalent, r.psp_policy_decomposition, tol);
  r.greedy = leq(r.psp_policy_decomposition, r.psp_index_decomposition, tol);
  r.block_identity = near(r.psp_index_decomposition, r.cp_index, tol);
  return r;
}

struct InequalityCheck {
  std::size_t checked = 0;
  std::size_t violations = 0;

  bool ok() const { return violations == 0; }
};

/// For every history where pi activates bandit i and every rule after i's current node, the
/// pi-block value does not exceed the solo index there.
template <class S>
InequalityCheck pi_block_bound(const TreeGame<S>& g, const Policy& policy, double tol = 1e-10) {
  require_game(g);
  const Chooser pi = bind_policy(g, policy);
  InequalityCheck out;
  for (const auto& [key, mass] : reachable_histories(g, pi)) {
    const GlobalHistory h = detail::history_at(g, key);
    const std::size_t i = pi(h);
    const auto& b = g.bandits[i];
    const S rho = solo_index_parametric(b, key[i]).index;
    for_each_rule(b, key[i], [&](const StoppingRule& rule) {
      const auto v = detail::pi_block_value_from(g, pi, i, key, rule);
      ++out.checked;
      if (v.denominator != S(0) && !leq(v.ratio, rho, tol)) ++out.violations;
    });
  }
  return out;
}

/// Y_pi <= Y wherever Y_pi is defined.
template <class S>
InequalityCheck equivalent_dominated(const TreeGame<S>& g, const Policy& policy, double tol = 1e-10) {
  require_game(g);
  const Chooser pi = bind_policy(g, policy);
  InequalityCheck out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto decomp = index_decomposition(g.bandits[i]);
    for (const auto& [key, value] : pi_equivalent_process(g, pi, i)) {
      ++out.checked;
      if (!leq(value, *decomp.y[key[i]], tol)) ++out.violations;
    }
  }
  return out;
}

/// Per-bandit reward identity E[X^i at the end] = E[1{i halts} Y^i_pi] for a normalized game.
template <class S>
std::vector<std::pair<S, S>> reward_equivalence(const TreeGame<S>& game, const Policy& policy) {
  TreeGame<S> g = game;
  for (auto& b : g.bandits) b = normalize(b);
  const Chooser pi = bind_policy(g, policy);
  std::vector<std::pair<S, S>> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto ypi = pi_equivalent_process(g, pi, i);
    auto none = [](const GlobalHistory&, std::size_t) { return S(0); };
    const S lhs = evaluate_with(g, pi, none, [&](const GlobalHistory&, const GlobalHistory& after) {
      return g.bandits[i].node(after.position[i]).reward;
    });
    const S rhs = evaluate_with(g, pi, none, [&](const GlobalHistory& before, const GlobalHistory& after) {
      return *after.halter == i ? ypi.at(before.position) : S(0);
    });
    out.emplace_back(lhs, rhs);
  }
  return out;
}

}  // namespace hb
