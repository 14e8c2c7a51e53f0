#pragma once

#include <cstdint>
#include <vector>

#include "hb/bandit.hpp"
#include "hb/game.hpp"
#include "hb/sampling.hpp"

namespace hb {

/// Shape of randomly generated tree bandits. Probabilities are multiples of 1/16, so every
/// generated instance is represented exactly in binary floating point as well.
struct TreeSpec {
  int max_depth = 3;      // live nodes have depth < max_depth; leaves can sit at max_depth
  int max_branching = 2;  // continuation children per live node
  int reward_lo = -5;
  int reward_hi = 10;
  bool non_increasing = false;  // live rewards never increase along a path
  bool allow_certain_halt = true;
};

namespace detail {

inline int draw_int(CounterRng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.next() % static_cast<std::uint64_t>(hi - lo + 1));
}

template <class S>
S quarter(int k) {
  return S(k) / S(4);
}

}  // namespace detail

template <class S = double>
TreeBandit<S> random_tree(CounterRng& rng, const TreeSpec& spec = {}) {
  const int depth = detail::draw_int(rng, 1, spec.max_depth);
  std::vector<TreeNode<S>> nodes;
  nodes.push_back({0, S(detail::draw_int(rng, spec.reward_lo, spec.reward_hi)), false, {}});
  std::vector<NodeId> frontier{0};
  while (!frontier.empty()) {
    const NodeId v = frontier.back();
    frontier.pop_back();
    const int d = nodes[v].depth;
    // halting mass in {1/4, 1/2, 3/4, 1}; forced to 1 at the depth limit
    const int halt_quarters = d + 1 >= depth ? 4 : detail::draw_int(rng, 1, spec.allow_certain_halt ? 4 : 3);
    std::vector<Edge<S>> edges;
    const NodeId leaf = nodes.size();
    nodes.push_back({d + 1, S(detail::draw_int(rng, spec.reward_lo, spec.reward_hi)), true, {}});
    edges.push_back({leaf, detail::quarter<S>(halt_quarters), true});
    if (halt_quarters < 4) {
      const S rest = S(1) - detail::quarter<S>(halt_quarters);
      const int children = detail::draw_int(rng, 1, spec.max_branching);
      std::vector<S> split;
      if (children == 1) {
        split.push_back(rest);
      } else {
        S left = rest;
        for (int c = 0; c + 1 < children; ++c) {
          const S part = left * detail::quarter<S>(detail::draw_int(rng, 1, 3));
          split.push_back(part);
          left -= part;
        }
        split.push_back(left);
      }
      for (const S& p : split) {
        const NodeId child = nodes.size();
        S reward = spec.non_increasing ? S(nodes[v].reward - S(detail::draw_int(rng, 0, 3)))
                                       : S(detail::draw_int(rng, spec.reward_lo, spec.reward_hi));
        nodes.push_back({d + 1, reward, false, {}});
        edges.push_back({child, p, false});
        frontier.push_back(child);
      }
    }
    nodes[v].edges = std::move(edges);
  }
  return TreeBandit<S>(std::move(nodes), 0);
}

/// Seeded random game: bandit count is drawn from [min_bandits, max_bandits]; TP games also
/// get a nonnegative integer cost process.
template <class S = double>
TreeGame<S> random_game(std::uint64_t seed, PayoutModel model, int min_bandits = 2, int max_bandits = 3,
                        const TreeSpec& spec = {}) {
  CounterRng rng(seed, 0x6A4E5C1DULL);
  TreeGame<S> g;
  g.model = model;
  const int n = detail::draw_int(rng, min_bandits, max_bandits);
  for (int i = 0; i < n; ++i) g.bandits.push_back(random_tree<S>(rng, spec));
  if (model == PayoutModel::kTP) {
    for (const auto& b : g.bandits) {
      std::vector<S> costs;
      for (NodeId v = 0; v < b.size(); ++v) costs.push_back(S(detail::draw_int(rng, 0, 5)));
      g.costs.push_back(std::move(costs));
    }
  }
  return g;
}

/// Seeded random Markov bandit with constant halting probability 1 - beta.
inline MarkovBandit random_geometric_markov(std::uint64_t seed, double beta, int max_states = 5, int reward_lo = -5,
                                            int reward_hi = 10) {
  if (!(beta > 0.0 && beta < 1.0)) throw PreconditionError("beta must lie in (0,1)");
  CounterRng rng(seed, 0x3C9D27B1ULL);
  const int n = detail::draw_int(rng, 1, max_states);
  MarkovBandit b;
  for (int x = 0; x < n; ++x) {
    const double r = detail::draw_int(rng, reward_lo, reward_hi);
    b.states.push_back({r, 1.0 - beta, static_cast<double>(detail::draw_int(rng, reward_lo, reward_hi))});
    std::vector<double> row(n, 0.0);
    double total = 0.0;
    for (int y = 0; y < n; ++y) {
      row[y] = detail::draw_int(rng, 0, 3);
      total += row[y];
    }
    if (total == 0.0) {
      row[detail::draw_int(rng, 0, n - 1)] = 1.0;
      total = 1.0;
    }
    for (auto& p : row) p /= total;
    b.transitions.push_back(std::move(row));
  }
  b.initial = 0;
  return b;
}

}  // namespace hb
