#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "hb/bandit.hpp"

namespace hb {

/// A stopping time strictly later than `anchor`: the first node of `stop_set` met on a
/// path below the anchor. Paths that reach a halted node first are governed by halting.
struct StoppingRule {
  NodeId anchor = 0;
  std::vector<NodeId> stop_set;  // sorted, no node below another

  bool stops_at(NodeId v) const { return std::binary_search(stop_set.begin(), stop_set.end(), v); }

  friend bool operator==(const StoppingRule&, const StoppingRule&) = default;
};

template <class S>
struct BlockValue {
  S numerator{};
  S denominator{};
  S ratio{};
};

/// Checks the rule against the tree and returns it in canonical form (sorted, with stop
/// nodes shadowed by an earlier stop removed).
template <class S>
StoppingRule canonical_rule(const TreeBandit<S>& b, const StoppingRule& rule) {
  if (rule.anchor >= b.size()) throw PreconditionError("anchor out of range");
  if (b.node(rule.anchor).halted) throw PreconditionError("anchor is a halted node");
  std::vector<NodeId> stops = rule.stop_set;
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
  for (NodeId v : stops) {
    if (v >= b.size()) throw PreconditionError("stop node out of range");
    if (v == rule.anchor || !is_ancestor(b, rule.anchor, v)) {
      throw PreconditionError("stopping rule is not strictly later than the anchor (node " + std::to_string(v) + ")");
    }
    if (b.node(v).halted) throw PreconditionError("stop node " + std::to_string(v) + " is halted");
  }
  StoppingRule out{rule.anchor, {}};
  for (NodeId v : stops) {
    bool shadowed = false;
    for (auto p = b.parent(v); p && *p != rule.anchor; p = b.parent(*p)) {
      if (std::binary_search(stops.begin(), stops.end(), *p)) {
        shadowed = true;
        break;
      }
    }
    if (!shadowed) out.stop_set.push_back(v);
  }
  return out;
}

/// Ratio of expected increment E[X_{sigma ^ tau} - X_t] to P(t < sigma <= tau), both
/// conditional on the anchor, by enumeration of the paths below it.
template <class S>
BlockValue<S> block_value(const TreeBandit<S>& b, const StoppingRule& rule_in) {
  const StoppingRule rule = canonical_rule(b, rule_in);
  const S base = b.node(rule.anchor).reward;
  BlockValue<S> out;
  out.numerator = S(0);
  out.denominator = S(0);
  std::function<void(NodeId, const S&)> walk = [&](NodeId v, const S& mass) {
    for (const auto& e : b.node(v).edges) {
      const S p = mass * e.p;
      const auto& child = b.node(e.to);
      if (child.halted) {
        out.numerator += p * (child.reward - base);
        out.denominator += p;
      } else if (rule.stops_at(e.to)) {
        out.numerator += p * (child.reward - base);
      } else {
        walk(e.to, p);
      }
    }
  };
  walk(rule.anchor, S(1));
  if (!(out.denominator > S(0))) throw PreconditionError("block has zero halting probability");
  out.ratio = out.numerator / out.denominator;
  return out;
}

namespace detail {

inline std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

inline std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) {
  return b > std::numeric_limits<std::uint64_t>::max() - a ? std::numeric_limits<std::uint64_t>::max() : a + b;
}

// Rules for the subtree hanging off live node v, when v itself may be a stop node.
template <class S>
std::uint64_t count_below(const TreeBandit<S>& b, NodeId v) {
  std::uint64_t product = 1;
  for (const auto& e : b.node(v).edges) {
    if (!b.node(e.to).halted) product = saturating_mul(product, saturating_add(1, count_below(b, e.to)));
  }
  return product;
}

}  // namespace detail

/// Number of distinct stopping rules strictly after `anchor` (saturates at 2^64-1).
template <class S>
std::uint64_t count_rules(const TreeBandit<S>& b, NodeId anchor) {
  return detail::count_below(b, anchor);
}

inline constexpr std::uint64_t kDefaultRuleCap = 1'000'000;

/// Calls `visit` with every distinct stopping rule strictly after `anchor`.
template <class S, class Visit>
void for_each_rule(const TreeBandit<S>& b, NodeId anchor, Visit&& visit, std::uint64_t cap = kDefaultRuleCap) {
  if (b.node(anchor).halted) throw PreconditionError("anchor is a halted node");
  const auto count = count_rules(b, anchor);
  if (count > cap) {
    throw CapExceeded("stopping-rule count " + std::to_string(count) + " exceeds cap " + std::to_string(cap) +
                      "; use the parametric solver");
  }
  // Frontier of live nodes still undecided; each is either stopped or expanded.
  std::vector<NodeId> stops;
  std::function<void(std::vector<NodeId>)> recurse = [&](std::vector<NodeId> frontier) {
    if (frontier.empty()) {
      StoppingRule r{anchor, stops};
      std::sort(r.stop_set.begin(), r.stop_set.end());
      visit(r);
      return;
    }
    const NodeId v = frontier.back();
    frontier.pop_back();
    stops.push_back(v);
    recurse(frontier);
    stops.pop_back();
    for (const auto& e : b.node(v).edges) {
      if (!b.node(e.to).halted) frontier.push_back(e.to);
    }
    recurse(std::move(frontier));
  };
  std::vector<NodeId> start;
  for (const auto& e : b.node(anchor).edges) {
    if (!b.node(e.to).halted) start.push_back(e.to);
  }
  recurse(std::move(start));
}

template <class S>
std::vector<StoppingRule> enumerate_rules(const TreeBandit<S>& b, NodeId anchor, std::uint64_t cap = kDefaultRuleCap) {
  std::vector<StoppingRule> out;
  for_each_rule(b, anchor, [&](const StoppingRule& r) { out.push_back(r); }, cap);
  return out;
}

}  // namespace hb
