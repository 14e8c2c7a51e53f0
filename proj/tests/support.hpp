#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hb/hb.hpp"

namespace hb::testing {

/// Tally of one property over a sweep.
struct Tally {
  std::size_t checked = 0;
  std::size_t failed = 0;
  std::string first_failure;

  void record(bool ok, const std::string& what) {
    ++checked;
    if (!ok && failed++ == 0) first_failure = what;
  }

  void merge(const Tally& other) {
    if (failed == 0 && other.failed > 0) first_failure = other.first_failure;
    checked += other.checked;
    failed += other.failed;
  }

  bool ok() const { return checked > 0 && failed == 0; }
};

struct IndexInvariants {
  Tally dominance;       // every rule's ratio <= enumerated index
  Tally realization;     // some rule attains the enumerated index
  Tally agreement;       // parametric == enumeration
  Tally iterations;      // parametric iterations <= rule count
  Tally parametric_zero; // |phi(rho)| <= 1e-10
  Tally monotone_index;  // block index never increases from parent block to child block
  Tally monotone_y;      // Y never increases along a path
  Tally block_identity;  // per block: numerator = index * denominator
};

template <class S>
void check_index_invariants(const TreeBandit<S>& b, IndexInvariants& out, const std::string& tag) {
  const double tol = 1e-10;
  for (NodeId v = 0; v < b.size(); ++v) {
    if (b.node(v).halted) continue;
    const std::string where = tag + " node " + std::to_string(v);
    const auto en = solo_index_enumerate(b, v);
    const auto pa = solo_index_parametric(b, v);
    bool attained = false;
    bool dominated = true;
    for_each_rule(b, v, [&](const StoppingRule& r) {
      const S ratio = block_value(b, r).ratio;
      dominated = dominated && leq(ratio, en.index, tol);
      attained = attained || near(ratio, en.index, tol);
    });
    out.dominance.record(dominated, where);
    out.realization.record(attained, where);
    out.agreement.record(near(pa.index, en.index, tol), where);
    out.iterations.record(static_cast<std::uint64_t>(pa.iterations) <= count_rules(b, v), where);
    const S phi = parametric_value(b, v, pa.index).value;
    out.parametric_zero.record(std::abs(to_double(phi)) <= tol, where);
  }
  const auto d = index_decomposition(b);
  for (const auto& blk : d.blocks) {
    const std::string where = tag + " block at " + std::to_string(blk.anchor);
    if (blk.parent) out.monotone_index.record(leq(blk.index, d.blocks[*blk.parent].index, 1e-9), where);
    const auto bv = block_value(b, blk.rule);
    out.block_identity.record(near(bv.numerator, S(blk.index * bv.denominator), tol), where);
  }
  for (NodeId v = 0; v < b.size(); ++v) {
    if (b.node(v).halted) continue;
    if (auto p = b.parent(v)) {
      out.monotone_y.record(leq(*d.y[v], *d.y[*p], 1e-9), tag + " node " + std::to_string(v));
    }
  }
}

/// Native target-model value versus the collective value of the reduced game, for every
/// enumerated policy. NH compares against the negated cost.
template <class S>
void check_reduction(const TreeGame<S>& g, Tally& out, const std::string& tag) {
  TreeGame<S> z;
  z.model = PayoutModel::kCP;
  for (std::size_t i = 0; i < g.size(); ++i) z.bandits.push_back(reduce(g.model, g.bandits[i], g.costs_of(i)));
  const auto policies = enumerate_policies(g);
  for (std::size_t k = 0; k < policies.size(); ++k) {
    const Policy p{policies[k]};
    const S target = evaluate_exact(g, p);
    const S collective = evaluate_exact(z, p);
    const S expected = g.model == PayoutModel::kNH ? S(-target) : target;
    out.record(near(collective, expected, 1e-10), tag + " policy " + std::to_string(k));
  }
}

/// Corpus shape: depth <= 3, branching <= 2.
inline TreeSpec small_spec() {
  TreeSpec spec;
  spec.max_depth = 3;
  spec.max_branching = 2;
  return spec;
}

}  // namespace hb::testing
