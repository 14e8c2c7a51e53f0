#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hb/bandit.hpp"
#include "hb/stopping.hpp"

namespace hb {

template <class S>
struct IndexResult {
  S index{};
  StoppingRule rule;
  int iterations = 0;       // parametric solves (1 for enumeration)
  std::vector<S> lambdas;   // parametric trace, starting from the never-stop ratio
};

/// Brute-force index: maximum block ratio over every stopping rule after `anchor`.
template <class S>
IndexResult<S> solo_index_enumerate(const TreeBandit<S>& b, NodeId anchor, std::uint64_t cap = kDefaultRuleCap) {
  require_valid(b);
  IndexResult<S> best;
  bool first = true;
  for_each_rule(
      b, anchor,
      [&](const StoppingRule& r) {
        const auto v = block_value(b, r);
        if (first || v.ratio > best.index) {
          best.index = v.ratio;
          best.rule = r;
          first = false;
        }
      },
      cap);
  best.iterations = 1;
  return best;
}

template <class S>
struct ParametricValue {
  S value{};          // sup over rules of E[X_{sigma ^ tau} - X_t - lambda 1{t < sigma <= tau}]
  StoppingRule rule;  // earliest maximizer: stop whenever stopping is at least as good as continuing
};

namespace detail {

template <class S>
bool stop_preferred(const S& stop, const S& cont) {
  if constexpr (is_exact_v<S>) {
    return stop >= cont;
  } else {
    return stop >= cont - 1e-12 * (1.0 + std::abs(cont));
  }
}

}  // namespace detail

/// Backward induction for the stopping problem with payoff X_{sigma ^ tau} - X_t - lambda on
/// halting. The anchor must continue; ties resolve to stopping.
template <class S>
ParametricValue<S> parametric_value(const TreeBandit<S>& b, NodeId anchor, const S& lambda) {
  const S base = b.node(anchor).reward;
  ParametricValue<S> out;
  out.rule.anchor = anchor;
  std::function<S(NodeId)> continuation = [&](NodeId v) -> S {
    S total(0);
    for (const auto& e : b.node(v).edges) {
      const auto& child = b.node(e.to);
      if (child.halted) {
        total += e.p * (child.reward - base - lambda);
        continue;
      }
      const S stop = child.reward - base;
      const S cont = continuation(e.to);
      if (detail::stop_preferred(stop, cont)) {
        out.rule.stop_set.push_back(e.to);
        total += e.p * stop;
      } else {
        total += e.p * cont;
      }
    }
    return total;
  };
  out.value = continuation(anchor);
  // Nodes below a chosen stop were also visited; keep only first hits.
  out.rule = canonical_rule(b, out.rule);
  return out;
}

inline constexpr int kDefaultIterationCap = 10'000;

/// Index by parametric ratio iteration: each step solves the stopping problem at the current
/// ratio and moves to the ratio of the maximizing rule, until the parametric value is zero.
template <class S>
IndexResult<S> solo_index_parametric(const TreeBandit<S>& b, NodeId anchor, int iteration_cap = kDefaultIterationCap) {
  if (anchor >= b.size()) throw PreconditionError("anchor out of range");
  if (b.node(anchor).halted) throw PreconditionError("anchor is a halted node");
  IndexResult<S> out;
  S lambda = block_value(b, StoppingRule{anchor, {}}).ratio;
  out.lambdas.push_back(lambda);
  for (int it = 1; it <= iteration_cap; ++it) {
    auto pv = parametric_value(b, anchor, lambda);
    const S ratio = block_value(b, pv.rule).ratio;
    if (leq(ratio, lambda, 1e-13 * (1.0 + std::abs(to_double(lambda))))) {
      out.index = lambda;
      out.rule = std::move(pv.rule);
      out.iterations = it;
      return out;
    }
    lambda = ratio;
    out.lambdas.push_back(lambda);
  }
  throw AssertionFailure("parametric index iteration did not converge within " + std::to_string(iteration_cap) +
                         " iterations");
}

// ---------------------------------------------------------------------------
// Index decomposition

template <class S>
struct IndexBlock {
  NodeId anchor = 0;
  int generation = 0;  // k in tau_k
  S index{};
  StoppingRule rule;   // tau_{k+1}
  std::optional<std::size_t> parent;
};

template <class S>
struct IndexDecomposition {
  std::vector<IndexBlock<S>> blocks;
  std::vector<std::optional<std::size_t>> block_of;  // live node -> block containing it
  std::vector<std::optional<S>> y;                   // live node -> Y value

  /// Anchors grouped by generation: entry k is the set of nodes where tau_k is attained.
  std::vector<std::vector<NodeId>> index_times() const {
    std::vector<std::vector<NodeId>> out;
    for (const auto& blk : blocks) {
      if (out.size() <= static_cast<std::size_t>(blk.generation)) out.resize(blk.generation + 1);
      out[blk.generation].push_back(blk.anchor);
    }
    for (auto& g : out) std::sort(g.begin(), g.end());
    return out;
  }

  bool is_anchor(NodeId v) const { return block_of.at(v) && blocks[*block_of[v]].anchor == v; }
};

template <class S>
IndexDecomposition<S> index_decomposition(const TreeBandit<S>& b) {
  require_valid(b);
  IndexDecomposition<S> out;
  out.block_of.assign(b.size(), std::nullopt);
  out.y.assign(b.size(), std::nullopt);
  struct Pending {
    NodeId anchor;
    int generation;
    std::optional<std::size_t> parent;
  };
  std::deque<Pending> queue{{b.root(), 0, std::nullopt}};
  while (!queue.empty()) {
    auto [anchor, generation, parent] = queue.front();
    queue.pop_front();
    auto res = solo_index_parametric(b, anchor);
    const std::size_t id = out.blocks.size();
    out.blocks.push_back({anchor, generation, res.index, res.rule, parent});
    // live nodes from the anchor up to (excluding) the stop nodes
    std::vector<NodeId> stack{anchor};
    while (!stack.empty()) {
      NodeId v = stack.back();
      stack.pop_back();
      out.block_of[v] = id;
      out.y[v] = res.index;
      for (const auto& e : b.node(v).edges) {
        if (b.node(e.to).halted) continue;
        if (res.rule.stops_at(e.to)) {
          queue.push_back({e.to, generation + 1, id});
        } else {
          stack.push_back(e.to);
        }
      }
    }
  }
  return out;
}

/// Index at every live node (the quantity an every-round index policy compares).
template <class S>
std::vector<std::optional<S>> node_indices(const TreeBandit<S>& b) {
  std::vector<std::optional<S>> out(b.size());
  for (NodeId v = 0; v < b.size(); ++v) {
    if (!b.node(v).halted) out[v] = solo_index_parametric(b, v).index;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Markov chains

/// Stopping problem on a Markov bandit, already expressed relative to the anchor: each
/// activation from x pays `running[x]`; if it halts it also pays `halt_value[x]`; entering y
/// and stopping there pays `stop_value[y]`.
struct MarkovIndexProblem {
  std::vector<double> running;
  std::vector<double> stop_value;
  std::vector<double> halt_value;
};

inline MarkovIndexProblem collective_problem(const MarkovBandit& b, StateId anchor) {
  MarkovIndexProblem p;
  const double base = b.states.at(anchor).reward;
  for (const auto& s : b.states) {
    p.running.push_back(0.0);
    p.stop_value.push_back(s.reward - base);
    p.halt_value.push_back(s.halt_reward - base);
  }
  return p;
}

struct MarkovIndexResult {
  double index = 0.0;
  std::vector<bool> stop_set;  // stationary: stop on entering these states
  int iterations = 0;
  std::vector<double> lambdas;
  double phi = 0.0;  // parametric value at the returned index
};

struct MarkovSolverOptions {
  double residual = 1e-12;
  int value_iteration_cap = 1'000'000;
  int iteration_cap = kDefaultIterationCap;
};

struct RuleTotals {
  Eigen::VectorXd numerator;    // from each state, activated now and continuing until stop/halt
  Eigen::VectorXd denominator;  // probability of halting before stopping
};

/// Exact evaluation of a stationary stop set by solving the two linear systems.
inline RuleTotals evaluate_stop_set(const MarkovBandit& b, const MarkovIndexProblem& prob, const std::vector<bool>& stop) {
  const auto n = static_cast<Eigen::Index>(b.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd bn(n), bd(n);
  for (Eigen::Index x = 0; x < n; ++x) {
    const auto& s = b.states[x];
    const double survive = 1.0 - s.halt_prob;
    bn(x) = prob.running[x] + s.halt_prob * prob.halt_value[x];
    bd(x) = s.halt_prob;
    for (Eigen::Index y = 0; y < n; ++y) {
      const double p = survive * b.transitions[x][y];
      if (p == 0.0) continue;
      if (stop[y]) {
        bn(x) += p * prob.stop_value[y];
      } else {
        a(x, y) -= p;
      }
    }
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  return {lu.solve(bn), lu.solve(bd)};
}

/// Optimal stationary stop set for payoff minus lambda on halting, by value iteration on the
/// continuation values followed by exact policy-improvement sweeps.
inline std::pair<double, std::vector<bool>> markov_parametric_value(const MarkovBandit& b, const MarkovIndexProblem& prob,
                                                                    StateId anchor, double lambda,
                                                                    const MarkovSolverOptions& opt = {}) {
  const std::size_t n = b.size();
  std::vector<double> cont(n, 0.0), next(n, 0.0);
  auto sweep = [&](const std::vector<double>& c, std::vector<double>& out) {
    double delta = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      const auto& s = b.states[x];
      double v = prob.running[x] + s.halt_prob * (prob.halt_value[x] - lambda);
      for (std::size_t y = 0; y < n; ++y) {
        const double p = b.transitions[x][y];
        if (p != 0.0) v += (1.0 - s.halt_prob) * p * std::max(prob.stop_value[y], c[y]);
      }
      delta = std::max(delta, std::abs(v - c[x]));
      out[x] = v;
    }
    return delta;
  };
  for (int it = 0; it < opt.value_iteration_cap; ++it) {
    const double delta = sweep(cont, next);
    cont.swap(next);
    if (delta < opt.residual) break;
  }
  std::vector<bool> stop(n);
  for (std::size_t y = 0; y < n; ++y) stop[y] = detail::stop_preferred(prob.stop_value[y], cont[y]);
  // Policy improvement on the exact values; terminates because the stop-set space is finite.
  for (std::size_t guard = 0; guard <= n + 1; ++guard) {
    const auto totals = evaluate_stop_set(b, prob, stop);
    std::vector<bool> improved(n);
    for (std::size_t y = 0; y < n; ++y) {
      const double c = totals.numerator(y) - lambda * totals.denominator(y);
      improved[y] = detail::stop_preferred(prob.stop_value[y], c);
    }
    if (improved == stop) {
      return {totals.numerator(anchor) - lambda * totals.denominator(anchor), stop};
    }
    stop = std::move(improved);
  }
  const auto totals = evaluate_stop_set(b, prob, stop);
  return {totals.numerator(anchor) - lambda * totals.denominator(anchor), stop};
}

inline MarkovIndexResult markov_index(const MarkovBandit& b, const MarkovIndexProblem& prob, StateId anchor,
                                      const MarkovSolverOptions& opt = {}) {
  require_valid(b);
  if (anchor >= b.size()) throw PreconditionError("anchor state out of range");
  MarkovIndexResult out;
  std::vector<bool> stop(b.size(), false);
  auto totals = evaluate_stop_set(b, prob, stop);
  double lambda = totals.numerator(anchor) / totals.denominator(anchor);
  out.lambdas.push_back(lambda);
  for (int it = 1; it <= opt.iteration_cap; ++it) {
    auto [phi, rule] = markov_parametric_value(b, prob, anchor, lambda, opt);
    totals = evaluate_stop_set(b, prob, rule);
    const double ratio = totals.numerator(anchor) / totals.denominator(anchor);
    if (ratio <= lambda + 1e-13 * (1.0 + std::abs(lambda))) {
      out.index = lambda;
      out.stop_set = std::move(rule);
      out.iterations = it;
      out.phi = phi;
      return out;
    }
    lambda = ratio;
    out.lambdas.push_back(lambda);
  }
  throw AssertionFailure("Markov index iteration did not converge");
}

/// Collective-payout index of a Markov bandit at `anchor`.
inline MarkovIndexResult solo_index_parametric(const MarkovBandit& b, StateId anchor, const MarkovSolverOptions& opt = {}) {
  return markov_index(b, collective_problem(b, anchor), anchor, opt);
}

}  // namespace hb
