#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hb/bandit.hpp"
#include "hb/index.hpp"

namespace hb {

enum class PayoutModel { kCP, kPSP, kSP, kNH, kTP, kCCP };

inline const char* to_string(PayoutModel m) {
  switch (m) {
    case PayoutModel::kCP: return "CP";
    case PayoutModel::kPSP: return "PSP";
    case PayoutModel::kSP: return "SP";
    case PayoutModel::kNH: return "NH";
    case PayoutModel::kTP: return "TP";
    case PayoutModel::kCCP: return "CCP";
  }
  return "?";
}

inline PayoutModel parse_model(std::string_view text) {
  for (auto m : {PayoutModel::kCP, PayoutModel::kPSP, PayoutModel::kSP, PayoutModel::kNH, PayoutModel::kTP,
                 PayoutModel::kCCP}) {
    std::string name = to_string(m);
    std::string lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (text == name || text == lower) return m;
  }
  throw ParseError("unknown payout model '" + std::string(text) + "'");
}

/// Ultimate solo payout: only the halting reward survives, Z_t = 1{sigma = t} X_t.
template <class S>
TreeBandit<S> reduce_sp(const TreeBandit<S>& b) {
  auto rewards = b.rewards();
  for (NodeId v = 0; v < b.size(); ++v) {
    if (!b.node(v).halted) rewards[v] = S(0);
  }
  return b.with_rewards(rewards);
}

/// Non-halting cost: Z_t = -1{sigma != t} X_t. The collective value under Z is minus the cost.
template <class S>
TreeBandit<S> reduce_nh(const TreeBandit<S>& b) {
  auto rewards = b.rewards();
  for (NodeId v = 0; v < b.size(); ++v) rewards[v] = b.node(v).halted ? S(0) : S(-rewards[v]);
  return b.with_rewards(rewards);
}

/// Total profit: Z_t = 1{sigma = t} R_t - 1{sigma != t} C_t.
template <class S>
TreeBandit<S> reduce_tp(const ProfitBandit<S>& b) {
  const auto& tree = b.reward_process;
  if (b.costs.size() != tree.size()) throw PreconditionError("cost process must be defined at every node");
  auto rewards = tree.rewards();
  for (NodeId v = 0; v < tree.size(); ++v) {
    if (!tree.node(v).halted) rewards[v] = S(-b.costs[v]);
  }
  return tree.with_rewards(rewards);
}

/// Cumulative collective payout: Z_t = sum of X over local times strictly before t.
template <class S>
TreeBandit<S> reduce_ccp(const TreeBandit<S>& b) {
  std::vector<S> rewards(b.size(), S(0));
  for (NodeId v : subtree(b, b.root())) {
    for (const auto& e : b.node(v).edges) rewards[e.to] = rewards[v] + b.node(v).reward;
  }
  return b.with_rewards(rewards);
}

/// Collective-payout instance whose value equals the target model's value (negated for NH).
template <class S>
TreeBandit<S> reduce(PayoutModel model, const TreeBandit<S>& b, const std::vector<S>* costs = nullptr) {
  switch (model) {
    case PayoutModel::kCP: return b;
    case PayoutModel::kSP: return reduce_sp(b);
    case PayoutModel::kNH: return reduce_nh(b);
    case PayoutModel::kCCP: return reduce_ccp(b);
    case PayoutModel::kTP:
      if (costs == nullptr) throw PreconditionError("TP reduction needs a cost process");
      return reduce_tp(ProfitBandit<S>{b, *costs});
    case PayoutModel::kPSP: break;
  }
  throw PreconditionError("the penultimate solo payout model has no collective reduction");
}

/// Model index of a tree bandit: the collective index of its reduced process. For NH this is
/// the quantity to maximize; `nh_cost_index` gives the cost-ordered (minimized) form.
template <class S>
S model_index(PayoutModel model, const TreeBandit<S>& b, NodeId anchor, const std::vector<S>* costs = nullptr) {
  return solo_index_parametric(reduce(model, b, costs), anchor).index;
}

template <class S>
S nh_cost_index(const TreeBandit<S>& b, NodeId anchor) {
  return S(-model_index(PayoutModel::kNH, b, anchor));
}

/// Markov form of the reductions, expressed directly as a stopping problem relative to the
/// anchor (the CCP process is path-dependent, so it is not materialized as a chain).
inline MarkovIndexProblem model_problem(PayoutModel model, const MarkovBandit& b, StateId anchor) {
  const std::size_t n = b.size();
  MarkovIndexProblem p;
  p.running.assign(n, 0.0);
  p.stop_value.assign(n, 0.0);
  p.halt_value.assign(n, 0.0);
  const double base = b.states.at(anchor).reward;
  switch (model) {
    case PayoutModel::kCP: return collective_problem(b, anchor);
    case PayoutModel::kSP:
      for (std::size_t x = 0; x < n; ++x) p.halt_value[x] = b.states[x].halt_reward;
      return p;
    case PayoutModel::kNH:
      for (std::size_t x = 0; x < n; ++x) {
        p.stop_value[x] = base - b.states[x].reward;
        p.halt_value[x] = base;
      }
      return p;
    case PayoutModel::kCCP:
      for (std::size_t x = 0; x < n; ++x) p.running[x] = b.states[x].reward;
      return p;
    case PayoutModel::kTP: throw PreconditionError("TP needs a tree bandit with a cost process");
    case PayoutModel::kPSP: break;
  }
  throw PreconditionError("the penultimate solo payout model has no collective reduction");
}

inline MarkovIndexResult model_index(PayoutModel model, const MarkovBandit& b, StateId anchor) {
  return markov_index(b, model_problem(model, b, anchor), anchor);
}

// ---------------------------------------------------------------------------
// Gittins comparison

struct GittinsOptions {
  double tolerance = 1e-12;    // bisection width on the index
  double residual = 1e-13;     // value-iteration stopping residual
  int bisection_cap = 200;
  int value_iteration_cap = 1'000'000;
};

/// Classical discounted Gittins index by retirement calibration: the smallest per-period
/// retirement reward M for which retiring immediately at `state` is optimal.
inline double gittins_calibration(const MarkovBandit& b, StateId state, double beta, const GittinsOptions& opt = {}) {
  const std::size_t n = b.size();
  double lo = b.states[0].reward;
  double hi = lo;
  for (const auto& s : b.states) {
    lo = std::min(lo, s.reward);
    hi = std::max(hi, s.reward);
  }
  auto continue_beats_retire = [&](double m) {
    const double retire = m / (1.0 - beta);
    std::vector<double> v(n, retire), next(n);
    for (int it = 0; it < opt.value_iteration_cap; ++it) {
      double delta = 0.0;
      for (std::size_t x = 0; x < n; ++x) {
        double cont = b.states[x].reward;
        for (std::size_t y = 0; y < n; ++y) cont += beta * b.transitions[x][y] * v[y];
        next[x] = std::max(retire, cont);
        delta = std::max(delta, std::abs(next[x] - v[x]));
      }
      v.swap(next);
      if (delta < opt.residual * (1.0 + std::abs(retire))) break;
    }
    double cont = b.states[state].reward;
    for (std::size_t y = 0; y < n; ++y) cont += beta * b.transitions[state][y] * v[y];
    return cont > retire;
  };
  for (int it = 0; it < opt.bisection_cap && hi - lo > opt.tolerance; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (continue_beats_retire(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

struct GittinsComparison {
  double beta = 0.0;
  double rho_ccp = 0.0;
  double gittins = 0.0;
  double ratio = 0.0;  // rho_ccp / gittins, expected 1/(1-beta) when gittins != 0
  double discrepancy = 0.0;  // |rho_ccp (1-beta) - gittins|
  bool consistent = false;
};

/// Compares the cumulative-payout index with an independently calibrated Gittins index.
/// Requires constant halting probability 1 - beta.
inline GittinsComparison gittins_compare(const MarkovBandit& b, StateId state, double tolerance = 1e-8) {
  require_valid(b);
  const double h = b.states.at(0).halt_prob;
  for (const auto& s : b.states) {
    if (s.halt_prob != h) throw PreconditionError("Gittins comparison needs a constant halting probability");
  }
  if (!(h < 1.0)) throw PreconditionError("Gittins comparison needs beta = 1 - halt_prob in (0,1)");
  GittinsComparison out;
  out.beta = 1.0 - h;
  out.rho_ccp = model_index(PayoutModel::kCCP, b, state).index;
  out.gittins = gittins_calibration(b, state, out.beta);
  out.ratio = out.gittins != 0.0 ? out.rho_ccp / out.gittins : std::nan("");
  out.discrepancy = std::abs(out.rho_ccp * (1.0 - out.beta) - out.gittins);
  out.consistent = out.discrepancy <= tolerance;
  return out;
}

inline GittinsComparison gittins_compare(const MarkovBandit& b, double tolerance = 1e-8) {
  return gittins_compare(b, b.initial, tolerance);
}

}  // namespace hb
