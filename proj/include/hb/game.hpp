#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hb/bandit.hpp"
#include "hb/index.hpp"
#include "hb/reductions.hpp"

namespace hb {

/// N >= 2 independent tree bandits played under one payout model. `costs` is per bandit and
/// only consulted by TP.
template <class S = double>
struct TreeGame {
  std::vector<TreeBandit<S>> bandits;
  PayoutModel model = PayoutModel::kCP;
  std::vector<std::vector<S>> costs;

  std::size_t size() const { return bandits.size(); }

  const std::vector<S>* costs_of(std::size_t i) const { return i < costs.size() ? &costs[i] : nullptr; }

  template <class T>
  TreeGame<T> convert() const {
    TreeGame<T> out;
    out.model = model;
    for (const auto& b : bandits) out.bandits.push_back(b.template convert<T>());
    for (const auto& c : costs) {
      std::vector<T> cc;
      for (const auto& v : c) {
        if constexpr (std::is_same_v<T, S>) {
          cc.push_back(v);
        } else if constexpr (std::is_same_v<T, double>) {
          cc.push_back(to_double(v));
        } else {
          cc.push_back(from_double<T>(to_double(v)));
        }
      }
      out.costs.push_back(std::move(cc));
    }
    return out;
  }
};

struct MarkovGame {
  std::vector<MarkovBandit> bandits;
  PayoutModel model = PayoutModel::kCP;

  std::size_t size() const { return bandits.size(); }
};

/// Bookkeeping of one play: current node (or state) and local time of every bandit, the
/// round, and who halted the game once it has ended.
struct GlobalHistory {
  std::vector<std::size_t> position;
  std::vector<int> local_time;
  int round = 0;
  std::optional<std::size_t> halter;

  bool halted() const { return halter.has_value(); }
};

template <class S>
void require_game(const TreeGame<S>& g, bool allow_single = false) {
  if (g.size() < (allow_single ? 1u : 2u)) throw PreconditionError("a game needs at least two bandits");
  for (const auto& b : g.bandits) require_valid(b);
  if (g.model == PayoutModel::kTP) {
    if (g.costs.size() != g.size()) throw PreconditionError("TP game needs a cost process for every bandit");
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g.costs[i].size() != g.bandits[i].size()) throw PreconditionError("cost process size mismatch");
    }
  }
}

inline void require_game(const MarkovGame& g, bool allow_single = false) {
  if (g.size() < (allow_single ? 1u : 2u)) throw PreconditionError("a game needs at least two bandits");
  for (const auto& b : g.bandits) require_valid(b);
}

template <class S>
GlobalHistory initial_history(const TreeGame<S>& g) {
  GlobalHistory h;
  for (const auto& b : g.bandits) {
    h.position.push_back(b.root());
    h.local_time.push_back(0);
  }
  return h;
}

inline GlobalHistory initial_history(const MarkovGame& g) {
  GlobalHistory h;
  for (const auto& b : g.bandits) {
    h.position.push_back(b.initial);
    h.local_time.push_back(0);
  }
  return h;
}

template <class S>
struct Outcome {
  S probability{};
  GlobalHistory history;
};

/// Outcome distribution of activating `choice`. Unchosen bandits stay frozen.
template <class S>
std::vector<Outcome<S>> step(const TreeGame<S>& g, const GlobalHistory& h, std::size_t choice) {
  if (h.halted()) throw PreconditionError("cannot step a halted game");
  if (choice >= g.size()) throw PreconditionError("bandit choice out of range");
  std::vector<Outcome<S>> out;
  for (const auto& e : g.bandits[choice].node(h.position[choice]).edges) {
    GlobalHistory next = h;
    next.position[choice] = e.to;
    next.local_time[choice] += 1;
    next.round += 1;
    if (e.halting) next.halter = choice;
    out.push_back({e.p, std::move(next)});
  }
  return out;
}

inline std::vector<Outcome<double>> step(const MarkovGame& g, const GlobalHistory& h, std::size_t choice) {
  if (h.halted()) throw PreconditionError("cannot step a halted game");
  if (choice >= g.size()) throw PreconditionError("bandit choice out of range");
  const auto& b = g.bandits[choice];
  const StateId x = h.position[choice];
  const auto& s = b.states[x];
  std::vector<Outcome<double>> out;
  GlobalHistory halted = h;
  halted.local_time[choice] += 1;
  halted.round += 1;
  halted.halter = choice;
  out.push_back({s.halt_prob, std::move(halted)});
  for (StateId y = 0; y < b.size(); ++y) {
    const double p = (1.0 - s.halt_prob) * b.transitions[x][y];
    if (p <= 0.0) continue;
    GlobalHistory next = h;
    next.position[choice] = y;
    next.local_time[choice] += 1;
    next.round += 1;
    out.push_back({p, std::move(next)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Policies

/// Activate the largest current index, recomputed every round (ties to the lowest id).
/// Uses the game's payout model unless one is given.
struct IndexPolicy {
  std::optional<PayoutModel> model;
};

/// Index policy in block-commitment form: once a bandit is chosen it is played until its
/// current index block ends.
struct BlockIndexPolicy {
  std::optional<PayoutModel> model;
};

/// Activate the largest current reward (ties to the lowest id).
struct GreedyReward {};

struct CyclicPolicy {
  std::vector<std::size_t> order;
};

/// Explicit choice per joint position. Positions missing from the table choose bandit 0.
struct TablePolicy {
  std::map<std::vector<std::size_t>, std::size_t> choice;
};

using Policy = std::variant<IndexPolicy, BlockIndexPolicy, GreedyReward, CyclicPolicy, TablePolicy>;

using Chooser = std::function<std::size_t(const GlobalHistory&)>;

inline std::string describe(const Policy& p) {
  struct {
    std::string operator()(const IndexPolicy&) const { return "index"; }
    std::string operator()(const BlockIndexPolicy&) const { return "block-index"; }
    std::string operator()(const GreedyReward&) const { return "greedy"; }
    std::string operator()(const CyclicPolicy& c) const {
      std::string s = "cyclic:";
      for (std::size_t k = 0; k < c.order.size(); ++k) s += (k ? "," : "") + std::to_string(c.order[k]);
      return s;
    }
    std::string operator()(const TablePolicy& t) const { return "table(" + std::to_string(t.choice.size()) + ")"; }
  } visitor;
  return std::visit(visitor, p);
}

namespace detail {

template <class S>
std::size_t argmax_lowest(const std::vector<S>& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    bool greater;
    if constexpr (is_exact_v<S>) {
      greater = values[i] > values[best];
    } else {
      greater = values[i] > values[best] + 1e-12 * (1.0 + std::abs(values[best]));
    }
    if (greater) best = i;
  }
  return best;
}

inline void require_cyclic(const CyclicPolicy& c, std::size_t n) {
  if (c.order.empty()) throw PreconditionError("cyclic policy needs a non-empty order");
  for (auto i : c.order) {
    if (i >= n) throw PreconditionError("cyclic policy names an unknown bandit");
  }
}

}  // namespace detail

template <class S>
Chooser bind_policy(const TreeGame<S>& g, const Policy& policy) {
  const std::size_t n = g.size();
  if (const auto* p = std::get_if<IndexPolicy>(&policy)) {
    const PayoutModel model = p->model.value_or(g.model);
    std::vector<std::vector<std::optional<S>>> tables;
    for (std::size_t i = 0; i < n; ++i) tables.push_back(node_indices(reduce(model, g.bandits[i], g.costs_of(i))));
    return [tables = std::move(tables)](const GlobalHistory& h) {
      std::vector<S> current;
      for (std::size_t i = 0; i < tables.size(); ++i) current.push_back(*tables[i][h.position[i]]);
      return detail::argmax_lowest(current);
    };
  }
  if (const auto* p = std::get_if<BlockIndexPolicy>(&policy)) {
    const PayoutModel model = p->model.value_or(g.model);
    std::vector<IndexDecomposition<S>> decomps;
    for (std::size_t i = 0; i < n; ++i) decomps.push_back(index_decomposition(reduce(model, g.bandits[i], g.costs_of(i))));
    return [decomps = std::move(decomps)](const GlobalHistory& h) {
      for (std::size_t i = 0; i < decomps.size(); ++i) {
        if (!decomps[i].is_anchor(h.position[i])) return i;  // mid-block: keep playing it
      }
      std::vector<S> current;
      for (std::size_t i = 0; i < decomps.size(); ++i) current.push_back(*decomps[i].y[h.position[i]]);
      return detail::argmax_lowest(current);
    };
  }
  if (std::holds_alternative<GreedyReward>(policy)) {
    std::vector<std::vector<S>> rewards;
    for (const auto& b : g.bandits) rewards.push_back(b.rewards());
    return [rewards = std::move(rewards)](const GlobalHistory& h) {
      std::vector<S> current;
      for (std::size_t i = 0; i < rewards.size(); ++i) current.push_back(rewards[i][h.position[i]]);
      return detail::argmax_lowest(current);
    };
  }
  if (const auto* p = std::get_if<CyclicPolicy>(&policy)) {
    detail::require_cyclic(*p, n);
    return [order = p->order](const GlobalHistory& h) { return order[static_cast<std::size_t>(h.round) % order.size()]; };
  }
  const auto& table = std::get<TablePolicy>(policy);
  for (const auto& [key, choice] : table.choice) {
    if (key.size() != n || choice >= n) throw PreconditionError("table policy entry does not fit the game");
  }
  return [choices = table.choice](const GlobalHistory& h) {
    auto it = choices.find(h.position);
    return it == choices.end() ? std::size_t{0} : it->second;
  };
}

inline Chooser bind_policy(const MarkovGame& g, const Policy& policy) {
  const std::size_t n = g.size();
  if (const auto* p = std::get_if<IndexPolicy>(&policy)) {
    const PayoutModel model = p->model.value_or(g.model);
    std::vector<std::vector<double>> tables(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (StateId x = 0; x < g.bandits[i].size(); ++x) tables[i].push_back(model_index(model, g.bandits[i], x).index);
    }
    return [tables = std::move(tables)](const GlobalHistory& h) {
      std::vector<double> current;
      for (std::size_t i = 0; i < tables.size(); ++i) current.push_back(tables[i][h.position[i]]);
      return detail::argmax_lowest(current);
    };
  }
  if (std::holds_alternative<GreedyReward>(policy)) {
    std::vector<std::vector<double>> rewards(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& s : g.bandits[i].states) rewards[i].push_back(s.reward);
    }
    return [rewards = std::move(rewards)](const GlobalHistory& h) {
      std::vector<double> current;
      for (std::size_t i = 0; i < rewards.size(); ++i) current.push_back(rewards[i][h.position[i]]);
      return detail::argmax_lowest(current);
    };
  }
  if (const auto* p = std::get_if<CyclicPolicy>(&policy)) {
    detail::require_cyclic(*p, n);
    return [order = p->order](const GlobalHistory& h) { return order[static_cast<std::size_t>(h.round) % order.size()]; };
  }
  throw PreconditionError("the Markov backend supports index, greedy and cyclic policies only (" + describe(policy) + ")");
}

// ---------------------------------------------------------------------------
// Payouts

/// Terminal payout of a finished tree game. `before` is the history of the halting round.
template <class S>
S terminal_payout(const TreeGame<S>& g, const GlobalHistory& before, const GlobalHistory& after) {
  const std::size_t halter = *after.halter;
  auto reward = [&](std::size_t i, const GlobalHistory& h) { return g.bandits[i].node(h.position[i]).reward; };
  S total(0);
  switch (g.model) {
    case PayoutModel::kCP:
      for (std::size_t i = 0; i < g.size(); ++i) total += reward(i, after);
      return total;
    case PayoutModel::kPSP: return reward(halter, before);
    case PayoutModel::kSP: return reward(halter, after);
    case PayoutModel::kNH:
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (i != halter) total += reward(i, after);
      }
      return total;
    case PayoutModel::kTP:
      total = reward(halter, after);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (i != halter) total -= g.costs[i][after.position[i]];
      }
      return total;
    case PayoutModel::kCCP: return S(0);
  }
  return total;
}

/// Reward paid on the activation itself (CCP pays the pre-activation reward every round).
template <class S>
S running_payout(const TreeGame<S>& g, const GlobalHistory& before, std::size_t choice) {
  if (g.model != PayoutModel::kCCP) return S(0);
  return g.bandits[choice].node(before.position[choice]).reward;
}

inline double terminal_payout(const MarkovGame& g, const GlobalHistory& before, const GlobalHistory& after) {
  const std::size_t halter = *after.halter;
  const auto& hs = g.bandits[halter].states[before.position[halter]];
  auto reward = [&](std::size_t i) { return g.bandits[i].states[after.position[i]].reward; };
  double total = 0.0;
  switch (g.model) {
    case PayoutModel::kCP:
      total = hs.halt_reward;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (i != halter) total += reward(i);
      }
      return total;
    case PayoutModel::kPSP: return hs.reward;
    case PayoutModel::kSP: return hs.halt_reward;
    case PayoutModel::kNH:
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (i != halter) total += reward(i);
      }
      return total;
    case PayoutModel::kCCP: return 0.0;
    case PayoutModel::kTP: break;
  }
  throw PreconditionError("TP is not defined on the Markov backend");
}

inline double running_payout(const MarkovGame& g, const GlobalHistory& before, std::size_t choice) {
  if (g.model != PayoutModel::kCCP) return 0.0;
  return g.bandits[choice].states[before.position[choice]].reward;
}

// ---------------------------------------------------------------------------
// Exact evaluation

/// Expected value of a generic payout along the policy's reachable histories. `running` is
/// paid on every activation, `terminal` when the activation halts the game.
template <class S, class Running, class Terminal>
S evaluate_with(const TreeGame<S>& g, const Chooser& choose, Running&& running, Terminal&& terminal) {
  std::function<S(const GlobalHistory&)> value = [&](const GlobalHistory& h) -> S {
    const std::size_t i = choose(h);
    S total = running(h, i);
    for (auto& o : step(g, h, i)) {
      total += o.probability * (o.history.halted() ? S(terminal(h, o.history)) : value(o.history));
    }
    return total;
  };
  return value(initial_history(g));
}

template <class S>
S evaluate_exact(const TreeGame<S>& g, const Chooser& choose) {
  require_game(g, true);
  return evaluate_with(
      g, choose, [&](const GlobalHistory& h, std::size_t i) { return running_payout(g, h, i); },
      [&](const GlobalHistory& before, const GlobalHistory& after) { return terminal_payout(g, before, after); });
}

template <class S>
S evaluate_exact(const TreeGame<S>& g, const Policy& policy) {
  require_game(g, true);
  return evaluate_exact(g, bind_policy(g, policy));
}

struct MarkovEvaluation {
  double value = 0.0;
  double residual = 0.0;
  std::size_t states = 0;
};

/// Exact value on the Markov backend by solving the absorbing-chain linear system over the
/// reachable (joint state, cycle phase) pairs.
inline MarkovEvaluation evaluate_markov(const MarkovGame& g, const Policy& policy) {
  require_game(g, true);
  if (g.model == PayoutModel::kTP) throw PreconditionError("TP is not defined on the Markov backend");
  const Chooser choose = bind_policy(g, policy);
  std::size_t period = 1;
  if (const auto* c = std::get_if<CyclicPolicy>(&policy)) period = c->order.size();
  // Key: joint position plus round modulo the cycle length.
  using Key = std::pair<std::vector<std::size_t>, std::size_t>;
  std::map<Key, std::size_t> index;
  std::vector<GlobalHistory> reps;
  auto intern = [&](const GlobalHistory& h) {
    Key k{h.position, static_cast<std::size_t>(h.round) % period};
    auto [it, inserted] = index.emplace(k, reps.size());
    if (inserted) {
      GlobalHistory r = h;
      r.round = static_cast<int>(k.second);
      reps.push_back(std::move(r));
    }
    return it->second;
  };
  intern(initial_history(g));
  struct Row {
    double constant = 0.0;
    std::vector<std::pair<std::size_t, double>> next;
  };
  std::vector<Row> rows;
  for (std::size_t k = 0; k < reps.size(); ++k) {
    const GlobalHistory h = reps[k];
    const std::size_t i = choose(h);
    Row row;
    row.constant = running_payout(g, h, i);
    for (auto& o : step(g, h, i)) {
      if (o.history.halted()) {
        row.constant += o.probability * terminal_payout(g, h, o.history);
      } else {
        row.next.push_back({intern(o.history), o.probability});
      }
    }
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    b(r) = rows[r].constant;
    for (auto [c, p] : rows[r].next) a(r, static_cast<Eigen::Index>(c)) -= p;
  }
  Eigen::VectorXd v = a.partialPivLu().solve(b);
  MarkovEvaluation out;
  out.residual = (a * v - b).cwiseAbs().maxCoeff();
  out.value = v(0);
  out.states = rows.size();
  if (!(out.residual <= 1e-9 * (1.0 + b.cwiseAbs().maxCoeff()))) {
    throw AssertionFailure("Markov evaluation linear system residual " + std::to_string(out.residual) + " too large");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trace bookkeeping

/// One explicit sample path: per bandit, the outcome of each successive activation. For
/// trees an outcome is an edge index of the current node; for Markov bandits it is the next
/// state, or kHaltOutcome.
struct PathDescriptor {
  std::vector<std::vector<long>> outcomes;
};

inline constexpr long kHaltOutcome = -1;

struct TraceRow {
  int round = 0;
  std::vector<int> local_times;
  std::size_t choice = 0;
  double reward = 0.0;    // X_pi(s): pre-activation reward of the chosen bandit
  double survival = 0.0;  // probability that the game has not stopped after this round
  bool halts = false;
};

struct Trace {
  std::vector<TraceRow> rows;
  std::vector<std::vector<int>> activation_rounds;  // S^i(t) for t = 0, 1, ...
  std::optional<int> global_halting_time;           // sigma_pi when the path halts
};

namespace detail {

template <class Game, class Advance>
Trace trace_generic(const Game& g, const Policy& policy, const PathDescriptor& path, int max_rounds, Advance&& advance) {
  if (path.outcomes.size() != g.size()) throw PreconditionError("path descriptor needs one outcome list per bandit");
  const Chooser choose = bind_policy(g, policy);
  Trace out;
  out.activation_rounds.assign(g.size(), {});
  GlobalHistory h = initial_history(g);
  double survival = 1.0;
  while (h.round < max_rounds) {
    const std::size_t i = choose(h);
    const auto t = static_cast<std::size_t>(h.local_time[i]);
    if (t >= path.outcomes[i].size()) break;  // path description exhausted
    TraceRow row;
    row.round = h.round;
    row.local_times = h.local_time;
    row.choice = i;
    auto [reward, survive, next] = advance(h, i, path.outcomes[i][t]);
    row.reward = reward;
    survival *= survive;
    row.survival = survival;
    out.activation_rounds[i].push_back(h.round);
    h = std::move(next);
    row.halts = h.halted();
    out.rows.push_back(std::move(row));
    if (h.halted()) {
      out.global_halting_time = h.round;
      break;
    }
  }
  return out;
}

}  // namespace detail

template <class S>
Trace trace_times(const TreeGame<S>& g, const Policy& policy, const PathDescriptor& path, int max_rounds = 1000) {
  require_game(g, true);
  return detail::trace_generic(g, policy, path, max_rounds, [&](const GlobalHistory& h, std::size_t i, long outcome) {
    const auto& b = g.bandits[i];
    const auto& node = b.node(h.position[i]);
    if (outcome < 0 || static_cast<std::size_t>(outcome) >= node.edges.size()) {
      throw PreconditionError("path descriptor: edge index out of range for bandit " + std::to_string(i));
    }
    const auto& e = node.edges[static_cast<std::size_t>(outcome)];
    GlobalHistory next = h;
    next.position[i] = e.to;
    next.local_time[i] += 1;
    next.round += 1;
    if (e.halting) next.halter = i;
    return std::tuple{to_double(node.reward), 1.0 - to_double(b.halting_mass(h.position[i])), next};
  });
}

inline Trace trace_times(const MarkovGame& g, const Policy& policy, const PathDescriptor& path, int max_rounds = 1000) {
  require_game(g, true);
  return detail::trace_generic(g, policy, path, max_rounds, [&](const GlobalHistory& h, std::size_t i, long outcome) {
    const auto& b = g.bandits[i];
    const StateId x = h.position[i];
    const auto& s = b.states[x];
    GlobalHistory next = h;
    next.local_time[i] += 1;
    next.round += 1;
    if (outcome == kHaltOutcome) {
      next.halter = i;
    } else if (outcome < 0 || static_cast<std::size_t>(outcome) >= b.size() ||
               !(b.transitions[x][static_cast<std::size_t>(outcome)] > 0.0) || !(s.halt_prob < 1.0)) {
      throw PreconditionError("path descriptor: impossible transition for bandit " + std::to_string(i));
    } else {
      next.position[i] = static_cast<std::size_t>(outcome);
    }
    return std::tuple{s.reward, 1.0 - s.halt_prob, next};
  });
}

}  // namespace hb
