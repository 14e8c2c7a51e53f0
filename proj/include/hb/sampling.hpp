#pragma once

#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "hb/game.hpp"

namespace hb {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: the k-th draw of stream s under seed is
/// mix64(seed ^ mix64(s ^ mix64(k))). Sample j of a run uses stream j, so results do not
/// depend on how samples are split across workers.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t next() { return mix64(seed_ ^ mix64(stream_ ^ mix64(counter_++))); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

struct SampleEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

namespace detail {

template <class Game>
double sample_path(const Game& g, const Chooser& choose, CounterRng& rng) {
  GlobalHistory h = initial_history(g);
  double total = 0.0;
  while (true) {
    const std::size_t i = choose(h);
    total += to_double(running_payout(g, h, i));
    auto outcomes = step(g, h, i);
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t pick = outcomes.size() - 1;
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
      acc += to_double(outcomes[k].probability);
      if (u < acc) {
        pick = k;
        break;
      }
    }
    GlobalHistory next = std::move(outcomes[pick].history);
    if (next.halted()) return total + to_double(terminal_payout(g, h, next));
    h = std::move(next);
  }
}

}  // namespace detail

/// Monte Carlo estimate of a policy's value. Deterministic in (seed, game, policy, n); the
/// per-sample values are reduced in sample order regardless of `workers`.
template <class Game>
SampleEstimate run_policy_sampled(const Game& g, const Policy& policy, std::uint64_t seed, std::size_t n_samples,
                                  unsigned workers = 1) {
  if (n_samples < 1) throw PreconditionError("need at least one sample");
  require_game(g, true);
  const Chooser choose = bind_policy(g, policy);
  std::vector<double> values(n_samples);
  auto run_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t j = lo; j < hi; ++j) {
      CounterRng rng(seed, j);
      values[j] = detail::sample_path(g, choose, rng);
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n_samples)));
  if (workers == 1) {
    run_range(0, n_samples);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n_samples + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(n_samples, lo + chunk);
      if (lo < hi) pool.emplace_back(run_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  // Welford in sample order.
  SampleEstimate out;
  double mean = 0.0, m2 = 0.0;
  for (std::size_t j = 0; j < n_samples; ++j) {
    const double delta = values[j] - mean;
    mean += delta / static_cast<double>(j + 1);
    m2 += delta * (values[j] - mean);
  }
  out.mean = mean;
  out.samples = n_samples;
  out.std_error = n_samples > 1 ? std::sqrt(m2 / static_cast<double>(n_samples - 1) / static_cast<double>(n_samples)) : 0.0;
  return out;
}

}  // namespace hb
