#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "errors.hpp"
#include "game.hpp"
#include "parallel.hpp"
#include "profile.hpp"
#include "rng.hpp"

namespace lipgame {

namespace detail {

inline std::uint64_t flip_count(const Game& g) {
  std::uint64_t flips = 0;
  for (int m : g.strategy_counts()) flips += static_cast<std::uint64_t>(m - 1);
  return flips;
}

inline void check_budget(const char* what, std::uint64_t cells, const Limits& limits) {
  if (cells > limits.budget) throw BudgetExceeded(what, cells, limits.budget);
}

/// Runs `visit(profile)` over every profile, split into chunks of the
/// lexicographic order, and hands each chunk's accumulator to `merge` in
/// chunk order.
template <typename Acc, typename Visit, typename Merge>
void sweep_profiles(const Game& g, const Limits& limits, Visit&& visit, Merge&& merge) {
  const std::uint64_t total = g.profile_count();
  const unsigned chunks = std::max(1u, limits.threads) * 4;
  std::vector<Acc> partial(chunks);
  for_each_chunk(total, chunks, limits.threads, [&](unsigned c, std::uint64_t begin, std::uint64_t end) {
    if (begin == end) return;
    std::vector<int> a = profile_at(g.strategy_counts(), begin);
    ProfileOdometer odo(g.strategy_counts());
    odo.mutable_current() = a;
    for (std::uint64_t idx = begin; idx < end; ++idx) {
      visit(partial[c], idx, odo.mutable_current());
      odo.next();
    }
  });
  for (auto& acc : partial) merge(acc);
}

}  // namespace detail

/// delta(G): the largest change in any player's payoff caused by a single
/// opponent switching strategy, by enumeration of every profile and flip.
inline double lipschitz_constant_exact(const Game& g, const Limits& limits = {}) {
  detail::check_budget("lipschitz_constant_exact", saturating_mul(g.profile_count(), detail::flip_count(g)), limits);
  const int n = g.players();
  double best = 0.0;
  detail::sweep_profiles<double>(
      g, limits,
      [&](double& acc, std::uint64_t, std::vector<int>& a) {
        std::vector<double> base(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) base[static_cast<std::size_t>(i)] = g.payoff(i, a);
        for (int j = 0; j < n; ++j) {
          const int keep = a[static_cast<std::size_t>(j)];
          // each unordered pair of opponent profiles is seen once, from its lower end
          for (int s = keep + 1; s < g.strategies(j); ++s) {
            a[static_cast<std::size_t>(j)] = s;
            for (int i = 0; i < n; ++i) {
              if (i == j) continue;
              acc = std::max(acc, std::abs(g.payoff(i, a) - base[static_cast<std::size_t>(i)]));
            }
          }
          a[static_cast<std::size_t>(j)] = keep;
        }
      },
      [&](double acc) { best = std::max(best, acc); });
  return best;
}

/// Sampled lower bound on delta(G) for games too large to enumerate.
inline double lipschitz_constant_estimate(const Game& g, std::uint64_t samples, std::uint64_t seed) {
  require(samples >= 1, "lipschitz_constant_estimate: need at least one sample");
  const int n = g.players();
  if (n < 2) return 0.0;
  Rng rng(seed);
  double best = 0.0;
  std::vector<int> a(static_cast<std::size_t>(n));
  for (std::uint64_t t = 0; t < samples; ++t) {
    for (int k = 0; k < n; ++k)
      a[static_cast<std::size_t>(k)] = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.strategies(k))));
    const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)));
    if (j >= i) ++j;
    if (g.strategies(j) < 2) continue;
    const double before = g.payoff(i, a);
    const int keep = a[static_cast<std::size_t>(j)];
    int alt = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.strategies(j) - 1)));
    if (alt >= keep) ++alt;
    a[static_cast<std::size_t>(j)] = alt;
    best = std::max(best, std::abs(g.payoff(i, a) - before));
  }
  return best;
}

/// eta(G): the largest change in a player's deviation gain caused by a single
/// opponent switching strategy. Always at most 2 delta(G).
inline double eta_constant_exact(const Game& g, const Limits& limits = {}) {
  const int n = g.players();
  detail::check_budget(
      "eta_constant_exact",
      saturating_mul(saturating_mul(g.profile_count(), detail::flip_count(g)),
                     static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(g.max_strategies())),
      limits);
  double best = 0.0;
  detail::sweep_profiles<double>(
      g, limits,
      [&](double& acc, std::uint64_t, std::vector<int>& a) {
        std::vector<std::vector<double>> before(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
          before[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(g.strategies(i)));
          g.deviation_payoffs(i, a, before[static_cast<std::size_t>(i)]);
        }
        std::vector<double> after(static_cast<std::size_t>(g.max_strategies()));
        for (int j = 0; j < n; ++j) {
          const int keep = a[static_cast<std::size_t>(j)];
          for (int s = keep + 1; s < g.strategies(j); ++s) {
            a[static_cast<std::size_t>(j)] = s;
            for (int i = 0; i < n; ++i) {
              if (i == j) continue;
              const auto mi = static_cast<std::size_t>(g.strategies(i));
              std::span<double> out(after.data(), mi);
              g.deviation_payoffs(i, a, out);
              // max over pairs (x, y) of |(b[x]-b[y]) - (o[x]-o[y])| is the range of b - o
              double lo = before[static_cast<std::size_t>(i)][0] - out[0], hi = lo;
              for (std::size_t x = 1; x < mi; ++x) {
                const double e = before[static_cast<std::size_t>(i)][x] - out[x];
                lo = std::min(lo, e);
                hi = std::max(hi, e);
              }
              acc = std::max(acc, hi - lo);
            }
          }
          a[static_cast<std::size_t>(j)] = keep;
        }
      },
      [&](double acc) { best = std::max(best, acc); });
  return best;
}

/// The game with payoffs g_i(a) = f_i(a) - f_i(anchor_i, a_{-i}). Deviation
/// gains are unchanged, so both games have the same pure eps-equilibria, and
/// delta of the result is at most eta of the input.
inline std::shared_ptr<ExplicitGame> eta_reduction(const Game& g, std::span<const int> anchors,
                                                   const Limits& limits = {}) {
  require(anchors.size() == static_cast<std::size_t>(g.players()), "eta_reduction: one anchor per player");
  for (int i = 0; i < g.players(); ++i)
    require(anchors[static_cast<std::size_t>(i)] >= 0 && anchors[static_cast<std::size_t>(i)] < g.strategies(i),
            "eta_reduction: invalid anchor for player " + std::to_string(i));
  std::vector<int> b;
  return ExplicitGame::tabulate(
      g.strategy_counts(),
      [&](int i, std::span<const int> a) {
        b.assign(a.begin(), a.end());
        b[static_cast<std::size_t>(i)] = anchors[static_cast<std::size_t>(i)];
        return g.payoff(i, a) - g.payoff(i, b);
      },
      limits.budget);
}

/// max_d f_i(d, a_{-i}) - f_i(a).
inline double regret(const Game& g, int player, std::span<const int> a) {
  std::vector<double> dev(static_cast<std::size_t>(g.strategies(player)));
  g.deviation_payoffs(player, a, dev);
  const double current = dev[static_cast<std::size_t>(a[static_cast<std::size_t>(player)])];
  return std::max(0.0, *std::max_element(dev.begin(), dev.end()) - current);
}

inline double regret(const Game& g, int player, const PureProfile& a) { return regret(g, player, a.view()); }

/// Largest regret over all players.
inline double max_regret(const Game& g, std::span<const int> a) {
  const DeviationTable t = g.all_deviation_payoffs(a);
  double worst = 0.0;
  for (std::size_t i = 0; i < t.players(); ++i) {
    const auto row = t.row(i);
    worst = std::max(worst, *std::max_element(row.begin(), row.end()) - row[static_cast<std::size_t>(a[i])]);
  }
  return worst;
}

inline double max_regret(const Game& g, const PureProfile& a) { return max_regret(g, a.view()); }

inline bool is_pure_eps_equilibrium(const Game& g, std::span<const int> a, double eps, double tol = 1e-9) {
  require(eps >= 0.0, "eps must be nonnegative");
  return max_regret(g, a) <= eps + tol;
}

inline bool is_pure_eps_equilibrium(const Game& g, const PureProfile& a, double eps, double tol = 1e-9) {
  return is_pure_eps_equilibrium(g, a.view(), eps, tol);
}

/// Lowest-index maximizer of f_i(., a_{-i}).
inline int best_response(const Game& g, int player, std::span<const int> a) {
  std::vector<double> dev(static_cast<std::size_t>(g.strategies(player)));
  g.deviation_payoffs(player, a, dev);
  return static_cast<int>(std::max_element(dev.begin(), dev.end()) - dev.begin());
}

inline int best_response(const Game& g, int player, const PureProfile& a) {
  return best_response(g, player, a.view());
}

// ---------------------------------------------------------------------------
// Expectations under mixed profiles.

struct ExpectationMode {
  enum class Kind { exact, monte_carlo };
  Kind kind = Kind::exact;
  std::uint64_t samples = 100'000;
  std::uint64_t seed = 0;

  static ExpectationMode exact() { return {}; }
  static ExpectationMode monte_carlo(std::uint64_t samples, std::uint64_t seed) {
    return {Kind::monte_carlo, samples, seed};
  }
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

namespace detail {

/// Sum over opponent profiles in the support of mu_{-i}, ascending order.
inline double enumerate_expectation(const Game& g, int player, int strategy, const MixedProfile& mu,
                                    const Limits& limits) {
  const int n = g.players();
  std::vector<std::vector<int>> supports(static_cast<std::size_t>(n));
  std::vector<int> sizes(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    supports[static_cast<std::size_t>(j)] =
        j == player ? std::vector<int>{strategy} : mu.support(static_cast<std::size_t>(j));
    sizes[static_cast<std::size_t>(j)] = static_cast<int>(supports[static_cast<std::size_t>(j)].size());
  }
  check_budget("expected_payoff (exact)", saturating_product(sizes), limits);
  ProfileOdometer odo(sizes);
  std::vector<int> a(static_cast<std::size_t>(n));
  double total = 0.0;
  do {
    double w = 1.0;
    for (int j = 0; j < n; ++j) {
      const int s = supports[static_cast<std::size_t>(j)][static_cast<std::size_t>(odo.current()[static_cast<std::size_t>(j)])];
      a[static_cast<std::size_t>(j)] = s;
      if (j != player) w *= mu[static_cast<std::size_t>(j)][static_cast<std::size_t>(s)];
    }
    total += w * g.payoff(player, a);
  } while (odo.next());
  return total;
}

}  // namespace detail

/// E[f_i(s, a_{-i})] with a_{-i} drawn from mu_{-i}.
inline Estimate expected_payoff(const Game& g, int player, int strategy, const MixedProfile& mu,
                                const ExpectationMode& mode = {}, const Limits& limits = {}) {
  g.validate(mu);
  require(strategy >= 0 && strategy < g.strategies(player), "expected_payoff: strategy out of range");
  if (mode.kind == ExpectationMode::Kind::exact) {
    if (auto v = g.closed_form_expectation(player, strategy, mu)) return {*v, 0.0};
    return {detail::enumerate_expectation(g, player, strategy, mu, limits), 0.0};
  }
  require(mode.samples >= 2, "expected_payoff: Monte Carlo needs at least two samples");
  Rng rng(mode.seed);
  double mean = 0.0, m2 = 0.0;
  for (std::uint64_t t = 0; t < mode.samples; ++t) {
    PureProfile a = sample_profile(mu, rng);
    a[static_cast<std::size_t>(player)] = strategy;
    const double x = g.payoff(player, a);
    const double delta = x - mean;
    mean += delta / static_cast<double>(t + 1);
    m2 += delta * (x - mean);
  }
  const double var = m2 / static_cast<double>(mode.samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(mode.samples))};
}

/// Expected payoff of every (player, strategy) pair. In Monte Carlo mode all
/// pairs share one set of sampled profiles.
inline DeviationTable expected_payoff_table(const Game& g, const MixedProfile& mu, const ExpectationMode& mode = {},
                                            const Limits& limits = {}) {
  g.validate(mu);
  DeviationTable table(g.strategy_counts());
  if (mode.kind == ExpectationMode::Kind::exact) {
    if (auto t = g.closed_form_table(mu)) return std::move(*t);
    for (int i = 0; i < g.players(); ++i)
      for (int s = 0; s < g.strategies(i); ++s)
        table.row(static_cast<std::size_t>(i))[static_cast<std::size_t>(s)] =
            expected_payoff(g, i, s, mu, mode, limits).value;
    return table;
  }
  require(mode.samples >= 1, "expected_payoff_table: need at least one sample");
  Rng rng(mode.seed);
  for (std::uint64_t t = 0; t < mode.samples; ++t) {
    const PureProfile a = sample_profile(mu, rng);
    const DeviationTable d = g.all_deviation_payoffs(a.view());
    for (std::size_t i = 0; i < d.players(); ++i) {
      auto acc = table.row(i);
      const auto row = d.row(i);
      for (std::size_t s = 0; s < row.size(); ++s) acc[s] += row[s];
    }
  }
  for (std::size_t i = 0; i < table.players(); ++i)
    for (double& v : table.row(i)) v /= static_cast<double>(mode.samples);
  return table;
}

/// Largest gain any player gets by deviating from mu_i to a pure strategy,
/// given precomputed expected payoffs.
inline double mixed_regret(const MixedProfile& mu, const DeviationTable& expected) {
  double worst = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto e = expected.row(i);
    double avg = 0.0;
    for (std::size_t s = 0; s < e.size(); ++s) avg += mu[i][s] * e[s];
    worst = std::max(worst, *std::max_element(e.begin(), e.end()) - avg);
  }
  return worst;
}

inline double mixed_regret(const Game& g, const MixedProfile& mu, const ExpectationMode& mode = {},
                           const Limits& limits = {}) {
  return mixed_regret(mu, expected_payoff_table(g, mu, mode, limits));
}

// ---------------------------------------------------------------------------
// Pure equilibrium search.

struct PureSearchResult {
  std::optional<PureProfile> first;  ///< lowest profile in lexicographic order
  std::uint64_t count = 0;           ///< number of pure eps-equilibria
};

inline PureSearchResult exhaustive_pure_search(const Game& g, double eps, const Limits& limits = {}) {
  require(eps >= 0.0, "eps must be nonnegative");
  detail::check_budget("exhaustive_pure_search", g.profile_count(), limits);
  struct Acc {
    std::uint64_t count = 0;
    std::optional<std::uint64_t> first;
  };
  PureSearchResult result;
  std::optional<std::uint64_t> first;
  const int n = g.players();
  detail::sweep_profiles<Acc>(
      g, limits,
      [&](Acc& acc, std::uint64_t idx, std::vector<int>& a) {
        std::vector<double> dev(static_cast<std::size_t>(g.max_strategies()));
        for (int i = 0; i < n; ++i) {
          std::span<double> out(dev.data(), static_cast<std::size_t>(g.strategies(i)));
          g.deviation_payoffs(i, a, out);
          const double current = out[static_cast<std::size_t>(a[static_cast<std::size_t>(i)])];
          if (*std::max_element(out.begin(), out.end()) - current > eps + limits.tol) return;
        }
        ++acc.count;
        if (!acc.first) acc.first = idx;
      },
      [&](const Acc& acc) {
        result.count += acc.count;
        if (acc.first && !first) first = acc.first;
      });
  if (first) result.first = PureProfile(profile_at(g.strategy_counts(), *first));
  return result;
}

enum class DynamicsStatus { converged, cycled, budget };

inline std::string_view status_name(DynamicsStatus s) {
  switch (s) {
    case DynamicsStatus::converged: return "converged";
    case DynamicsStatus::cycled: return "cycled";
    case DynamicsStatus::budget: return "budget";
  }
  return "unknown";
}

struct DynamicsResult {
  PureProfile profile;
  DynamicsStatus status = DynamicsStatus::budget;
  int rounds = 0;
};

/// Round-robin best-response dynamics. A player moves only on a strict
/// improvement (beyond tol); the visiting order is a seeded permutation.
/// Cycles are detected on profiles observed at round boundaries.
inline DynamicsResult best_response_dynamics(const Game& g, const PureProfile& a0, int max_rounds, std::uint64_t seed,
                                             double tol = 1e-9) {
  g.validate(a0.view());
  const int n = g.players();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);

  DynamicsResult res{a0, DynamicsStatus::budget, 0};
  std::vector<int> a = a0.strategies();
  std::set<std::vector<int>> seen{a};
  std::vector<double> dev(static_cast<std::size_t>(g.max_strategies()));
  for (int round = 0; round < max_rounds; ++round) {
    bool moved = false;
    for (int i : order) {
      std::span<double> out(dev.data(), static_cast<std::size_t>(g.strategies(i)));
      g.deviation_payoffs(i, a, out);
      const auto best = static_cast<int>(std::max_element(out.begin(), out.end()) - out.begin());
      if (out[static_cast<std::size_t>(best)] > out[static_cast<std::size_t>(a[static_cast<std::size_t>(i)])] + tol) {
        a[static_cast<std::size_t>(i)] = best;
        moved = true;
      }
    }
    res.rounds = round + 1;
    if (!moved) {
      res.profile = PureProfile(a);
      res.status = DynamicsStatus::converged;
      return res;
    }
    if (!seen.insert(a).second) {
      res.profile = PureProfile(a);
      res.status = DynamicsStatus::cycled;
      return res;
    }
  }
  res.profile = PureProfile(a);
  return res;
}

// ---------------------------------------------------------------------------
// Lipschitz thresholds that guarantee a pure eps-equilibrium.

/// eps / 2n: every player best-responding to an arbitrary profile works.
inline double delta_trivial(double eps, int n) {
  require(eps > 0.0 && n >= 2, "delta_trivial: need eps > 0 and n >= 2");
  return eps / (2.0 * n);
}

/// eps / sqrt(8 n ln(2 m n)): self-purification of a mixed equilibrium works.
inline double delta_main(double eps, int m, int n) {
  require(eps > 0.0 && n >= 2 && m >= 1, "delta_main: need eps > 0, n >= 2, m >= 1");
  return eps / std::sqrt(8.0 * n * std::log(2.0 * m * n));
}

/// eps / 2m: anonymous games, independent of the number of players.
inline double delta_anonymous(double eps, int m) {
  require(eps > 0.0 && m >= 1, "delta_anonymous: need eps > 0 and m >= 1");
  return eps / (2.0 * m);
}

}  // namespace lipgame
