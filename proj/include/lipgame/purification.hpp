#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "analysis.hpp"
#include "errors.hpp"
#include "game.hpp"
#include "parallel.hpp"
#include "profile.hpp"
#include "rng.hpp"

namespace lipgame {

/// Union-bound certificate for self-purification: the probability that a
/// profile drawn from a mixed equilibrium lands in every event
/// E_{i,h} = {|f_i(h, a_{-i}) - E f_i(h, .)| <= eps/2} is at least
/// success_lower_bound.
struct PurificationCertificate {
  double eps = 0.0;
  double delta = 0.0;
  int n = 0;
  int m = 0;
  double per_event_bound = 0.0;  ///< 2 exp(-eps^2 / (8 (n-1) delta^2))
  double union_bound = 0.0;      ///< min(1, m n per_event_bound)
  double success_lower_bound = 0.0;
};

inline PurificationCertificate certificate(double eps, double delta, int n, int m) {
  require(eps > 0.0, "certificate: eps must be positive");
  require(delta > 0.0, "certificate: delta must be positive");
  require(n >= 2 && m >= 1, "certificate: need n >= 2 and m >= 1");
  PurificationCertificate c{eps, delta, n, m};
  c.per_event_bound = 2.0 * std::exp(-eps * eps / (8.0 * (n - 1) * delta * delta));
  c.union_bound = std::min(1.0, static_cast<double>(m) * n * c.per_event_bound);
  c.success_lower_bound = std::max(0.0, 1.0 - c.union_bound);
  return c;
}

/// Every player best-responds to a0 simultaneously. For delta(G) <= eps/2n the
/// result is a pure eps-equilibrium.
inline PureProfile two_step_construction(const Game& g, const PureProfile& a0) {
  g.validate(a0.view());
  PureProfile out(a0.size(), 0);
  for (int i = 0; i < g.players(); ++i) out[static_cast<std::size_t>(i)] = best_response(g, i, a0);
  return out;
}

/// |f_i(h, a_{-i}) - E_{mu_{-i}} f_i(h, .)|.
inline double payoff_deviation(const Game& g, const MixedProfile& mu, const PureProfile& a, int player, int h,
                               const ExpectationMode& mode = {}, const Limits& limits = {}) {
  g.validate(a.view());
  PureProfile b = a;
  b[static_cast<std::size_t>(player)] = h;
  return std::abs(g.payoff(player, b) - expected_payoff(g, player, h, mu, mode, limits).value);
}

namespace detail {

/// Expected payoffs for the E-test: exact when feasible, otherwise one
/// frozen Monte Carlo estimate.
inline std::pair<DeviationTable, bool> frozen_expectations(const Game& g, const MixedProfile& mu, std::uint64_t seed,
                                                           std::uint64_t mc_samples, const Limits& limits) {
  try {
    return {expected_payoff_table(g, mu, ExpectationMode::exact(), limits), true};
  } catch (const BudgetExceeded&) {
    return {expected_payoff_table(g, mu, ExpectationMode::monte_carlo(mc_samples, derive_seed(seed, 0xE7)), limits),
            false};
  }
}

struct TryOutcome {
  double deviation = 0.0;  ///< max over (i, h) of the payoff deviation
  bool in_events = false;
};

inline TryOutcome evaluate_sample(const Game& g, const PureProfile& a, const DeviationTable& expected, double eps,
                                  double tol) {
  const DeviationTable d = g.all_deviation_payoffs(a.view());
  double worst = 0.0;
  for (std::size_t i = 0; i < d.players(); ++i) {
    const auto row = d.row(i);
    const auto e = expected.row(i);
    for (std::size_t h = 0; h < row.size(); ++h) worst = std::max(worst, std::abs(row[h] - e[h]));
  }
  return {worst, worst <= eps / 2 + tol};
}

/// The three-inequality chain f_i(d, a_{-i}) <= E f_i(d) + eps/2
/// <= E f_i(a_i) + eps/2 <= f_i(a) + eps, for every player and deviation.
inline bool chain_holds(const Game& g, const PureProfile& a, const DeviationTable& expected, double eps, double tol) {
  const DeviationTable d = g.all_deviation_payoffs(a.view());
  for (std::size_t i = 0; i < d.players(); ++i) {
    const auto row = d.row(i);
    const auto e = expected.row(i);
    const auto own = static_cast<std::size_t>(a[i]);
    for (std::size_t h = 0; h < row.size(); ++h) {
      if (row[h] > e[h] + eps / 2 + tol) return false;
      if (e[h] > e[own] + tol) return false;
      if (e[own] + eps / 2 > row[own] + eps + tol) return false;
    }
  }
  return true;
}

}  // namespace detail

struct SelfPurifyOptions {
  /// Default: ceil(10 / success_lower_bound) when the certificate is positive, else 10^4.
  std::optional<std::uint64_t> max_tries;
  /// Lipschitz bound used for the certificate; default is the family's
  /// certified bound, then the exact constant when enumerable.
  std::optional<double> delta;
  /// Sample count for the frozen expectation estimate when exact is infeasible.
  std::uint64_t mc_samples = 100'000;
  Limits limits;
};

struct SelfPurifyResult {
  std::optional<PureProfile> profile;  ///< first sample inside every E_{i,h}
  std::uint64_t tries = 0;
  bool verified_equilibrium = false;   ///< profile passed is_pure_eps_equilibrium
  bool chain_holds = false;            ///< the three-inequality chain re-verified numerically
  double regret = 0.0;                 ///< max regret of the returned profile
  double worst_deviation = 0.0;        ///< largest deviation over the tries made
  double best_deviation = 0.0;         ///< smallest per-sample deviation over the tries made
  bool exact_expectations = true;
  std::optional<PurificationCertificate> cert;
};

/// Resolves the Lipschitz bound used for certificates and default retry counts.
inline std::optional<double> certified_delta(const Game& g, const Limits& limits) {
  if (auto b = g.lipschitz_bound()) return b;
  try {
    return lipschitz_constant_exact(g, limits);
  } catch (const BudgetExceeded&) {
    return std::nullopt;
  }
}

/// Samples a ~ mu until one lands in every E_{i,h}. Tries are seeded
/// individually from (seed, try index), so the winner is the lowest passing
/// index whatever the thread count.
inline SelfPurifyResult self_purify(const Game& g, const MixedProfile& mu, double eps, std::uint64_t seed,
                                    const SelfPurifyOptions& options = {}) {
  g.validate(mu);
  require(eps > 0.0, "self_purify: eps must be positive");
  const Limits& limits = options.limits;
  SelfPurifyResult res;

  const std::optional<double> delta = options.delta ? options.delta : certified_delta(g, limits);
  if (delta && *delta > 0.0 && g.players() >= 2)
    res.cert = certificate(eps, *delta, g.players(), g.max_strategies());
  std::uint64_t max_tries = 10'000;
  if (options.max_tries) {
    max_tries = *options.max_tries;
  } else if (res.cert && res.cert->success_lower_bound > 0.0) {
    max_tries = static_cast<std::uint64_t>(std::ceil(10.0 / res.cert->success_lower_bound));
  } else if (delta && *delta == 0.0) {
    max_tries = 1;
  }

  auto [expected, exact] = detail::frozen_expectations(g, mu, seed, options.mc_samples, limits);
  res.exact_expectations = exact;

  const unsigned threads = std::max(1u, limits.threads);
  const std::uint64_t batch = 16ull * threads;
  std::vector<detail::TryOutcome> outcomes;
  res.best_deviation = std::numeric_limits<double>::infinity();
  for (std::uint64_t start = 0; start < max_tries; start += batch) {
    const std::uint64_t count = std::min(batch, max_tries - start);
    outcomes.assign(count, {});
    for_each_chunk(count, threads, threads, [&](unsigned, std::uint64_t b, std::uint64_t e) {
      for (std::uint64_t t = b; t < e; ++t) {
        Rng rng(derive_seed(seed, start + t));
        outcomes[t] = detail::evaluate_sample(g, sample_profile(mu, rng), expected, eps, limits.tol);
      }
    });
    for (std::uint64_t t = 0; t < count; ++t) {
      res.tries = start + t + 1;
      res.worst_deviation = std::max(res.worst_deviation, outcomes[t].deviation);
      res.best_deviation = std::min(res.best_deviation, outcomes[t].deviation);
      if (!outcomes[t].in_events) continue;
      Rng rng(derive_seed(seed, start + t));
      PureProfile a = sample_profile(mu, rng);
      res.regret = max_regret(g, a);
      res.verified_equilibrium = res.regret <= eps + limits.tol;
      res.chain_holds = detail::chain_holds(g, a, expected, eps, limits.tol);
      res.profile = std::move(a);
      return res;
    }
  }
  return res;
}

struct PurificationRate {
  std::uint64_t samples = 0;
  std::uint64_t in_events = 0;    ///< samples inside every E_{i,h}
  std::uint64_t equilibria = 0;   ///< samples that are pure eps-equilibria
  bool exact_expectations = true;

  double event_rate() const { return samples ? static_cast<double>(in_events) / samples : 0.0; }
  double equilibrium_rate() const { return samples ? static_cast<double>(equilibria) / samples : 0.0; }
};

/// Fraction of profiles drawn from mu that pass the E-test and the full
/// eps-equilibrium check.
inline PurificationRate purification_rate(const Game& g, const MixedProfile& mu, double eps, std::uint64_t samples,
                                          std::uint64_t seed, const Limits& limits = {},
                                          std::uint64_t mc_samples = 100'000) {
  g.validate(mu);
  auto [expected, exact] = detail::frozen_expectations(g, mu, seed, mc_samples, limits);
  const unsigned threads = std::max(1u, limits.threads);
  std::vector<PurificationRate> partial(threads);
  for_each_chunk(samples, threads, threads, [&](unsigned c, std::uint64_t b, std::uint64_t e) {
    for (std::uint64_t t = b; t < e; ++t) {
      Rng rng(derive_seed(seed, t));
      const PureProfile a = sample_profile(mu, rng);
      const auto outcome = detail::evaluate_sample(g, a, expected, eps, limits.tol);
      partial[c].in_events += outcome.in_events;
      partial[c].equilibria += is_pure_eps_equilibrium(g, a, eps, limits.tol);
    }
  });
  PurificationRate rate{samples, 0, 0, exact};
  for (const auto& p : partial) {
    rate.in_events += p.in_events;
    rate.equilibria += p.equilibria;
  }
  return rate;
}

struct TailCheck {
  double mean = 0.0;
  double empirical_upper = 0.0;      ///< frequency of F >= mean + r
  double empirical_two_sided = 0.0;  ///< frequency of |F - mean| >= r
  double bound_upper = 0.0;          ///< exp(-r^2 / (2 n delta_f^2))
  double bound_two_sided = 0.0;      ///< twice the one-sided bound
};

/// Empirical tail of a Lipschitz function of independent coordinates next to
/// the concentration bound for its declared Lipschitz constant. When `mean`
/// is absent it is estimated from an independent sample of the same size.
inline TailCheck concentration_tail_check(const std::function<double(std::span<const int>)>& f, double lipschitz,
                                          const MixedProfile& mu, double r, std::uint64_t samples,
                                          std::uint64_t seed, std::optional<double> mean = std::nullopt) {
  require(r > 0.0, "concentration_tail_check: r must be positive");
  require(samples >= 1, "concentration_tail_check: need samples");
  TailCheck out;
  const double n = static_cast<double>(mu.size());
  if (lipschitz > 0.0) {
    out.bound_upper = std::exp(-r * r / (2.0 * n * lipschitz * lipschitz));
  }
  out.bound_two_sided = 2.0 * out.bound_upper;
  if (mean) {
    out.mean = *mean;
  } else {
    Rng rng(derive_seed(seed, 1));
    double acc = 0.0;
    for (std::uint64_t t = 0; t < samples; ++t) acc += f(sample_profile(mu, rng).view());
    out.mean = acc / static_cast<double>(samples);
  }
  Rng rng(derive_seed(seed, 0));
  std::uint64_t upper = 0, both = 0;
  for (std::uint64_t t = 0; t < samples; ++t) {
    const double v = f(sample_profile(mu, rng).view());
    upper += v >= out.mean + r;
    both += std::abs(v - out.mean) >= r;
  }
  out.empirical_upper = static_cast<double>(upper) / static_cast<double>(samples);
  out.empirical_two_sided = static_cast<double>(both) / static_cast<double>(samples);
  return out;
}

}  // namespace lipgame
