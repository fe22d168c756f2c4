#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "anonymous.hpp"
#include "counterexamples.hpp"
#include "io.hpp"
#include "polymatrix.hpp"
#include "purification.hpp"
#include "replication.hpp"

namespace lipgame {

// Named experiment presets. Each returns
// {"criteria": [{"name", "pass", "detail"}...], "pass": all passed}
// and accepts overrides for its parameters as a JSON object.

namespace detail {

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <typename T>
T param(const json& p, const char* key, T fallback) {
  if (!p.contains(key)) return fallback;
  try {
    return p.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("experiment parameter '") + key + "': " + e.what());
  }
}

inline json criterion(const std::string& name, bool pass, json detail) {
  return {{"name", name}, {"pass", pass}, {"detail", std::move(detail)}};
}

inline json summarize(json criteria) {
  bool all = true;
  for (const auto& c : criteria) all = all && c.at("pass").get<bool>();
  return {{"criteria", std::move(criteria)}, {"pass", all}};
}

}  // namespace detail

/// Two-step best response on random polymatrix games at delta = eps / 2n.
inline json experiment_prop1(const json& p, const Limits& limits) {
  const int games = detail::param(p, "games", 100), n = detail::param(p, "n", 6), m = detail::param(p, "m", 3);
  const double eps = detail::param(p, "eps", 0.3);
  const auto seed = detail::param<std::uint64_t>(p, "seed", 1);
  const double max_seconds = detail::param(p, "max_seconds", 5.0);
  const double delta = delta_trivial(eps, n);
  detail::Stopwatch clock;
  int passed = 0;
  double worst = 0.0;
  for (int t = 0; t < games; ++t) {
    const auto g = polymatrix_random(n, m, delta, derive_seed(seed, static_cast<std::uint64_t>(t)));
    const PureProfile a = two_step_construction(*g, PureProfile(static_cast<std::size_t>(n), 0));
    worst = std::max(worst, max_regret(*g, a));
    passed += is_pure_eps_equilibrium(*g, a, eps, limits.tol);
  }
  const double secs = clock.seconds();
  return detail::summarize(json::array(
      {detail::criterion("two_step_construction is a pure eps-equilibrium", passed == games,
                         {{"games", games}, {"passed", passed}, {"delta", delta}, {"worst_regret", worst}}),
       detail::criterion("runtime", secs < max_seconds, {{"runtime_seconds", secs}, {"limit", max_seconds}})}));
}

/// Exhaustive pure search at delta_main, then the self-purification rate
/// against an exact mixed equilibrium of every game.
inline json experiment_thm2(const json& p, const Limits& limits) {
  const int games = detail::param(p, "games", 100), n = detail::param(p, "n", 12);
  const double eps = detail::param(p, "eps", 0.3);
  const auto seed = detail::param<std::uint64_t>(p, "seed", 1);
  const auto samples = detail::param<std::uint64_t>(p, "samples", 10'000);
  const double max_seconds = detail::param(p, "max_seconds", 120.0);
  const int m = 2;
  const double delta = delta_main(eps, m, n);
  const PurificationCertificate cert = certificate(eps, delta, n, m);
  const double b = cert.success_lower_bound;
  const double sigma = std::sqrt(b * (1.0 - b) / static_cast<double>(samples));

  detail::Stopwatch clock;
  int found = 0, rate_ok = 0, solved = 0;
  double min_rate = 1.0;
  for (int t = 0; t < games; ++t) {
    const auto g = polymatrix_random(n, m, delta, derive_seed(seed, static_cast<std::uint64_t>(t)));
    found += exhaustive_pure_search(*g, eps, limits).first.has_value();
    const auto mu = binary_polymatrix_equilibrium(*g);
    if (!mu) continue;
    ++solved;
    const auto rate = purification_rate(*g, *mu, eps, samples, derive_seed(seed, 1000 + static_cast<std::uint64_t>(t)), limits);
    min_rate = std::min(min_rate, rate.equilibrium_rate());
    rate_ok += rate.equilibrium_rate() >= b - 3.0 * sigma;
  }
  const double secs = clock.seconds();
  return detail::summarize(json::array(
      {detail::criterion("exhaustive search finds a pure eps-equilibrium", found == games,
                         {{"games", games}, {"found", found}, {"delta", delta}}),
       detail::criterion("runtime", secs < max_seconds, {{"runtime_seconds", secs}, {"limit", max_seconds}}),
       detail::criterion("self-purification rate >= certificate - 3 sigma", solved == games && rate_ok == games,
                         {{"games", games},
                          {"equilibria_solved", solved},
                          {"rate_ok", rate_ok},
                          {"min_rate", min_rate},
                          {"success_lower_bound", b},
                          {"sigma", sigma}})}));
}

/// Gale-Berlekamp: discrepancy matrix search, no pure 1/3-equilibrium,
/// the zero-sum identity, the Lipschitz bound and payoff range.
inline json experiment_thm3(const json& p, const Limits& limits) {
  const int k_find = detail::param(p, "k_find", 15), k_game = detail::param(p, "k_game", 7);
  const int k_small = detail::param(p, "k_small", 3);
  const auto seed = detail::param<std::uint64_t>(p, "seed", 1);
  const int profiles = detail::param(p, "profiles", 1000);
  const double max_seconds = detail::param(p, "max_seconds", 60.0);
  json criteria = json::array();

  detail::Stopwatch clock;
  const auto big = find_gb_matrix(k_find, seed, 100, limits);
  const bool big_ok = verify_discrepancy(big.matrix, DiscrepancyMode::exhaustive(), limits).holds;
  const double secs = clock.seconds();
  criteria.push_back(detail::criterion("find_gb_matrix with exhaustive verification", big_ok && secs < max_seconds,
                                       {{"k", k_find}, {"attempts", big.attempts}, {"runtime_seconds", secs}}));

  const auto small = find_gb_matrix(k_game, seed, 100, limits);
  const auto disc = verify_discrepancy(small.matrix, DiscrepancyMode::exhaustive(), limits);
  const auto g = build_gb_game(small.matrix);
  const auto search = exhaustive_pure_search(*g, 1.0 / 3.0, limits);
  criteria.push_back(detail::criterion("no pure 1/3-equilibrium", disc.holds && search.count == 0,
                                       {{"k", k_game}, {"discrepancy", disc.holds}, {"count", search.count}}));

  Rng rng(derive_seed(seed, 77));
  bool identity = true, in_range = true;
  for (int t = 0; t < profiles; ++t) {
    std::vector<int> a(static_cast<std::size_t>(g->players()));
    for (int& v : a) v = static_cast<int>(rng.below(2));
    long female = 0, male = 0;
    for (int i = 0; i < g->k(); ++i) female += g->untruncated_units(i, a);
    for (int j = 0; j < g->k(); ++j) male += g->untruncated_units(g->k() + j, a);
    identity = identity && female == -male;
    for (int i = 0; i < g->players(); ++i) {
      const double v = g->payoff(i, a);
      in_range = in_range && v >= -1.0 && v <= 1.0;
    }
  }
  criteria.push_back(detail::criterion("sum of female payoffs = -sum of male payoffs", identity, {{"profiles", profiles}}));

  const auto tiny = build_gb_game(find_gb_matrix(k_small, seed, 100, limits).matrix);
  const double lip = lipschitz_constant_exact(*tiny, limits);
  criteria.push_back(detail::criterion("Lipschitz constant <= 2 delta", lip <= 2.0 * tiny->delta() + 1e-12,
                                       {{"k", k_small}, {"lipschitz", lip}, {"two_delta", 2.0 * tiny->delta()}}));
  criteria.push_back(detail::criterion("payoffs within [-1, 1]", in_range, {{"profiles", profiles}}));
  return detail::summarize(std::move(criteria));
}

/// Mass matching pennies at k = 2 and 3.
inline json experiment_prop3(const json& p, const Limits& limits) {
  const auto ks = detail::param<std::vector<int>>(p, "k", {2, 3});
  const double max_seconds = detail::param(p, "max_seconds", 60.0);
  Limits wide = limits;
  wide.budget = std::max<std::uint64_t>(limits.budget, detail::param<std::uint64_t>(p, "budget", 100'000'000));
  json criteria = json::array();
  for (int k : ks) {
    detail::Stopwatch clock;
    const auto g = build_mass_mp_game(k);
    const double lip = lipschitz_constant_exact(*g, wide);
    const double expected = 1.0 / (2.0 * k);
    const auto search = exhaustive_pure_search(*g, 1.0 / 8.0, wide);
    bool quarter = true;
    ProfileOdometer odo(g->strategy_counts());
    std::vector<double> dev(static_cast<std::size_t>(g->max_strategies()));
    do {
      for (int i = 0; i < g->players() && quarter; ++i) {
        g->deviation_payoffs(i, odo.current(), dev);
        quarter = *std::max_element(dev.begin(), dev.end()) == 0.25;
      }
    } while (quarter && odo.next());
    const double secs = clock.seconds();
    const std::string tag = " (k=" + std::to_string(k) + ")";
    criteria.push_back(detail::criterion("Lipschitz constant = 1/n" + tag,
                                         k == 2 ? lip == expected : std::abs(lip - expected) <= 1e-15,
                                         {{"lipschitz", lip}, {"expected", expected}}));
    criteria.push_back(detail::criterion("no pure 1/8-equilibrium" + tag, search.count == 0,
                                         {{"profiles", g->profile_count()}, {"count", search.count}}));
    criteria.push_back(detail::criterion("best-response value is 1/4 everywhere" + tag, quarter, json::object()));
    criteria.push_back(detail::criterion("runtime" + tag, secs < max_seconds, {{"runtime_seconds", secs}}));
  }
  return detail::summarize(std::move(criteria));
}

/// Auxiliary-game solve plus Shapley-Folkman rounding on random anonymous games.
inline json experiment_thm4(const json& p, const Limits& limits) {
  const int games = detail::param(p, "games", 50), n = detail::param(p, "n", 20), m = detail::param(p, "m", 3);
  const double delta = detail::param(p, "delta", 0.05), tol = detail::param(p, "tol", 1e-6);
  const auto seed = detail::param<std::uint64_t>(p, "seed", 1);
  (void)limits;
  int converged = 0, regret_ok = 0, gap_ok = 0, opp_ok = 0, chain_ok = 0;
  double worst_regret = 0.0, worst_gap = 0.0, worst_opp = 0.0;
  for (int t = 0; t < games; ++t) {
    const auto g = random_anonymous(n, m, delta, derive_seed(seed, static_cast<std::uint64_t>(t)));
    const auto r = anonymous_purify(*g, tol, derive_seed(seed, 500 + static_cast<std::uint64_t>(t)));
    gap_ok += r.rounding.l1_gap <= 2.0 * (m - 1) + 1e-9;
    opp_ok += r.rounding.max_opponent_gap <= 2.0 * m + 1e-9;
    worst_gap = std::max(worst_gap, r.rounding.l1_gap);
    worst_opp = std::max(worst_opp, r.rounding.max_opponent_gap);
    if (!r.auxiliary.converged) continue;
    ++converged;
    regret_ok += r.max_regret <= 2.0 * m * delta + limits.tol;
    chain_ok += r.chain_holds;
    worst_regret = std::max(worst_regret, r.max_regret);
  }
  const int failures = games - converged;
  return detail::summarize(json::array(
      {detail::criterion("max regret <= 2 m delta when the solver converges", regret_ok == converged,
                         {{"converged", converged}, {"worst_regret", worst_regret}, {"bound", 2.0 * m * delta}, {"chain_holds", chain_ok}}),
       detail::criterion("solver failures < 10%", 10 * failures < games, {{"failures", failures}, {"games", games}}),
       detail::criterion("Shapley-Folkman L1 gap <= 2(m-1)", gap_ok == games, {{"worst_gap", worst_gap}, {"bound", 2.0 * (m - 1)}}),
       detail::criterion("per-opponent aggregate gap <= 2m", opp_ok == games, {{"worst_gap", worst_opp}, {"bound", 2.0 * m}})}));
}

/// Restaurant example: home payoff, the uniform equilibrium, and how often a
/// sampled profile is a 1/4-equilibrium as n grows.
inline json experiment_restaurant(const json& p, const Limits& limits) {
  const int n_home = detail::param(p, "n", 500);
  const double delta = detail::param(p, "delta", 0.1), eps = detail::param(p, "eps", 0.25);
  const auto ns = detail::param<std::vector<int>>(p, "sizes", {50, 200, 800});
  const auto samples = detail::param<std::uint64_t>(p, "samples", 10'000);
  const auto seed = detail::param<std::uint64_t>(p, "seed", 1);
  json criteria = json::array();
  const double home = restaurant_home_payoff(n_home, delta);
  criteria.push_back(detail::criterion("home payoff in [0.4, 0.6]", home >= 0.4 && home <= 0.6, {{"n", n_home}, {"home", home}}));
  const auto g = build_restaurant_game(n_home, delta);
  const double reg = mixed_regret(*g, MixedProfile::uniform(g->strategy_counts()));
  criteria.push_back(detail::criterion("uniform profile has mixed regret 0", reg == 0.0, {{"mixed_regret", reg}}));

  json table = json::array();
  bool monotone = true;
  std::optional<FailureRate> prev;
  for (std::size_t t = 0; t < ns.size(); ++t) {
    const auto r = purification_failure_experiment(ns[t], delta, eps, samples, derive_seed(seed, t), limits);
    table.push_back({{"n", r.n}, {"probability", r.probability}, {"std_error", r.std_error}});
    if (prev) monotone = monotone && r.probability <= prev->probability + 3.0 * std::hypot(r.std_error, prev->std_error);
    prev = r;
  }
  criteria.push_back(detail::criterion("success probability nonincreasing in n", monotone, {{"table", table}}));
  criteria.push_back(detail::criterion("success probability < 0.1 at the largest n", prev && prev->probability < 0.1,
                                       {{"n", prev ? prev->n : 0}, {"probability", prev ? prev->probability : 1.0}}));
  return detail::summarize(std::move(criteria));
}

/// Matching pennies through a large replica, plus the exact Lipschitz
/// scaling on small replicas.
inline json experiment_replication(const json& p, const Limits& limits) {
  const int seeds = detail::param(p, "seeds", 20), L = detail::param(p, "L", 8000), need = detail::param(p, "need", 18);
  const double eps = detail::param(p, "eps", 0.3), radius = detail::param(p, "radius", 0.1);
  const auto seed = detail::param<std::uint64_t>(p, "seed", 1);
  const GamePtr base = classic::matching_pennies();
  SelfPurifyOptions options;
  options.limits = limits;
  int ok = 0;
  double worst_regret = 0.0, worst_dist = 0.0;
  for (int t = 0; t < seeds; ++t) {
    try {
      const auto r = nash_via_replication(base, eps, L, ReplicationMethod::self_purify, derive_seed(seed, static_cast<std::uint64_t>(t)),
                                          std::nullopt, options);
      double dist = 0.0;
      for (std::size_t i = 0; i < r.mu.size(); ++i)
        for (double v : r.mu[i]) dist = std::max(dist, std::abs(v - 0.5));
      worst_regret = std::max(worst_regret, r.mixed_regret);
      worst_dist = std::max(worst_dist, dist);
      ok += r.within_eps && dist <= radius;
    } catch (const NotFound&) {
    }
  }
  json criteria = json::array();
  criteria.push_back(detail::criterion("self-purified replica projects to a mixed eps-equilibrium", ok >= need,
                                       {{"succeeded", ok}, {"seeds", seeds}, {"worst_regret", worst_regret}, {"worst_distance", worst_dist}}));
  bool scaling = true;
  json checks = json::array();
  Rng rng(derive_seed(seed, 99));
  const GamePtr random_base = ExplicitGame::tabulate({2, 2}, [&](int, std::span<const int>) { return rng.uniform(-1.0, 1.0); });
  for (const auto& [name, g] : {std::pair{std::string("matching_pennies"), base}, std::pair{std::string("random_2x2"), random_base}})
    for (int l = 1; l <= 3; ++l) {
      const auto c = replication_lipschitz_check(g, l, limits);
      scaling = scaling && c.replica_delta * l <= c.base_delta + 1e-12;
      checks.push_back({{"base", name}, {"L", l}, {"base_delta", c.base_delta}, {"replica_delta", c.replica_delta}});
    }
  criteria.push_back(detail::criterion("delta(G') * L <= delta(G)", scaling, {{"checks", checks}}));
  return detail::summarize(std::move(criteria));
}

inline const std::map<std::string, std::function<json(const json&, const Limits&)>>& experiment_presets() {
  static const std::map<std::string, std::function<json(const json&, const Limits&)>> presets{
      {"prop1", experiment_prop1},     {"thm2-sweep", experiment_thm2},   {"thm3", experiment_thm3},
      {"prop3", experiment_prop3},     {"thm4", experiment_thm4},         {"restaurant", experiment_restaurant},
      {"replication", experiment_replication}};
  return presets;
}

inline json run_experiment(const std::string& name, const json& overrides = json::object(), const Limits& limits = {}) {
  const auto& presets = experiment_presets();
  const auto it = presets.find(name);
  if (it == presets.end()) throw InvalidInput("unknown experiment '" + name + "'");
  return it->second(overrides, limits);
}

}  // namespace lipgame
