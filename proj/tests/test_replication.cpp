#include <gtest/gtest.h>

#include <cmath>

#include "lipgame/analysis.hpp"
#include "lipgame/replication.hpp"
#include "test_oracles.hpp"

using namespace lipgame;

namespace {

// Average of f_i over every choice of one representative per other group.
double tuple_average(const Game& base, int L, int player, std::span<const int> b) {
  const int n = base.players();
  const int i = player / L;
  std::vector<int> reps(static_cast<std::size_t>(n), 0);
  double total = 0.0;
  long tuples = 0;
  while (true) {
    std::vector<int> a(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) a[static_cast<std::size_t>(j)] = j == i ? b[static_cast<std::size_t>(player)] : b[static_cast<std::size_t>(j * L + reps[static_cast<std::size_t>(j)])];
    total += base.payoff(i, a);
    ++tuples;
    int j = 0;
    for (; j < n; ++j) {
      if (j == i) continue;
      if (++reps[static_cast<std::size_t>(j)] < L) break;
      reps[static_cast<std::size_t>(j)] = 0;
    }
    if (j == n) break;
  }
  return total / static_cast<double>(tuples);
}

GamePtr dyadic_game(const std::vector<int>& counts, std::uint64_t seed) {
  Rng rng(seed);
  return ExplicitGame::tabulate(counts, [&](int, std::span<const int>) { return static_cast<double>(rng.below(9)) / 4.0 - 1.0; });
}

}  // namespace

TEST(Replication, SingleCopyIsTheBaseGame) {
  const auto base = dyadic_game({2, 3, 2}, 1);
  const auto rg = replicate(base, 1);
  EXPECT_EQ(rg->players(), 3);
  for (const auto& a : oracle::all_profiles(base->strategy_counts()))
    for (int i = 0; i < 3; ++i) EXPECT_EQ(rg->payoff(i, a), base->payoff(i, a));
}

TEST(Replication, ConstantBase) {
  const auto rg = replicate(classic::constant({2, 3}, 0.5), 3);
  EXPECT_EQ(rg->strategy_counts(), std::vector<int>({2, 2, 2, 3, 3, 3}));
  for (const auto& a : oracle::all_profiles(rg->strategy_counts()))
    for (int t = 0; t < 6; ++t) EXPECT_EQ(rg->payoff(t, a), 0.5);
  EXPECT_EQ(lipschitz_constant_exact(*rg), 0.0);
}

TEST(Replication, MatchesTupleAveragingOracle) {
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    for (int L = 1; L <= 3; ++L) {
      const auto base = dyadic_game({2, 3}, seed);
      const auto rg = replicate(base, L);
      for (const auto& b : oracle::all_profiles(rg->strategy_counts())) {
        const auto all = rg->all_deviation_payoffs(b);
        for (int t = 0; t < rg->players(); ++t) {
          const double want = tuple_average(*base, L, t, b);
          if (L <= 2) {
            EXPECT_EQ(rg->payoff(t, b), want);
          } else {
            EXPECT_NEAR(rg->payoff(t, b), want, 1e-15);
          }
          auto c = b;
          for (int d = 0; d < rg->strategies(t); ++d) {
            c[static_cast<std::size_t>(t)] = d;
            EXPECT_NEAR(all.row(static_cast<std::size_t>(t))[static_cast<std::size_t>(d)], tuple_average(*base, L, t, c), 1e-15);
          }
        }
      }
    }
  const auto three = dyadic_game({2, 2, 2}, 4);
  const auto rg = replicate(three, 2);
  for (const auto& b : oracle::all_profiles(rg->strategy_counts()))
    for (int t = 0; t < 6; ++t) EXPECT_EQ(rg->payoff(t, b), tuple_average(*three, 2, t, b));
}

TEST(Replication, LipschitzShrinksByL) {
  for (int L = 1; L <= 3; ++L) {
    const auto c = replication_lipschitz_check(classic::matching_pennies(), L);
    EXPECT_TRUE(c.holds);
    EXPECT_EQ(c.base_delta, 2.0);
    EXPECT_NEAR(c.replica_delta, 2.0 / L, 1e-15);
    const auto r = replication_lipschitz_check(dyadic_game({2, 2, 2}, 7), L);
    EXPECT_TRUE(r.holds);
    EXPECT_LE(r.replica_delta * L, r.base_delta + 1e-12);
    EXPECT_EQ(*replicate(dyadic_game({2, 2}, 1), L)->lipschitz_bound() * L, lipschitz_constant_exact(*dyadic_game({2, 2}, 1)));
  }
}

TEST(Replication, ExpectationUsesGroupAverages) {
  const auto base = dyadic_game({2, 3}, 5);
  const auto rg = replicate(base, 2);
  const MixedProfile mu({{0.3, 0.7}, {0.9, 0.1}, {0.2, 0.5, 0.3}, {0.6, 0.0, 0.4}});
  const MixedProfile avg({{0.6, 0.4}, {0.4, 0.25, 0.35}});
  for (int t = 0; t < 4; ++t)
    for (int s = 0; s < rg->strategies(t); ++s) {
      const double direct = detail::enumerate_expectation(*rg, t, s, mu, {});
      EXPECT_NEAR(*rg->closed_form_expectation(t, s, mu), direct, 1e-15);
    }
  const auto lifted = lift(*rg, avg);
  for (int t = 0; t < 4; ++t)
    for (int s = 0; s < rg->strategies(t); ++s)
      EXPECT_NEAR(expected_payoff(*rg, t, s, lifted).value, expected_payoff(*base, t / 2, s, avg).value, 1e-15);
}

TEST(Replication, ProjectAndLift) {
  const auto rg = replicate(classic::matching_pennies(), 4);
  const auto mu = project(*rg, PureProfile{0, 0, 1, 0, 1, 1, 1, 1});
  EXPECT_EQ(mu[0], std::vector<double>({0.75, 0.25}));
  EXPECT_EQ(mu[1], std::vector<double>({0.0, 1.0}));
  const auto lifted = lift(*rg, mu);
  EXPECT_EQ(lifted.size(), 8u);
  for (int t = 0; t < 4; ++t) EXPECT_EQ(lifted[static_cast<std::size_t>(t)], mu[0]);
  EXPECT_THROW(project(*rg, PureProfile{0, 0}), InvalidInput);
}

TEST(Replication, SearchOnCoordination) {
  const auto r = nash_via_replication(classic::coordination(), 0.1, 2, ReplicationMethod::search, 1);
  EXPECT_TRUE(r.within_eps);
  EXPECT_LE(r.mixed_regret, 0.1);
  EXPECT_EQ(r.L, 2);
  EXPECT_THROW(nash_via_replication(classic::matching_pennies(), 0.1, 1, ReplicationMethod::search, 1), NotFound);
}

TEST(Replication, PureNashBaseSelfPurifies) {
  const auto base = classic::coordination();
  const auto mu0 = MixedProfile::degenerate(PureProfile{0, 0}, base->strategy_counts());
  const auto r = nash_via_replication(base, 0.05, 5, ReplicationMethod::self_purify, 3, mu0);
  EXPECT_EQ(r.tries, 1u);
  EXPECT_EQ(r.mu.distributions(), mu0.distributions());
  EXPECT_EQ(r.mixed_regret, 0.0);
}

TEST(Replication, MatchingPenniesLargeReplica) {
  const auto r = nash_via_replication(classic::matching_pennies(), 0.3, 4000, ReplicationMethod::self_purify, 11);
  EXPECT_TRUE(r.within_eps);
  EXPECT_LE(r.mixed_regret, 0.3);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(r.mu[i][0], 0.5, 0.1);
  ASSERT_TRUE(r.delta_replica);
  EXPECT_EQ(*r.delta_replica, 2.0 / 4000);
}
