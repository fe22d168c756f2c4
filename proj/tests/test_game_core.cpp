#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "lipgame/analysis.hpp"
#include "lipgame/counterexamples.hpp"
#include "lipgame/polymatrix.hpp"
#include "test_oracles.hpp"

using namespace lipgame;

namespace {

// f_i(a) = h_i(a_i) + c_i(a_{-i}) with a wide-range c_i.
std::shared_ptr<ExplicitGame> separable_game() {
  return ExplicitGame::tabulate({2, 3, 2}, [](int i, std::span<const int> a) {
    double c = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
      if (static_cast<int>(j) != i) c += 7.0 * (a[j] + 1) * (static_cast<double>(j) + 2.0);
    return 0.25 * a[static_cast<std::size_t>(i)] * (i + 1) + c;
  });
}

}  // namespace

TEST(Hamming, Examples) {
  EXPECT_EQ(hamming(PureProfile{0, 1, 1}, PureProfile{0, 1, 1}), 0);
  EXPECT_EQ(hamming(PureProfile{0, 0, 0}, PureProfile{0, 1, 0}), 1);
  EXPECT_EQ(hamming(PureProfile{0, 0}, PureProfile{1, 1}), 2);
  EXPECT_THROW(hamming(PureProfile{0, 0}, PureProfile{0, 0, 0}), InvalidInput);
}

TEST(Profiles, MixedValidation) {
  EXPECT_THROW(MixedProfile({{0.5, 0.4}}), InvalidInput);
  EXPECT_THROW(MixedProfile({{1.5, -0.5}}), InvalidInput);
  EXPECT_NO_THROW(MixedProfile({{0.25, 0.75}, {1.0}}));
  const auto g = classic::matching_pennies();
  EXPECT_THROW(g->validate(MixedProfile({{1.0}, {0.5, 0.5}})), InvalidInput);
  EXPECT_THROW(g->validate(std::vector<int>{0, 2}), InvalidInput);
}

TEST(Profiles, IndexRoundTrip) {
  const std::vector<int> counts{3, 2, 4};
  ProfileOdometer odo(counts);
  std::uint64_t idx = 0;
  do {
    EXPECT_EQ(profile_index(counts, odo.current()), idx);
    EXPECT_EQ(profile_at(counts, idx), std::vector<int>(odo.current().begin(), odo.current().end()));
    ++idx;
  } while (odo.next());
  EXPECT_EQ(idx, 24u);
}

TEST(ExplicitGame, BudgetRefusal) {
  EXPECT_THROW(ExplicitGame::tabulate({10, 10, 10}, [](int, std::span<const int>) { return 0.0; }, 100),
               BudgetExceeded);
}

TEST(Lipschitz, Examples) {
  EXPECT_EQ(lipschitz_constant_exact(*classic::constant({2, 3, 2})), 0.0);
  EXPECT_EQ(lipschitz_constant_exact(*classic::matching_pennies()), 2.0);
  EXPECT_EQ(lipschitz_constant_exact(*build_mass_mp_game(2)), 0.25);
}

TEST(Lipschitz, MatchesBruteForceOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto g = ExplicitGame::tabulate({2, 3, 2, 2}, [&](int, std::span<const int>) { return rng.uniform(-1, 1); });
    EXPECT_EQ(lipschitz_constant_exact(*g), oracle::lipschitz(*g)) << "seed " << seed;
    EXPECT_EQ(eta_constant_exact(*g), oracle::eta(*g)) << "seed " << seed;
  }
}

TEST(Lipschitz, BudgetRefusal) {
  const auto g = polymatrix_random(12, 2, 0.1, 1);
  Limits tiny;
  tiny.budget = 1000;
  EXPECT_THROW(lipschitz_constant_exact(*g, tiny), BudgetExceeded);
}

TEST(Lipschitz, EstimateIsLowerBound) {
  EXPECT_EQ(lipschitz_constant_estimate(*classic::constant({2, 2}), 100, 1), 0.0);
  const auto g = polymatrix_random(5, 3, 0.2, 4);
  EXPECT_LE(lipschitz_constant_estimate(*g, 2000, 9), lipschitz_constant_exact(*g));
  const auto gb = build_gb_game(find_gb_matrix(9, 1).matrix, 0.05);
  EXPECT_LE(lipschitz_constant_estimate(*gb, 100'000, 3), 2 * gb->delta() + 1e-12);
}

TEST(Eta, SeparableGame) {
  const auto g = separable_game();
  EXPECT_EQ(eta_constant_exact(*g), 0.0);
  EXPECT_GT(lipschitz_constant_exact(*g), 0.0);
  const auto reduced = eta_reduction(*g, std::vector<int>{0, 0, 0});
  EXPECT_EQ(lipschitz_constant_exact(*reduced), 0.0);
}

TEST(Eta, AtMostTwiceDelta) {
  EXPECT_EQ(eta_constant_exact(*classic::constant({3, 3})), 0.0);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto g = polymatrix_random(5, 2, 0.1, seed);
    EXPECT_LE(eta_constant_exact(*g), 2 * lipschitz_constant_exact(*g) + 1e-15);
  }
}

TEST(Eta, ReductionPreservesDeviationGains) {
  Rng rng(11);
  const auto g = ExplicitGame::tabulate({2, 3, 3}, [&](int, std::span<const int>) { return rng.uniform(-1, 1); });
  const std::vector<int> anchors{1, 2, 0};
  const auto r = eta_reduction(*g, anchors);
  EXPECT_LE(lipschitz_constant_exact(*r), eta_constant_exact(*g) + 1e-15);
  ProfileOdometer odo(g->strategy_counts());
  do {
    std::vector<int> a(odo.current().begin(), odo.current().end());
    for (int i = 0; i < 3; ++i) {
      EXPECT_NEAR(regret(*g, i, a), regret(*r, i, a), 1e-12);
      std::vector<int> b = a;
      for (int d = 0; d < g->strategies(i); ++d) {
        b[static_cast<std::size_t>(i)] = d;
        EXPECT_NEAR(g->payoff(i, b) - g->payoff(i, a), r->payoff(i, b) - r->payoff(i, a), 1e-12);
      }
    }
  } while (odo.next());
  const auto zero = eta_reduction(*classic::constant({2, 2}, 3.0), std::vector<int>{0, 0});
  EXPECT_EQ(lipschitz_constant_exact(*zero), 0.0);
  EXPECT_EQ(zero->payoff(0, std::vector<int>{1, 1}), 0.0);
  EXPECT_THROW(eta_reduction(*g, std::vector<int>{0, 5, 0}), InvalidInput);
}

TEST(Regret, Examples) {
  const auto mp = classic::matching_pennies();
  ProfileOdometer odo(mp->strategy_counts());
  do {
    const std::vector<int> a(odo.current().begin(), odo.current().end());
    double worst = 0.0;
    for (int i = 0; i < 2; ++i) {
      EXPECT_GE(regret(*mp, i, a), 0.0);
      worst = std::max(worst, regret(*mp, i, a));
      EXPECT_EQ(regret(*mp, i, a), mp->payoff(i, a) < 0 ? 2.0 : 0.0);
    }
    EXPECT_EQ(worst, 2.0);
    EXPECT_FALSE(is_pure_eps_equilibrium(*mp, a, 1.0));
  } while (odo.next());

  const auto mmp = build_mass_mp_game(2);
  EXPECT_GT(max_regret(*mmp, PureProfile(4, 0)), 1.0 / 8);

  const auto coord = classic::coordination();
  EXPECT_TRUE(is_pure_eps_equilibrium(*coord, PureProfile{1, 1}, 0.0));
  EXPECT_TRUE(is_pure_eps_equilibrium(*classic::constant({2, 3}), PureProfile{1, 2}, 0.0));
}

TEST(Regret, EquilibriumMonotoneInEps) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = polymatrix_random(4, 3, 0.5, seed);
    ProfileOdometer odo(g->strategy_counts());
    do {
      if (!is_pure_eps_equilibrium(*g, odo.current(), 0.0)) continue;
      for (double e : {0.0, 0.01, 0.3, 2.0}) EXPECT_TRUE(is_pure_eps_equilibrium(*g, odo.current(), e));
    } while (odo.next());
  }
}

TEST(BestResponse, Examples) {
  EXPECT_EQ(best_response(*classic::constant({3, 3}), 0, PureProfile{2, 1}), 0);
  EXPECT_EQ(best_response(*classic::matching_pennies(), 0, PureProfile{1, 0}), 0);
  const auto g = build_mass_mp_game(2);
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    std::vector<int> a(4);
    for (int& v : a) v = static_cast<int>(rng.below(4));
    for (int i = 0; i < 2; ++i) {
      const int br = best_response(*g, i, a);
      for (int j = 0; j < 2; ++j) EXPECT_EQ(sign_bit(br, j), sign_bit(a[static_cast<std::size_t>(2 + j)], i));
      std::vector<int> b = a;
      b[static_cast<std::size_t>(i)] = br;
      EXPECT_EQ(g->payoff(i, b), 0.25);
    }
  }
}

TEST(ExpectedPayoff, Examples) {
  const auto c = classic::constant({2, 3}, 1.5);
  EXPECT_EQ(expected_payoff(*c, 0, 1, MixedProfile::uniform(c->strategy_counts())).value, 1.5);
  const auto mp = classic::matching_pennies();
  const auto u = MixedProfile::uniform(mp->strategy_counts());
  EXPECT_EQ(expected_payoff(*mp, 0, 0, u).value, 0.0);
  EXPECT_EQ(expected_payoff(*mp, 1, 1, u).value, 0.0);
  for (int k = 1; k <= 4; ++k) {
    const auto gb = build_gb_game(SignMatrix::random(k, *std::make_unique<Rng>(k)), 0.3);
    const auto mu = MixedProfile::uniform(gb->strategy_counts());
    for (int i = 0; i < gb->players(); ++i)
      for (int s = 0; s < 2; ++s) {
        EXPECT_NEAR(expected_payoff(*gb, i, s, mu).value, 0.0, 1e-15);
        EXPECT_NEAR(detail::enumerate_expectation(*gb, i, s, mu, {}), 0.0, 1e-15);
      }
  }
}

TEST(ExpectedPayoff, ClosedFormsMatchEnumeration) {
  Rng rng(3);
  auto random_mu = [&](const Game& g) {
    std::vector<std::vector<double>> d;
    for (int m : g.strategy_counts()) {
      std::vector<double> p(static_cast<std::size_t>(m));
      double s = 0.0;
      for (double& v : p) s += (v = rng.uniform01() + 0.01);
      for (double& v : p) v /= s;
      d.push_back(std::move(p));
    }
    return MixedProfile(std::move(d));
  };
  std::vector<GamePtr> games{polymatrix_random(4, 3, 0.4, 2), build_gb_game(SignMatrix::random(3, rng), 0.4),
                             build_mass_mp_game(2)};
  for (const auto& g : games) {
    const auto mu = random_mu(*g);
    for (int i = 0; i < g->players(); ++i)
      for (int s = 0; s < g->strategies(i); ++s)
        EXPECT_NEAR(*g->closed_form_expectation(i, s, mu), detail::enumerate_expectation(*g, i, s, mu, {}), 1e-12)
            << kind_name(g->kind());
  }
}

TEST(ExpectedPayoff, MonteCarloConvergesForMatchingPennies) {
  const auto mp = classic::matching_pennies();
  const auto u = MixedProfile::uniform(mp->strategy_counts());
  const std::uint64_t samples = 4000;
  int within = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto e = expected_payoff(*mp, 0, 0, u, ExpectationMode::monte_carlo(samples, seed));
    within += std::abs(e.value) <= 4.0 / std::sqrt(static_cast<double>(samples));
    EXPECT_GT(e.std_error, 0.0);
  }
  EXPECT_GE(within, 95);
}

TEST(ExpectedPayoff, ExactBudget) {
  const auto g = build_gb_game(SignMatrix::random(12, *std::make_unique<Rng>(1)), 0.1);
  Limits tiny;
  tiny.budget = 100;
  EXPECT_THROW(detail::enumerate_expectation(*g, 0, 0, MixedProfile::uniform(g->strategy_counts()), tiny), BudgetExceeded);
}

TEST(MixedRegret, Examples) {
  const auto mp = classic::matching_pennies();
  EXPECT_EQ(mixed_regret(*mp, MixedProfile::uniform(mp->strategy_counts())), 0.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = polymatrix_random(4, 3, 0.5, seed);
    ProfileOdometer odo(g->strategy_counts());
    for (int t = 0; t < 7; ++t) odo.next();
    const PureProfile a(std::vector<int>(odo.current().begin(), odo.current().end()));
    EXPECT_NEAR(mixed_regret(*g, MixedProfile::degenerate(a, g->strategy_counts())), max_regret(*g, a), 1e-12);
  }
}

TEST(Search, Examples) {
  const auto c = classic::constant({2, 3, 2});
  const auto r = exhaustive_pure_search(*c, 0.0);
  ASSERT_TRUE(r.first);
  EXPECT_EQ(*r.first, PureProfile({0, 0, 0}));
  EXPECT_EQ(r.count, 12u);
  EXPECT_EQ(exhaustive_pure_search(*build_mass_mp_game(2), 1.0 / 8).count, 0u);
  EXPECT_FALSE(exhaustive_pure_search(*classic::matching_pennies(), 1.0).first);
}

TEST(Search, AgreesWithRegretAndBruteForce) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = polymatrix_random(5, 2, 0.6, seed);
    const double eps = 0.05;
    const auto r = exhaustive_pure_search(*g, eps);
    std::uint64_t count = 0;
    std::optional<PureProfile> first;
    ProfileOdometer odo(g->strategy_counts());
    do {
      if (oracle::max_regret(*g, odo.current()) <= eps + 1e-9) {
        ++count;
        if (!first) first = PureProfile(std::vector<int>(odo.current().begin(), odo.current().end()));
      }
    } while (odo.next());
    EXPECT_EQ(r.count, count);
    EXPECT_EQ(r.first.has_value(), r.count > 0);
    if (r.first) {
      EXPECT_EQ(*r.first, *first);
      EXPECT_TRUE(is_pure_eps_equilibrium(*g, *r.first, eps));
    }
  }
}

TEST(Search, ThreadCountDoesNotChangeResults) {
  const auto g = polymatrix_random(10, 2, 0.05, 8);
  Limits one, four;
  four.threads = 4;
  const auto a = exhaustive_pure_search(*g, 0.02, one);
  const auto b = exhaustive_pure_search(*g, 0.02, four);
  EXPECT_EQ(a.count, b.count);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(lipschitz_constant_exact(*g, one), lipschitz_constant_exact(*g, four));
  EXPECT_EQ(eta_constant_exact(*g, one), eta_constant_exact(*g, four));
}

TEST(Dynamics, Examples) {
  const auto coord = classic::coordination();
  const auto at_nash = best_response_dynamics(*coord, PureProfile{1, 1}, 10, 1);
  EXPECT_EQ(at_nash.status, DynamicsStatus::converged);
  EXPECT_EQ(at_nash.profile, PureProfile({1, 1}));
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const auto r = best_response_dynamics(*coord, PureProfile{a, b}, 10, 7);
      EXPECT_EQ(r.status, DynamicsStatus::converged);
      EXPECT_LE(r.rounds, 2);
      EXPECT_TRUE(is_pure_eps_equilibrium(*coord, r.profile, 0.0));
    }
  EXPECT_EQ(best_response_dynamics(*classic::matching_pennies(), PureProfile{0, 0}, 100, 3).status, DynamicsStatus::cycled);
  EXPECT_EQ(best_response_dynamics(*classic::matching_pennies(), PureProfile{0, 0}, 1, 3).status, DynamicsStatus::budget);
}

TEST(Thresholds, Examples) {
  EXPECT_DOUBLE_EQ(delta_trivial(0.1, 10), 0.005);
  EXPECT_DOUBLE_EQ(delta_anonymous(0.2, 4), 0.025);
  EXPECT_NEAR(delta_main(0.3, 2, 100), 0.3 / std::sqrt(800.0 * std::log(400.0)), 1e-15);
  EXPECT_NEAR(delta_main(0.3, 2, 100), 0.0043332, 5e-8);
  EXPECT_LT(delta_trivial(0.3, 100), delta_main(0.3, 2, 100));
  EXPECT_THROW(delta_trivial(0.0, 10), InvalidInput);
  EXPECT_THROW(delta_main(0.3, 2, 1), InvalidInput);
}

TEST(Polymatrix, Construction) {
  EXPECT_EQ(lipschitz_constant_exact(*polymatrix_random(4, 3, 0.0, 1)), 0.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    EXPECT_LE(lipschitz_constant_exact(*polymatrix_random(5, 2, 0.1, seed)), 0.1);
  const auto a = polymatrix_random(4, 2, 0.3, 5), b = polymatrix_random(4, 2, 0.3, 5);
  ProfileOdometer odo(a->strategy_counts());
  do {
    for (int i = 0; i < 4; ++i) EXPECT_EQ(a->payoff(i, odo.current()), b->payoff(i, odo.current()));
  } while (odo.next());
}

TEST(Polymatrix, BinaryEquilibriumIsExactNash) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = polymatrix_random(6, 2, 0.2, seed);
    const auto mu = binary_polymatrix_equilibrium(*g);
    ASSERT_TRUE(mu) << seed;
    EXPECT_LE(mixed_regret(*g, *mu), 1e-12) << seed;
  }
}
