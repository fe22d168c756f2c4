#include <gtest/gtest.h>

#include <cmath>

#include "lipgame/analysis.hpp"
#include "lipgame/anonymous.hpp"
#include "lipgame/counterexamples.hpp"
#include "test_oracles.hpp"

using namespace lipgame;

namespace {

// F_0(d) = 0.6 - delta d_0, F_1(d) = 0.5 - delta d_1.
std::shared_ptr<AnonymousGame> congestion_game(int n, double delta) {
  const auto& lat = *lattice(n - 1, 2);
  std::vector<double> t;
  for (int s = 0; s < 2; ++s)
    for (std::size_t r = 0; r < lat.size(); ++r) t.push_back((s == 0 ? 0.6 : 0.5) - delta * lat.at(r)[static_cast<std::size_t>(s)]);
  return std::make_shared<AnonymousGame>(n, 2, delta, t, true);
}

// Symmetric mixed equilibrium of the congestion game by bisection on the
// indifference condition E F_0 = E F_1 with n-1 opponents playing 0 w.p. q.
double congestion_q(int n, double delta) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double q = 0.5 * (lo + hi);
    const double diff = (0.6 - delta * (n - 1) * q) - (0.5 - delta * (n - 1) * (1 - q));
    (diff > 0 ? lo : hi) = q;
  }
  return 0.5 * (lo + hi);
}

std::vector<SimplexPoint> random_simplex_profile(int n, int m, Rng& rng) {
  std::vector<SimplexPoint> p;
  for (int i = 0; i < n; ++i) {
    std::vector<double> w(static_cast<std::size_t>(m));
    double s = 0.0;
    for (double& v : w) s += (v = -std::log1p(-rng.uniform01()));
    for (double& v : w) v /= s;
    p.emplace_back(std::move(w), 1.0);
  }
  return p;
}

std::vector<std::vector<int>> full_supports(int n, int m) {
  std::vector<int> all(static_cast<std::size_t>(m));
  for (int s = 0; s < m; ++s) all[static_cast<std::size_t>(s)] = s;
  return std::vector<std::vector<int>>(static_cast<std::size_t>(n), all);
}

}  // namespace

TEST(Distribution, Examples) {
  const std::vector<int> a{0, 2, 1, 2};
  EXPECT_EQ(distribution_of(a, 3).counts, std::vector<int>({1, 1, 2}));
  EXPECT_EQ(distribution_of(a, 3, 1).counts, std::vector<int>({1, 1, 1}));
  EXPECT_EQ(distribution_of(a, 3, 0).mass(), 3);
  EXPECT_EQ(lattice_size(4, 3), 15u);
  EXPECT_EQ(lattice(4, 3)->size(), 15u);
  EXPECT_THROW(lattice(3000, 4), BudgetExceeded);
}

TEST(Distribution, ColexRankMatchesPosition) {
  for (int m = 1; m <= 4; ++m)
    for (int mass = 0; mass <= 6; ++mass) {
      const auto& lat = *lattice(mass, m);
      ASSERT_EQ(lat.size(), lattice_size(mass, m));
      for (std::size_t r = 0; r < lat.size(); ++r) {
        EXPECT_EQ(lat.rank(lat.at(r)), r);
        int total = 0;
        for (int c : lat.at(r)) total += c;
        EXPECT_EQ(total, mass);
        if (r == 0) continue;
        // strictly increasing in colex order: compare from the last cell down
        const auto prev = lat.at(r - 1), cur = lat.at(r);
        EXPECT_TRUE(std::lexicographical_compare(prev.rbegin(), prev.rend(), cur.rbegin(), cur.rend()));
      }
    }
  const auto& two = *lattice(9, 2);
  for (std::size_t r = 0; r < two.size(); ++r) EXPECT_EQ(two.at(r)[1], static_cast<int>(r));
}

TEST(AnonymousGame, ValidatesTable) {
  EXPECT_THROW(AnonymousGame(3, 2, 0.1, std::vector<double>(5, 0.0)), InvalidInput);
  // jump of 0.5 between adjacent distributions with delta 0.1
  EXPECT_THROW(AnonymousGame(2, 2, 0.1, {0.0, 0.5, 0.0, 0.0}, true), InvalidInput);
  EXPECT_NO_THROW(AnonymousGame(2, 2, 0.1, {0.0, 0.1, 0.0, 0.0}, true));
}

TEST(AnonymousGame, PayoffMatchesTable) {
  const auto g = random_anonymous(4, 3, 0.2, 3);
  const auto table = g->export_table();
  const std::size_t size = g->opponents_lattice().size();
  for (const auto& a : oracle::all_profiles(g->strategy_counts()))
    for (int i = 0; i < 4; ++i) {
      const auto d = distribution_of(a, 3, i);
      const std::size_t r = DistributionLattice::colex_rank(d.counts, 3);
      EXPECT_EQ(g->payoff(i, a), table[(static_cast<std::size_t>(i) * 3 + static_cast<std::size_t>(a[static_cast<std::size_t>(i)])) * size + r]);
    }
}

TEST(AnonymousGame, RandomGamesAreDeltaLipschitz) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double delta = 0.1;
    const auto g = random_anonymous(6, 3, delta, seed);
    const auto& lat = g->opponents_lattice();
    for (int i = 0; i < g->n(); ++i)
      for (int s = 0; s < 3; ++s)
        for (std::size_t r = 0; r < lat.size(); ++r)
          for (std::size_t q = 0; q < lat.size(); ++q) {
            double dist = 0.0;
            for (int t = 0; t < 3; ++t) dist += std::abs(lat.at(r)[static_cast<std::size_t>(t)] - lat.at(q)[static_cast<std::size_t>(t)]);
            EXPECT_LE(std::abs(g->F(i, s, r) - g->F(i, s, q)), delta * dist / 2 + 1e-12);
          }
    EXPECT_LE(g->adjacent_lipschitz(), delta + 1e-12);
  }
}

TEST(AnonymousGame, AdjacentLipschitzMatchesGenericExact) {
  for (int m : {2, 3})
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto g = random_anonymous(5, m, 0.15, seed);
      EXPECT_EQ(g->adjacent_lipschitz(), lipschitz_constant_exact(*g));
      EXPECT_EQ(g->adjacent_lipschitz(), oracle::lipschitz(*g));
      EXPECT_LE(lipschitz_constant_exact(*g), 0.15 + 1e-12);
    }
}

TEST(AnonymousGame, ClosedFormExpectationMatchesEnumeration) {
  const auto g = random_anonymous(5, 3, 0.2, 8);
  Rng rng(1);
  std::vector<std::vector<double>> d;
  for (int i = 0; i < 5; ++i) {
    std::vector<double> p{rng.uniform01() + 0.1, rng.uniform01() + 0.1, rng.uniform01() + 0.1};
    const double s = p[0] + p[1] + p[2];
    for (double& v : p) v /= s;
    d.push_back(p);
  }
  const MixedProfile mixed(d);
  const MixedProfile same(std::vector<std::vector<double>>(5, d[0]));
  for (const auto* mu : {&mixed, &same})
    for (int i = 0; i < 5; ++i)
      for (int s = 0; s < 3; ++s)
        EXPECT_NEAR(*g->closed_form_expectation(i, s, *mu), detail::enumerate_expectation(*g, i, s, *mu, {}), 1e-12);
}

TEST(Extension, HalfDeltaBetweenTwoPoints) {
  const double delta = 0.2;
  // one opponent: F(s, (1,0)) = 0, F(s, (0,1)) = delta
  const AnonymousGame g(2, 2, delta, {0.0, delta, 0.0, delta}, true);
  EXPECT_NEAR(lipschitz_extension(g, 0, 0, std::vector<double>{0.5, 0.5}), 0.5 * delta, 1e-15);
  EXPECT_NEAR(lipschitz_extension(g, 0, 0, SimplexPoint({0.25, 0.75}, 1.0)), 0.75 * delta, 1e-15);
  EXPECT_THROW(lipschitz_extension(g, 0, 0, SimplexPoint({1.0, 1.0}, 2.0)), InvalidInput);
}

TEST(Extension, AgreesOnLatticeAndIsLipschitz) {
  const double delta = 0.1;
  const auto g = random_anonymous(7, 3, delta, 4);
  const auto& lat = g->opponents_lattice();
  for (std::size_t r = 0; r < lat.size(); ++r) {
    const std::vector<double> x(lat.at(r).begin(), lat.at(r).end());
    for (int s = 0; s < 3; ++s) EXPECT_EQ(lipschitz_extension(*g, 2, s, x), g->F(2, s, r));
  }
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    const auto p = random_simplex_profile(2, 3, rng);
    std::vector<double> x(3), y(3);
    for (int k = 0; k < 3; ++k) {
      x[static_cast<std::size_t>(k)] = 6 * p[0].weights[static_cast<std::size_t>(k)];
      y[static_cast<std::size_t>(k)] = 6 * p[1].weights[static_cast<std::size_t>(k)];
    }
    const auto ex = extension_values(*g, 1, x), ey = extension_values(*g, 1, y);
    for (int s = 0; s < 3; ++s) {
      EXPECT_LE(std::abs(ex[static_cast<std::size_t>(s)] - ey[static_cast<std::size_t>(s)]), delta * l1_distance(x, y) / 2 + 1e-12);
      EXPECT_EQ(ex[static_cast<std::size_t>(s)], lipschitz_extension(*g, 1, s, x));
    }
  }
}

TEST(Auxiliary, PayoffIsLinearInOwnStrategy) {
  const auto g = random_anonymous(5, 3, 0.1, 2);
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    auto p = random_simplex_profile(5, 3, rng);
    auto q = p;
    q[1] = random_simplex_profile(1, 3, rng)[0];
    const double lam = rng.uniform01();
    auto mix = p;
    for (int s = 0; s < 3; ++s)
      mix[1].weights[static_cast<std::size_t>(s)] = lam * p[1].weights[static_cast<std::size_t>(s)] + (1 - lam) * q[1].weights[static_cast<std::size_t>(s)];
    EXPECT_NEAR(auxiliary_payoff(*g, 1, mix), lam * auxiliary_payoff(*g, 1, p) + (1 - lam) * auxiliary_payoff(*g, 1, q), 1e-12);
  }
}

TEST(Auxiliary, DominantStrategy) {
  // F(1, d) = F(0, d) + 0.3 everywhere.
  const auto& lat = *lattice(5, 2);
  std::vector<double> t(2 * lat.size());
  for (std::size_t r = 0; r < lat.size(); ++r) {
    t[r] = 0.02 * static_cast<double>(r);
    t[lat.size() + r] = t[r] + 0.3;
  }
  const AnonymousGame g(6, 2, 0.02, t, true);
  const auto sol = solve_auxiliary(g);
  EXPECT_TRUE(sol.converged);
  for (const auto& p : sol.profile) EXPECT_EQ(p.weights[1], 1.0);
  const auto r = anonymous_purify(g);
  EXPECT_EQ(r.profile, PureProfile(std::vector<int>(6, 1)));
  EXPECT_EQ(r.max_regret, 0.0);
}

TEST(Auxiliary, CongestionGame) {
  const int n = 20;
  const double delta = 0.05;
  const auto g = congestion_game(n, delta);
  const double q = congestion_q(n, delta);
  EXPECT_NEAR(q, 0.5526315789, 1e-9);
  // F is linear, so the symmetric auxiliary equilibrium is a mixed Nash of the game
  const MixedProfile mu(std::vector<std::vector<double>>(n, {q, 1 - q}));
  EXPECT_LE(mixed_regret(*g, mu), 1e-9);

  const auto r = anonymous_purify(*g, 1e-6, 3);
  EXPECT_TRUE(r.auxiliary.converged);
  EXPECT_LE(r.auxiliary.slack, 1e-6);
  EXPECT_TRUE(r.within_bound);
  EXPECT_TRUE(r.chain_holds);
  EXPECT_LE(oracle::max_regret(*g, r.profile.view()), 2 * 2 * delta + 1e-6);
}

TEST(ShapleyFolkman, ThreeHalfPlayers) {
  const std::vector<SimplexPoint> p(3, SimplexPoint({0.5, 0.5}, 1.0));
  const auto r = shapley_folkman_round(p, full_supports(3, 2));
  EXPECT_NEAR(r.l1_gap, 1.0, 1e-12);
  EXPECT_LE(r.drift, 1e-9);
  EXPECT_LE(r.fractional, 1);
}

TEST(ShapleyFolkman, RandomProfilesStayWithinBounds) {
  const int n = 20, m = 3;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto p = random_simplex_profile(n, m, rng);
    const auto r = shapley_folkman_round(p, full_supports(n, m));
    EXPECT_LE(r.l1_gap, 2.0 * (m - 1) + 1e-9) << seed;
    EXPECT_LE(r.max_opponent_gap, 2.0 * m + 1e-9) << seed;
    EXPECT_LE(r.fractional, m - 1) << seed;
    EXPECT_LE(r.drift, 1e-9) << seed;
    // oracle: recompute the aggregate gap directly
    std::vector<double> x(m, 0.0), y(m, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int s = 0; s < m; ++s) x[static_cast<std::size_t>(s)] += p[static_cast<std::size_t>(i)].weights[static_cast<std::size_t>(s)];
      y[static_cast<std::size_t>(r.profile[static_cast<std::size_t>(i)])] += 1.0;
    }
    EXPECT_NEAR(l1_distance(x, y), r.l1_gap, 1e-9);
  }
}

TEST(ShapleyFolkman, PureInputIsUnchanged) {
  std::vector<SimplexPoint> p;
  for (int i = 0; i < 5; ++i) p.push_back(SimplexPoint::vertex(3, i % 3));
  const auto r = shapley_folkman_round(p, full_supports(5, 3));
  EXPECT_EQ(r.profile, PureProfile({0, 1, 2, 0, 1}));
  EXPECT_EQ(r.l1_gap, 0.0);
}

TEST(AnonymousPurify, RandomGames) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double delta = 0.05;
    const auto g = random_anonymous(12, 3, delta, seed);
    const auto r = anonymous_purify(*g, 1e-6, seed);
    EXPECT_TRUE(r.within_bound) << seed;
    EXPECT_TRUE(r.chain_holds) << seed;
    EXPECT_NEAR(r.max_regret, oracle::max_regret(*g, r.profile.view()), 1e-15);
    if (r.auxiliary.converged) {
      EXPECT_LE(r.max_regret, 2 * 3 * delta + 1e-6) << seed;
    }
  }
}

TEST(AnonymousPurify, ZeroDelta) {
  const auto g = random_anonymous(6, 3, 0.0, 5);
  const auto r = anonymous_purify(*g);
  EXPECT_TRUE(r.auxiliary.converged);
  EXPECT_EQ(r.max_regret, 0.0);
}

TEST(AnonymousPurify, RestaurantGame) {
  const double delta = 0.01;
  const auto g = build_restaurant_game(50, delta);
  const auto r = anonymous_purify(*g, 1e-6, 1);
  EXPECT_TRUE(r.within_bound);
  EXPECT_LE(r.max_regret, 2 * 2 * delta + 1e-6);
  int diners = 0;
  for (int s : r.profile.strategies()) diners += s;
  EXPECT_NEAR(symmetric_max_regret(*g, Distribution{{g->n() - diners, diners}}), r.max_regret, 1e-15);
}

TEST(AnonymousPurify, SeedDeterminism) {
  const auto g = random_anonymous(10, 3, 0.05, 12);
  const auto a = anonymous_purify(*g, 1e-6, 4), b = anonymous_purify(*g, 1e-6, 4);
  EXPECT_EQ(a.profile, b.profile);
  EXPECT_EQ(a.max_regret, b.max_regret);
}
