// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>

#include "lipgame/experiments.hpp"
#include "test_oracles.hpp"

using namespace lipgame;

namespace {

int failures = 0;

void report(int number, const std::string& title, bool pass, const json& detail) {
  failures += !pass;
  std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << number << ": " << title << " | " << detail.dump()
            << std::endl;
}

// Every sub-criterion of a preset result must pass.
void report_preset(int number, const std::string& title, const json& result) {
  report(number, title, result.at("pass").get<bool>(), result.at("criteria"));
}

json select(const json& result, std::initializer_list<std::size_t> which) {
  json out = json::array();
  for (auto i : which) out.push_back(result.at("criteria").at(i));
  return out;
}

bool all_pass(const json& criteria) {
  for (const auto& c : criteria)
    if (!c.at("pass").get<bool>()) return false;
  return true;
}

json concentration() {
  const int n = 100;
  const std::uint64_t samples = 100'000;
  const auto mu = MixedProfile::uniform(std::vector<int>(n, 2));
  auto f = [](std::span<const int> a) {
    int s = 0;
    for (int v : a) s += sign_of(v);
    return s / 100.0;
  };
  json rows = json::array();
  bool pass = true;
  for (double r : {0.2, 0.3, 0.5}) {
    const auto t = concentration_tail_check(f, 2.0 / n, mu, r, samples, 2024, 0.0);
    const double bound = std::exp(-r * r * n / 2.0);
    const double slack = 5.0 * std::sqrt(bound * (1.0 - bound) / samples);
    const int need = static_cast<int>(std::ceil(n * (1.0 + r) / 2.0 - 1e-9));
    const double exact = oracle::binomial_upper_tail(n, 0.5, need);
    const double sigma = std::sqrt(exact * (1.0 - exact) / samples);
    const bool ok = t.empirical_upper <= bound + slack && std::abs(t.empirical_upper - exact) <= 3.0 * sigma;
    pass = pass && ok;
    rows.push_back({{"r", r}, {"empirical", t.empirical_upper}, {"bound", bound}, {"exact", exact}, {"pass", ok}});
  }
  return {{"pass", pass}, {"rows", rows}};
}

// Replicated payoffs against tuple averaging, n = 2 and L <= 3.
bool replication_oracle() {
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const GamePtr base =
        ExplicitGame::tabulate({2, 3}, [&](int, std::span<const int>) { return static_cast<double>(rng.below(9)) / 4.0 - 1.0; });
    for (int L = 1; L <= 3; ++L) {
      const auto rg = replicate(base, L);
      for (const auto& b : oracle::all_profiles(rg->strategy_counts())) {
        const auto table = rg->all_deviation_payoffs(b);
        for (int t = 0; t < rg->players(); ++t) {
          const int i = t / L, j = 1 - i;
          auto c = b;
          for (int d = 0; d < rg->strategies(t); ++d) {
            c[static_cast<std::size_t>(t)] = d;
            double total = 0.0;
            for (int l = 0; l < L; ++l) {
              std::vector<int> a(2);
              a[static_cast<std::size_t>(i)] = d;
              a[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j * L + l)];
              total += base->payoff(i, a);
            }
            const double want = total / L;
            ok = ok && rg->payoff(t, c) == want && table.row(static_cast<std::size_t>(t))[static_cast<std::size_t>(d)] == want;
          }
        }
      }
    }
  }
  return ok;
}

bool discrepancy_oracle() {
  bool ok = true;
  Rng rng(31);
  for (int k = 1; k <= 16; ++k) {
    const auto m = SignMatrix::random(k, rng);
    const auto r = verify_discrepancy(m);
    const int worst = oracle::min_large_columns(m);
    ok = ok && r.worst_count == worst && r.holds == (3 * worst > k);
  }
  return ok;
}

bool anonymous_oracle() {
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = random_anonymous(5, 2, 0.1, seed);
    ok = ok && g->adjacent_lipschitz() == lipschitz_constant_exact(*g) && lipschitz_constant_exact(*g) == oracle::lipschitz(*g);
  }
  return ok;
}

}  // namespace

int main() {
  const Limits limits;

  report_preset(1, "two-step construction on polymatrix games, n=6, m=3", run_experiment("prop1", json::object(), limits));

  const json thm2 = run_experiment("thm2-sweep", json::object(), limits);
  const json c2 = select(thm2, {0, 1}), c3 = select(thm2, {2});
  report(2, "exhaustive search at delta_main, n=12, m=2", all_pass(c2), c2);
  report(3, "self-purification rate vs certificate", all_pass(c3), c3);

  const json conc = concentration();
  report(4, "concentration of a normalized sign sum", conc.at("pass").get<bool>(), conc.at("rows"));

  report_preset(5, "Gale-Berlekamp matrix search and game", run_experiment("thm3", json::object(), limits));
  report_preset(6, "mass matching pennies at k=2,3", run_experiment("prop3", json::object(), limits));
  report_preset(7, "anonymous-game pipeline, n=20, m=3", run_experiment("thm4", json::object(), limits));
  report_preset(8, "restaurant game", run_experiment("restaurant", json::object(), limits));
  report_preset(9, "Nash equilibrium through replication", run_experiment("replication", json::object(), limits));

  const bool rep = replication_oracle(), disc = discrepancy_oracle(), anon = anonymous_oracle();
  report(10, "oracle equivalences", rep && disc && anon,
         {{"replication_tuple_average", rep}, {"discrepancy_naive", disc}, {"anonymous_lipschitz", anon}});

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
