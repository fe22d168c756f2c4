#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "analysis.hpp"
#include "errors.hpp"
#include "game.hpp"
#include "purification.hpp"

namespace lipgame {

/// n*L players in groups T_0..T_{n-1} of size L; player t = i*L + l belongs
/// to T_i and plays base player i's role against every tuple of one player
/// from each other group, receiving the average payoff. Only the per-group
/// strategy counts of the other groups matter.
class ReplicatedGame final : public Game {
 public:
  ReplicatedGame(GamePtr base, int L, const Limits& limits = {})
      : Game(GameKind::replicated, expand(*base, L)), base_(std::move(base)), L_(L) {
    if (auto b = base_->lipschitz_bound()) {
      base_delta_ = *b;
    } else {
      try {
        base_delta_ = lipschitz_constant_exact(*base_, limits);
      } catch (const BudgetExceeded&) {
      }
    }
    denominator_ = std::pow(static_cast<double>(L_), base_->players() - 1);
  }

  const Game& base() const noexcept { return *base_; }
  GamePtr base_ptr() const noexcept { return base_; }
  int L() const noexcept { return L_; }
  int group_of(int player) const noexcept { return player / L_; }

  /// Strategy counts of every group.
  std::vector<std::vector<int>> group_counts(std::span<const int> b) const {
    std::vector<std::vector<int>> c(static_cast<std::size_t>(base_->players()));
    for (int i = 0; i < base_->players(); ++i) {
      auto& ci = c[static_cast<std::size_t>(i)];
      ci.assign(static_cast<std::size_t>(base_->strategies(i)), 0);
      for (int l = 0; l < L_; ++l) ++ci[static_cast<std::size_t>(b[static_cast<std::size_t>(i * L_ + l)])];
    }
    return c;
  }

  double payoff(int player, std::span<const int> b) const override {
    const int i = group_of(player);
    std::vector<double> out(static_cast<std::size_t>(base_->strategies(i)));
    group_row(i, group_counts(b), out);
    return out[static_cast<std::size_t>(b[static_cast<std::size_t>(player)])];
  }

  void deviation_payoffs(int player, std::span<const int> b, std::span<double> out) const override {
    group_row(group_of(player), group_counts(b), out);
  }

  /// Everyone in a group shares one deviation row.
  DeviationTable all_deviation_payoffs(std::span<const int> b) const override {
    DeviationTable t(strategy_counts());
    const auto counts = group_counts(b);
    for (int i = 0; i < base_->players(); ++i) {
      auto first = t.row(static_cast<std::size_t>(i * L_));
      group_row(i, counts, first);
      for (int l = 1; l < L_; ++l) {
        auto row = t.row(static_cast<std::size_t>(i * L_ + l));
        std::copy(first.begin(), first.end(), row.begin());
      }
    }
    return t;
  }

  std::optional<double> lipschitz_bound() const override {
    if (base_delta_) return *base_delta_ / L_;
    return std::nullopt;
  }

  /// The payoff is multilinear in the other groups' indicators, so its
  /// expectation is the base expectation under the group-average mixtures.
  std::optional<double> closed_form_expectation(int player, int strategy, const MixedProfile& mu) const override {
    const MixedProfile avg = group_average(mu);
    try {
      return expected_payoff(*base_, group_of(player), strategy, avg, ExpectationMode::exact()).value;
    } catch (const BudgetExceeded&) {
      return std::nullopt;
    }
  }

  std::optional<DeviationTable> closed_form_table(const MixedProfile& mu) const override {
    const MixedProfile avg = group_average(mu);
    DeviationTable t(strategy_counts());
    try {
      for (int i = 0; i < base_->players(); ++i) {
        auto first = t.row(static_cast<std::size_t>(i * L_));
        for (int s = 0; s < base_->strategies(i); ++s)
          first[static_cast<std::size_t>(s)] = expected_payoff(*base_, i, s, avg, ExpectationMode::exact()).value;
        for (int l = 1; l < L_; ++l) {
          auto row = t.row(static_cast<std::size_t>(i * L_ + l));
          std::copy(first.begin(), first.end(), row.begin());
        }
      }
    } catch (const BudgetExceeded&) {
      return std::nullopt;
    }
    return t;
  }

  MixedProfile group_average(const MixedProfile& mu) const {
    std::vector<std::vector<double>> avg(static_cast<std::size_t>(base_->players()));
    for (int i = 0; i < base_->players(); ++i) {
      auto& a = avg[static_cast<std::size_t>(i)];
      a.assign(static_cast<std::size_t>(base_->strategies(i)), 0.0);
      for (int l = 0; l < L_; ++l)
        for (std::size_t s = 0; s < a.size(); ++s) a[s] += mu[static_cast<std::size_t>(i * L_ + l)][s];
      double sum = 0.0;
      for (double& v : a) sum += (v /= L_);
      for (double& v : a) v /= sum;
    }
    return MixedProfile(std::move(avg));
  }

 private:
  static std::vector<int> expand(const Game& base, int L) {
    require(L >= 1, "replicate: need L >= 1");
    std::vector<int> counts;
    counts.reserve(static_cast<std::size_t>(base.players()) * static_cast<std::size_t>(L));
    for (int i = 0; i < base.players(); ++i) counts.insert(counts.end(), static_cast<std::size_t>(L), base.strategies(i));
    return counts;
  }

  /// out[s] = (sum over opponent tuples of f_i(s, a_{-i}) * prod_j count_j(a_j)) / L^{n-1}.
  /// The numerator is an integer-weighted sum, so dyadic payoffs give exact results.
  void group_row(int i, const std::vector<std::vector<int>>& counts, std::span<double> out) const {
    const int n = base_->players();
    std::vector<std::vector<int>> used(static_cast<std::size_t>(n));
    std::vector<int> radix(static_cast<std::size_t>(n), 1);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      for (int s = 0; s < base_->strategies(j); ++s)
        if (counts[static_cast<std::size_t>(j)][static_cast<std::size_t>(s)] > 0) used[static_cast<std::size_t>(j)].push_back(s);
      radix[static_cast<std::size_t>(j)] = static_cast<int>(used[static_cast<std::size_t>(j)].size());
    }
    std::vector<double> acc(out.size(), 0.0), row(out.size());
    std::vector<int> a(static_cast<std::size_t>(n), 0);
    ProfileOdometer odo(radix);
    do {
      double weight = 1.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const int s = used[static_cast<std::size_t>(j)][static_cast<std::size_t>(odo.current()[static_cast<std::size_t>(j)])];
        a[static_cast<std::size_t>(j)] = s;
        weight *= counts[static_cast<std::size_t>(j)][static_cast<std::size_t>(s)];
      }
      base_->deviation_payoffs(i, a, row);
      for (std::size_t s = 0; s < acc.size(); ++s) acc[s] += weight * row[s];
    } while (odo.next());
    for (std::size_t s = 0; s < acc.size(); ++s) out[s] = acc[s] / denominator_;
  }

  GamePtr base_;
  int L_;
  double denominator_ = 1.0;
  std::optional<double> base_delta_;
};

inline std::shared_ptr<ReplicatedGame> replicate(GamePtr base, int L, const Limits& limits = {}) {
  return std::make_shared<ReplicatedGame>(std::move(base), L, limits);
}

/// mu_i = empirical strategy frequencies of group T_i.
inline MixedProfile project(const ReplicatedGame& rg, const PureProfile& b) {
  rg.validate(b.view());
  const auto counts = rg.group_counts(b.view());
  std::vector<std::vector<double>> mu(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    for (int c : counts[i]) mu[i].push_back(static_cast<double>(c) / rg.L());
  return MixedProfile(std::move(mu));
}

/// The L-fold copy of a base mixed profile.
inline MixedProfile lift(const ReplicatedGame& rg, const MixedProfile& mu) {
  rg.base().validate(mu);
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(rg.players()));
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (int l = 0; l < rg.L(); ++l) out.push_back(mu[i]);
  return MixedProfile(std::move(out));
}

struct ReplicationLipschitz {
  double base_delta = 0.0;
  double replica_delta = 0.0;
  bool holds = false;  ///< replica_delta <= base_delta / L + 1e-12
};

inline ReplicationLipschitz replication_lipschitz_check(GamePtr base, int L, const Limits& limits = {}) {
  ReplicationLipschitz out;
  out.base_delta = lipschitz_constant_exact(*base, limits);
  const ReplicatedGame rg(std::move(base), L, limits);
  out.replica_delta = lipschitz_constant_exact(rg, limits);
  out.holds = out.replica_delta <= out.base_delta / L + 1e-12;
  return out;
}

enum class ReplicationMethod { self_purify, search };

inline std::string_view method_name(ReplicationMethod m) {
  return m == ReplicationMethod::self_purify ? "self-purify" : "search";
}

struct ReplicationResult {
  MixedProfile mu;            ///< projection of the pure profile of G'
  double mixed_regret = 0.0;  ///< regret of mu in the base game, computed exactly
  bool within_eps = false;
  int L = 0;
  std::optional<double> delta_replica;
  PureProfile replica_profile;
  std::uint64_t tries = 0;  ///< self-purify samples, or profiles scanned by search
  std::optional<PurificationCertificate> cert;
};

/// Finds a pure eps-equilibrium of the L-fold replica, either by sampling the
/// lifted `base_mu` (default uniform) or by exhaustive search, and projects
/// it back. The projection's regret is measured, not assumed.
inline ReplicationResult nash_via_replication(GamePtr base, double eps, int L, ReplicationMethod method,
                                              std::uint64_t seed, std::optional<MixedProfile> base_mu = std::nullopt,
                                              const SelfPurifyOptions& options = {}) {
  require(eps > 0.0, "nash_via_replication: eps must be positive");
  const auto rg = replicate(base, L, options.limits);
  ReplicationResult out;
  out.L = L;
  out.delta_replica = rg->lipschitz_bound();
  if (method == ReplicationMethod::self_purify) {
    const MixedProfile mu0 = base_mu ? *base_mu : MixedProfile::uniform(base->strategy_counts());
    const auto res = self_purify(*rg, lift(*rg, mu0), eps, seed, options);
    out.tries = res.tries;
    out.cert = res.cert;
    if (!res.profile) throw NotFound("nash_via_replication: no sample passed the purification test in " + std::to_string(res.tries) + " tries");
    out.replica_profile = *res.profile;
  } else {
    const auto res = exhaustive_pure_search(*rg, eps, options.limits);
    out.tries = res.count;
    if (!res.first) throw NotFound("nash_via_replication: the replica has no pure eps-equilibrium");
    out.replica_profile = *res.first;
  }
  out.mu = project(*rg, out.replica_profile);
  out.mixed_regret = mixed_regret(*base, out.mu, ExpectationMode::exact(), options.limits);
  out.within_eps = out.mixed_regret <= eps + options.limits.tol;
  return out;
}

}  // namespace lipgame
