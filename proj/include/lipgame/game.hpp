#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "profile.hpp"
#include "rng.hpp"

namespace lipgame {

enum class GameKind {
  explicit_table,
  gale_berlekamp,
  mass_matching_pennies,
  anonymous,
  restaurant,
  replicated,
  polymatrix,
};

inline std::string_view kind_name(GameKind kind) {
  switch (kind) {
    case GameKind::explicit_table: return "explicit";
    case GameKind::gale_berlekamp: return "gale_berlekamp";
    case GameKind::mass_matching_pennies: return "mass_mp";
    case GameKind::anonymous: return "anonymous";
    case GameKind::restaurant: return "restaurant";
    case GameKind::replicated: return "replicated";
    case GameKind::polymatrix: return "polymatrix";
  }
  return "unknown";
}

/// Product of `values` saturating at UINT64_MAX.
inline std::uint64_t saturating_product(std::span<const int> values) {
  std::uint64_t p = 1;
  for (int v : values) {
    const auto u = static_cast<std::uint64_t>(v);
    if (u != 0 && p > std::numeric_limits<std::uint64_t>::max() / u)
      return std::numeric_limits<std::uint64_t>::max();
    p *= u;
  }
  return p;
}

inline std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
    return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

/// Payoffs of every own strategy against a fixed opponent profile, for every
/// player, stored flat.
class DeviationTable {
 public:
  explicit DeviationTable(std::span<const int> strategy_counts) : offsets_(strategy_counts.size() + 1, 0) {
    for (std::size_t i = 0; i < strategy_counts.size(); ++i)
      offsets_[i + 1] = offsets_[i] + static_cast<std::size_t>(strategy_counts[i]);
    values_.assign(offsets_.back(), 0.0);
  }

  std::span<double> row(std::size_t player) {
    return {values_.data() + offsets_[player], offsets_[player + 1] - offsets_[player]};
  }
  std::span<const double> row(std::size_t player) const {
    return {values_.data() + offsets_[player], offsets_[player + 1] - offsets_[player]};
  }
  std::size_t players() const noexcept { return offsets_.size() - 1; }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<double> values_;
};

/// A finite normal-form game given by a payoff oracle. Implementations are
/// immutable after construction and safe to query from several threads.
class Game {
 public:
  virtual ~Game() = default;

  GameKind kind() const noexcept { return kind_; }
  int players() const noexcept { return static_cast<int>(counts_.size()); }
  int strategies(int player) const { return counts_.at(static_cast<std::size_t>(player)); }
  const std::vector<int>& strategy_counts() const noexcept { return counts_; }
  int max_strategies() const noexcept { return max_strategies_; }

  /// Number of pure profiles, saturating.
  std::uint64_t profile_count() const { return saturating_product(counts_); }

  /// f_i(a).
  virtual double payoff(int player, std::span<const int> profile) const = 0;

  double payoff(int player, const PureProfile& a) const { return payoff(player, a.view()); }

  /// out[d] = f_i(d, a_{-i}) for every strategy d of `player`.
  virtual void deviation_payoffs(int player, std::span<const int> profile, std::span<double> out) const {
    std::vector<int> b(profile.begin(), profile.end());
    for (int d = 0; d < strategies(player); ++d) {
      b[static_cast<std::size_t>(player)] = d;
      out[static_cast<std::size_t>(d)] = payoff(player, b);
    }
  }

  /// Deviation payoffs for all players at once. Families with aggregate
  /// structure override this to share work across players.
  virtual DeviationTable all_deviation_payoffs(std::span<const int> profile) const {
    DeviationTable t(counts_);
    for (int i = 0; i < players(); ++i) deviation_payoffs(i, profile, t.row(static_cast<std::size_t>(i)));
    return t;
  }

  /// A certified upper bound on the Lipschitz constant, when the family
  /// provides one by construction.
  virtual std::optional<double> lipschitz_bound() const { return std::nullopt; }

  /// Exact E[f_i(s, .)] under mu_{-i} when the family has a closed form or a
  /// polynomial-time recursion for it.
  virtual std::optional<double> closed_form_expectation(int /*player*/, int /*strategy*/,
                                                        const MixedProfile& /*mu*/) const {
    return std::nullopt;
  }

  /// All exact expectations at once, for families where that shares work.
  virtual std::optional<DeviationTable> closed_form_table(const MixedProfile& /*mu*/) const { return std::nullopt; }

  void validate(std::span<const int> profile) const {
    require(profile.size() == counts_.size(), "profile has wrong number of players");
    for (std::size_t i = 0; i < profile.size(); ++i)
      require(profile[i] >= 0 && profile[i] < counts_[i], "strategy out of range for player " + std::to_string(i));
  }

  void validate(const MixedProfile& mu) const {
    require(mu.size() == counts_.size(), "mixed profile has wrong number of players");
    for (std::size_t i = 0; i < mu.size(); ++i)
      require(mu[i].size() == static_cast<std::size_t>(counts_[i]),
              "mixed profile has wrong strategy count for player " + std::to_string(i));
  }

 protected:
  Game(GameKind kind, std::vector<int> strategy_counts) : kind_(kind), counts_(std::move(strategy_counts)) {
    require(!counts_.empty(), "game needs at least one player");
    for (int m : counts_) require(m >= 1, "every player needs at least one strategy");
    max_strategies_ = *std::max_element(counts_.begin(), counts_.end());
  }

 private:
  GameKind kind_;
  std::vector<int> counts_;
  int max_strategies_ = 0;
};

using GamePtr = std::shared_ptr<const Game>;

/// Lexicographic walk over all profiles, last player fastest.
class ProfileOdometer {
 public:
  explicit ProfileOdometer(std::vector<int> counts) : counts_(std::move(counts)), current_(counts_.size(), 0) {}

  std::span<const int> current() const noexcept { return current_; }
  std::vector<int>& mutable_current() noexcept { return current_; }

  /// Advances; returns false after the last profile.
  bool next() {
    for (std::size_t k = counts_.size(); k-- > 0;) {
      if (++current_[k] < counts_[k]) return true;
      current_[k] = 0;
    }
    return false;
  }

 private:
  std::vector<int> counts_;
  std::vector<int> current_;
};

/// Row-major index of a profile (player 0 most significant).
inline std::uint64_t profile_index(std::span<const int> counts, std::span<const int> a) {
  std::uint64_t idx = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) idx = idx * static_cast<std::uint64_t>(counts[k]) + a[k];
  return idx;
}

inline std::vector<int> profile_at(std::span<const int> counts, std::uint64_t idx) {
  std::vector<int> a(counts.size());
  for (std::size_t k = counts.size(); k-- > 0;) {
    a[k] = static_cast<int>(idx % static_cast<std::uint64_t>(counts[k]));
    idx /= static_cast<std::uint64_t>(counts[k]);
  }
  return a;
}

inline int sample_strategy(std::span<const double> p, Rng& rng) {
  const double u = rng.uniform01();
  double acc = 0.0;
  int last = 0;
  for (std::size_t s = 0; s < p.size(); ++s) {
    if (p[s] <= 0.0) continue;
    last = static_cast<int>(s);
    acc += p[s];
    if (u < acc) return last;
  }
  return last;
}

inline PureProfile sample_profile(const MixedProfile& mu, Rng& rng) {
  std::vector<int> a(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) a[i] = sample_strategy(mu[i], rng);
  return PureProfile(std::move(a));
}

/// Full payoff table, one row-major array per player.
class ExplicitGame final : public Game {
 public:
  ExplicitGame(std::vector<int> strategy_counts, std::vector<std::vector<double>> payoffs,
               std::uint64_t budget = 10'000'000)
      : Game(GameKind::explicit_table, std::move(strategy_counts)), payoffs_(std::move(payoffs)) {
    const std::uint64_t cells = saturating_mul(profile_count(), static_cast<std::uint64_t>(players()));
    if (cells > budget) throw BudgetExceeded("explicit game table", cells, budget);
    require(payoffs_.size() == static_cast<std::size_t>(players()), "explicit game: need one payoff array per player");
    for (const auto& row : payoffs_)
      require(row.size() == profile_count(), "explicit game: payoff array length must equal the number of profiles");
  }

  /// Materializes f(i, a) for every profile.
  template <typename PayoffFn>
  static std::shared_ptr<ExplicitGame> tabulate(std::vector<int> strategy_counts, PayoffFn&& f,
                                                std::uint64_t budget = 10'000'000) {
    const std::uint64_t count = saturating_product(strategy_counts);
    const std::uint64_t cells = saturating_mul(count, strategy_counts.size());
    if (cells > budget) throw BudgetExceeded("explicit game table", cells, budget);
    std::vector<std::vector<double>> payoffs(strategy_counts.size(), std::vector<double>(count));
    ProfileOdometer odo(strategy_counts);
    std::uint64_t idx = 0;
    do {
      for (std::size_t i = 0; i < strategy_counts.size(); ++i)
        payoffs[i][idx] = f(static_cast<int>(i), odo.current());
      ++idx;
    } while (odo.next());
    return std::make_shared<ExplicitGame>(std::move(strategy_counts), std::move(payoffs), budget);
  }

  double payoff(int player, std::span<const int> profile) const override {
    return payoffs_[static_cast<std::size_t>(player)][profile_index(strategy_counts(), profile)];
  }

  const std::vector<std::vector<double>>& table() const noexcept { return payoffs_; }

 private:
  std::vector<std::vector<double>> payoffs_;
};

/// Small reference games used by tests, docs and the CLI.
namespace classic {

inline std::shared_ptr<ExplicitGame> constant(std::vector<int> counts, double value = 0.0) {
  return ExplicitGame::tabulate(std::move(counts), [value](int, std::span<const int>) { return value; });
}

/// Player 0 wants to match, player 1 wants to mismatch; payoffs +-1.
inline std::shared_ptr<ExplicitGame> matching_pennies() {
  return ExplicitGame::tabulate({2, 2}, [](int i, std::span<const int> a) {
    const double match = a[0] == a[1] ? 1.0 : -1.0;
    return i == 0 ? match : -match;
  });
}

/// Both players get 1 on a match and 0 otherwise.
inline std::shared_ptr<ExplicitGame> coordination(int strategies = 2) {
  return ExplicitGame::tabulate({strategies, strategies},
                                [](int, std::span<const int> a) { return a[0] == a[1] ? 1.0 : 0.0; });
}

}  // namespace classic

}  // namespace lipgame
