#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "errors.hpp"

namespace lipgame {

/// One strategy index per player.
class PureProfile {
 public:
  PureProfile() = default;
  explicit PureProfile(std::vector<int> strategies) : strategies_(std::move(strategies)) {}
  PureProfile(std::initializer_list<int> strategies) : strategies_(strategies) {}
  PureProfile(std::size_t players, int strategy) : strategies_(players, strategy) {}

  std::size_t size() const noexcept { return strategies_.size(); }
  int operator[](std::size_t i) const { return strategies_[i]; }
  int& operator[](std::size_t i) { return strategies_[i]; }

  std::span<const int> view() const noexcept { return strategies_; }
  const std::vector<int>& strategies() const noexcept { return strategies_; }
  std::vector<int>& strategies() noexcept { return strategies_; }

  auto begin() const noexcept { return strategies_.begin(); }
  auto end() const noexcept { return strategies_.end(); }

  bool operator==(const PureProfile&) const = default;

 private:
  std::vector<int> strategies_;
};

/// Number of coordinates in which two profiles differ.
inline int hamming(std::span<const int> a, std::span<const int> b) {
  require(a.size() == b.size(), "hamming: profiles have different lengths");
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

inline int hamming(const PureProfile& a, const PureProfile& b) { return hamming(a.view(), b.view()); }

/// Independent mixed strategies, one probability vector per player.
class MixedProfile {
 public:
  static constexpr double kSumTolerance = 1e-12;

  MixedProfile() = default;
  explicit MixedProfile(std::vector<std::vector<double>> distributions)
      : distributions_(std::move(distributions)) {
    for (std::size_t i = 0; i < distributions_.size(); ++i) {
      double sum = 0.0;
      for (double p : distributions_[i]) {
        require(p >= 0.0 && std::isfinite(p), "mixed profile: negative or non-finite probability");
        sum += p;
      }
      require(std::abs(sum - 1.0) <= kSumTolerance * std::max<std::size_t>(1, distributions_[i].size()),
              "mixed profile: distribution " + std::to_string(i) + " does not sum to 1");
    }
  }

  /// Uniform over each player's strategy set.
  static MixedProfile uniform(std::span<const int> strategy_counts) {
    std::vector<std::vector<double>> d;
    d.reserve(strategy_counts.size());
    for (int m : strategy_counts) d.emplace_back(static_cast<std::size_t>(m), 1.0 / m);
    return MixedProfile(std::move(d));
  }

  /// Point masses on a pure profile.
  static MixedProfile degenerate(const PureProfile& a, std::span<const int> strategy_counts) {
    require(a.size() == strategy_counts.size(), "degenerate: profile/shape mismatch");
    std::vector<std::vector<double>> d;
    d.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::vector<double> v(static_cast<std::size_t>(strategy_counts[i]), 0.0);
      v.at(static_cast<std::size_t>(a[i])) = 1.0;
      d.push_back(std::move(v));
    }
    return MixedProfile(std::move(d));
  }

  std::size_t size() const noexcept { return distributions_.size(); }
  const std::vector<double>& operator[](std::size_t i) const { return distributions_[i]; }
  const std::vector<std::vector<double>>& distributions() const noexcept { return distributions_; }

  std::vector<int> support(std::size_t i, double threshold = 0.0) const {
    std::vector<int> s;
    for (std::size_t k = 0; k < distributions_[i].size(); ++k)
      if (distributions_[i][k] > threshold) s.push_back(static_cast<int>(k));
    return s;
  }

 private:
  std::vector<std::vector<double>> distributions_;
};

}  // namespace lipgame
