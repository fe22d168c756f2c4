#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cstdint>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "game.hpp"
#include "rng.hpp"

namespace lipgame {

/// f_i(a) = sum_{j != i} phi_ij(a_i, a_j). A single opponent switch changes one
/// summand only, so the Lipschitz constant is bounded by the width of the
/// range the phi entries are drawn from.
class PolymatrixGame final : public Game {
 public:
  /// phi is indexed [i][j][x * m + y]; entries with i == j are ignored.
  PolymatrixGame(int n, int m, double delta, std::vector<std::vector<std::vector<double>>> phi,
                 std::optional<std::uint64_t> seed = std::nullopt)
      : Game(GameKind::polymatrix, std::vector<int>(static_cast<std::size_t>(n), m)),
        n_(n),
        m_(m),
        delta_(delta),
        seed_(seed),
        phi_(std::move(phi)) {
    require(n >= 1 && m >= 1, "polymatrix: need n >= 1 and m >= 1");
    require(phi_.size() == static_cast<std::size_t>(n), "polymatrix: phi needs n rows");
    for (const auto& row : phi_) {
      require(row.size() == static_cast<std::size_t>(n), "polymatrix: phi needs n x n blocks");
      for (const auto& block : row)
        require(block.size() == static_cast<std::size_t>(m) * static_cast<std::size_t>(m),
                "polymatrix: each block needs m x m entries");
    }
  }

  int n() const noexcept { return n_; }
  int m() const noexcept { return m_; }
  double delta() const noexcept { return delta_; }
  std::optional<std::uint64_t> seed() const noexcept { return seed_; }

  double phi(int i, int j, int x, int y) const {
    return phi_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][static_cast<std::size_t>(x * m_ + y)];
  }

  double payoff(int player, std::span<const int> a) const override {
    double total = 0.0;
    for (int j = 0; j < n_; ++j)
      if (j != player) total += phi(player, j, a[static_cast<std::size_t>(player)], a[static_cast<std::size_t>(j)]);
    return total;
  }

  void deviation_payoffs(int player, std::span<const int> a, std::span<double> out) const override {
    for (int d = 0; d < m_; ++d) {
      double total = 0.0;
      for (int j = 0; j < n_; ++j)
        if (j != player) total += phi(player, j, d, a[static_cast<std::size_t>(j)]);
      out[static_cast<std::size_t>(d)] = total;
    }
  }

  std::optional<double> lipschitz_bound() const override { return delta_; }

  std::optional<double> closed_form_expectation(int player, int strategy, const MixedProfile& mu) const override {
    double total = 0.0;
    for (int j = 0; j < n_; ++j) {
      if (j == player) continue;
      for (int y = 0; y < m_; ++y) total += mu[static_cast<std::size_t>(j)][static_cast<std::size_t>(y)] * phi(player, j, strategy, y);
    }
    return total;
  }

 private:
  int n_;
  int m_;
  double delta_;
  std::optional<std::uint64_t> seed_;
  std::vector<std::vector<std::vector<double>>> phi_;
};

/// Random polymatrix game with every phi entry uniform in [-delta/2, delta/2],
/// hence Lipschitz constant at most delta.
inline std::shared_ptr<PolymatrixGame> polymatrix_random(int n, int m, double delta, std::uint64_t seed) {
  require(n >= 1 && m >= 1 && delta >= 0.0, "polymatrix_random: need n, m >= 1 and delta >= 0");
  Rng rng(seed);
  const auto mm = static_cast<std::size_t>(m) * static_cast<std::size_t>(m);
  std::vector<std::vector<std::vector<double>>> phi(
      static_cast<std::size_t>(n), std::vector<std::vector<double>>(static_cast<std::size_t>(n), std::vector<double>(mm, 0.0)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      for (auto& v : phi[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) v = rng.uniform(-delta / 2, delta / 2);
    }
  return std::make_shared<PolymatrixGame>(n, m, delta, std::move(phi), seed);
}

/// Exact Nash equilibrium of a two-strategy polymatrix game. With p_j the
/// probability of strategy 1, player i's gain from strategy 1 over 0 is affine,
/// D_i(p) = c_i + sum_j w_ij p_j, so each choice of (mixing set, pure
/// assignment of the rest) is one linear solve. Mixing sets are tried from
/// largest to smallest; the first consistent candidate is returned. Returns
/// nothing only for degenerate games.
inline std::optional<MixedProfile> binary_polymatrix_equilibrium(const PolymatrixGame& g, double tol = 1e-12) {
  require(g.m() == 2, "binary_polymatrix_equilibrium: only two-strategy games");
  const int n = g.n();
  require(n <= 20, "binary_polymatrix_equilibrium: at most 20 players");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double gain_vs0 = g.phi(i, j, 1, 0) - g.phi(i, j, 0, 0);
      const double gain_vs1 = g.phi(i, j, 1, 1) - g.phi(i, j, 0, 1);
      c(i) += gain_vs0;
      w(i, j) = gain_vs1 - gain_vs0;
    }

  std::vector<std::uint32_t> masks(std::size_t{1} << n);
  for (std::uint32_t s = 0; s < masks.size(); ++s) masks[s] = s;
  std::stable_sort(masks.begin(), masks.end(),
                   [](std::uint32_t a, std::uint32_t b) { return std::popcount(a) > std::popcount(b); });

  std::vector<int> mixers, pures;
  Eigen::VectorXd p(n);
  for (std::uint32_t mask : masks) {
    mixers.clear();
    pures.clear();
    for (int i = 0; i < n; ++i) (mask >> i & 1u ? mixers : pures).push_back(i);
    const auto k = static_cast<Eigen::Index>(mixers.size());
    Eigen::FullPivLU<Eigen::MatrixXd> lu;
    if (k > 0) {
      Eigen::MatrixXd a(k, k);
      for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index q = 0; q < k; ++q) a(r, q) = w(mixers[static_cast<std::size_t>(r)], mixers[static_cast<std::size_t>(q)]);
      lu.compute(a);
      if (!lu.isInvertible()) continue;
    }
    const std::uint64_t assignments = std::uint64_t{1} << pures.size();
    for (std::uint64_t bits = 0; bits < assignments; ++bits) {
      for (std::size_t q = 0; q < pures.size(); ++q) p(pures[q]) = static_cast<double>(bits >> q & 1u);
      bool ok = true;
      if (k > 0) {
        Eigen::VectorXd rhs(k);
        for (Eigen::Index r = 0; r < k; ++r) {
          const int i = mixers[static_cast<std::size_t>(r)];
          double v = -c(i);
          for (int j : pures) v -= w(i, j) * p(j);
          rhs(r) = v;
        }
        const Eigen::VectorXd sol = lu.solve(rhs);
        for (Eigen::Index r = 0; r < k && ok; ++r) {
          if (sol(r) < -tol || sol(r) > 1.0 + tol) ok = false;
          p(mixers[static_cast<std::size_t>(r)]) = std::clamp(sol(r), 0.0, 1.0);
        }
      }
      for (std::size_t q = 0; q < pures.size() && ok; ++q) {
        const int j = pures[q];
        const double gain = c(j) + w.row(j).dot(p);
        if (p(j) == 0.0 ? gain > tol : gain < -tol) ok = false;
      }
      if (!ok) continue;
      std::vector<std::vector<double>> d(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = {1.0 - p(i), p(i)};
      return MixedProfile(std::move(d));
    }
  }
  return std::nullopt;
}

}  // namespace lipgame
