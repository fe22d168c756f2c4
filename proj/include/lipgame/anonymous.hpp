#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "errors.hpp"
#include "game.hpp"
#include "profile.hpp"
#include "rng.hpp"

namespace lipgame {

/// A point of D_mass(S): `mass` identical balls in m cells.
struct Distribution {
  std::vector<int> counts;

  int mass() const { return std::accumulate(counts.begin(), counts.end(), 0); }
  std::size_t cells() const noexcept { return counts.size(); }
  bool operator==(const Distribution&) const = default;
};

/// A point of the real simplex Delta_mass(S).
struct SimplexPoint {
  std::vector<double> weights;
  double mass = 1.0;

  SimplexPoint() = default;
  SimplexPoint(std::vector<double> w, double total) : weights(std::move(w)), mass(total) {
    double sum = 0.0;
    for (double v : weights) {
      require(v >= 0.0 && std::isfinite(v), "simplex point: weights must be nonnegative");
      sum += v;
    }
    require(std::abs(sum - mass) <= 1e-9 * std::max(1.0, mass), "simplex point: weights must sum to the mass");
  }

  static SimplexPoint vertex(int m, int s, double mass = 1.0) {
    std::vector<double> w(static_cast<std::size_t>(m), 0.0);
    w[static_cast<std::size_t>(s)] = mass;
    return {std::move(w), mass};
  }

  static SimplexPoint of(const Distribution& d) {
    std::vector<double> w(d.counts.begin(), d.counts.end());
    return {std::move(w), static_cast<double>(d.mass())};
  }
};

inline double l1_distance(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) s += std::abs(x[t] - y[t]);
  return s;
}

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t t = 1; t <= k; ++t) {
    if (r > std::numeric_limits<std::uint64_t>::max() / (n - k + t)) return std::numeric_limits<std::uint64_t>::max();
    r = r * (n - k + t) / t;
  }
  return r;
}

/// |D_mass(S)| for |S| = m.
inline std::uint64_t lattice_size(int mass, int m) {
  return binomial(static_cast<std::uint64_t>(mass + m - 1), static_cast<std::uint64_t>(m - 1));
}

/// All distributions of a fixed mass over m cells, in colexicographic order
/// of the count vectors (last cell most significant).
class DistributionLattice {
 public:
  static constexpr std::uint64_t kMaxSize = 1'000'000;

  DistributionLattice(int mass, int m) : mass_(mass), m_(m) {
    require(mass >= 0 && m >= 1, "lattice: need mass >= 0 and m >= 1");
    const std::uint64_t size = lattice_size(mass, m);
    if (size > kMaxSize) throw BudgetExceeded("distribution lattice", size, kMaxSize);
    points_.reserve(static_cast<std::size_t>(size) * static_cast<std::size_t>(m));
    std::vector<int> c(static_cast<std::size_t>(m), 0);
    fill(c, m - 1, mass);
  }

  int mass() const noexcept { return mass_; }
  int cells() const noexcept { return m_; }
  std::size_t size() const noexcept { return points_.size() / static_cast<std::size_t>(m_); }

  std::span<const int> at(std::size_t rank) const {
    return {points_.data() + rank * static_cast<std::size_t>(m_), static_cast<std::size_t>(m_)};
  }

  /// Colex rank of a count vector of this lattice's mass.
  std::size_t rank(std::span<const int> counts) const { return colex_rank(counts, mass_); }

  static std::size_t colex_rank(std::span<const int> counts, int mass) {
    std::size_t r = 0;
    int rem = mass;
    for (std::size_t t = counts.size(); t-- > 1;) {
      // vectors agreeing above t with a smaller entry at t come first
      for (int u = 0; u < counts[t]; ++u) r += static_cast<std::size_t>(lattice_size(rem - u, static_cast<int>(t)));
      rem -= counts[t];
    }
    return r;
  }

 private:
  void fill(std::vector<int>& c, int t, int rem) {
    if (t == 0) {
      c[0] = rem;
      points_.insert(points_.end(), c.begin(), c.end());
      return;
    }
    for (int v = 0; v <= rem; ++v) {
      c[static_cast<std::size_t>(t)] = v;
      fill(c, t - 1, rem - v);
    }
    c[static_cast<std::size_t>(t)] = 0;
  }

  int mass_;
  int m_;
  std::vector<int> points_;
};

/// Process-wide memo of lattices; safe for concurrent readers.
inline std::shared_ptr<const DistributionLattice> lattice(int mass, int m) {
  static std::shared_mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const DistributionLattice>> cache;
  {
    std::shared_lock lock(mutex);
    if (auto it = cache.find({mass, m}); it != cache.end()) return it->second;
  }
  auto built = std::make_shared<const DistributionLattice>(mass, m);
  std::unique_lock lock(mutex);
  return cache.emplace(std::pair{mass, m}, std::move(built)).first->second;
}

/// Strategy counts over all players except `exclude`.
inline Distribution distribution_of(std::span<const int> a, int m, std::optional<int> exclude = std::nullopt) {
  Distribution d{std::vector<int>(static_cast<std::size_t>(m), 0)};
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (exclude && static_cast<int>(j) == *exclude) continue;
    require(a[j] >= 0 && a[j] < m, "distribution_of: strategy out of range");
    ++d.counts[static_cast<std::size_t>(a[j])];
  }
  return d;
}

/// log of the multinomial probability of `counts` under cell probabilities p.
inline double multinomial_log_pmf(std::span<const int> counts, std::span<const double> p) {
  int total = 0;
  double v = 0.0;
  for (std::size_t t = 0; t < counts.size(); ++t) {
    total += counts[t];
    v -= std::lgamma(counts[t] + 1.0);
    if (counts[t] > 0) {
      if (p[t] <= 0.0) return -std::numeric_limits<double>::infinity();
      v += counts[t] * std::log(p[t]);
    }
  }
  return v + std::lgamma(total + 1.0);
}

/// An anonymous game: every player has strategy set S = {0..m-1} and player
/// i's payoff is F_i(s, d) where d is the distribution of the opponents'
/// strategies. `symmetric` games share one table across players.
class AnonymousGame : public Game {
 public:
  /// `table` holds F flattened by (player, strategy, colex rank of the
  /// opponents' distribution); a symmetric game passes a single player's block.
  AnonymousGame(int n, int m, double delta, std::vector<double> table, bool symmetric = false)
      : AnonymousGame(GameKind::anonymous, n, m, delta, std::move(table), symmetric) {}

  int n() const noexcept { return players(); }
  int m() const noexcept { return m_; }
  double delta() const noexcept { return delta_; }
  bool symmetric() const noexcept { return symmetric_; }
  const DistributionLattice& opponents_lattice() const noexcept { return *lattice_; }

  double F(int player, int s, std::size_t rank) const { return values_[slot(player, rank) + static_cast<std::size_t>(s)]; }
  double F(int player, int s, const Distribution& d) const { return F(player, s, lattice_->rank(d.counts)); }

  /// The table in external order (player, strategy, rank); always n blocks.
  std::vector<double> export_table() const {
    const std::size_t size = lattice_->size();
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n()) * static_cast<std::size_t>(m_) * size);
    for (int i = 0; i < n(); ++i)
      for (int s = 0; s < m_; ++s)
        for (std::size_t r = 0; r < size; ++r) out.push_back(F(i, s, r));
    return out;
  }

  double payoff(int player, std::span<const int> a) const override {
    const Distribution d = distribution_of(a, m_, player);
    return F(player, a[static_cast<std::size_t>(player)], lattice_->rank(d.counts));
  }

  void deviation_payoffs(int player, std::span<const int> a, std::span<double> out) const override {
    const Distribution d = distribution_of(a, m_, player);
    const std::size_t r = lattice_->rank(d.counts);
    for (int s = 0; s < m_; ++s) out[static_cast<std::size_t>(s)] = F(player, s, r);
  }

  DeviationTable all_deviation_payoffs(std::span<const int> a) const override {
    DeviationTable t(strategy_counts());
    Distribution total = distribution_of(a, m_);
    for (int i = 0; i < n(); ++i) {
      auto& own = total.counts[static_cast<std::size_t>(a[static_cast<std::size_t>(i)])];
      --own;
      const std::size_t r = lattice_->rank(total.counts);
      ++own;
      auto row = t.row(static_cast<std::size_t>(i));
      for (int s = 0; s < m_; ++s) row[static_cast<std::size_t>(s)] = F(i, s, r);
    }
    return t;
  }

  std::optional<double> lipschitz_bound() const override { return delta_; }

  /// Exact expectation over the opponents' random distribution: multinomial
  /// when all opponents mix identically, otherwise a convolution over the
  /// lattices of increasing mass.
  std::optional<double> closed_form_expectation(int player, int s, const MixedProfile& mu) const override {
    if (constant_[constant_slot(player, s)]) return F(player, s, std::size_t{0});
    const DistributionLattice& top = *lattice_;
    std::optional<std::size_t> ref;
    bool identical = true;
    for (int j = 0; j < n(); ++j) {
      if (j == player) continue;
      if (!ref) ref = static_cast<std::size_t>(j);
      else if (mu[static_cast<std::size_t>(j)] != mu[*ref]) identical = false;
    }
    if (!ref) return F(player, s, std::size_t{0});
    if (identical) {
      const auto& p = mu[*ref];
      double total = 0.0;
      for (std::size_t r = 0; r < top.size(); ++r) {
        const double lp = multinomial_log_pmf(top.at(r), p);
        if (std::isinf(lp)) continue;
        total += F(player, s, r) * std::exp(lp);
      }
      return total;
    }
    std::vector<double> prob{1.0};
    int mass = 0;
    for (int j = 0; j < n(); ++j) {
      if (j == player) continue;
      const DistributionLattice& cur = *lattice(mass, m_);
      const DistributionLattice& nxt = *lattice(mass + 1, m_);
      std::vector<double> next(nxt.size(), 0.0);
      std::vector<int> c(static_cast<std::size_t>(m_));
      for (std::size_t r = 0; r < cur.size(); ++r) {
        if (prob[r] == 0.0) continue;
        const auto base = cur.at(r);
        for (int t = 0; t < m_; ++t) {
          const double q = mu[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)];
          if (q == 0.0) continue;
          std::copy(base.begin(), base.end(), c.begin());
          ++c[static_cast<std::size_t>(t)];
          next[nxt.rank(c)] += prob[r] * q;
        }
      }
      prob = std::move(next);
      ++mass;
    }
    double total = 0.0;
    for (std::size_t r = 0; r < prob.size(); ++r) total += F(player, s, r) * prob[r];
    return total;
  }

  /// max over players, strategies and adjacent distributions (one unit moved
  /// between two cells) of |F_i(s, d) - F_i(s, d')|.
  double adjacent_lipschitz() const {
    double worst = 0.0;
    const int blocks = symmetric_ ? 1 : n();
    const DistributionLattice& lat = *lattice_;
    std::vector<int> c(static_cast<std::size_t>(m_));
    for (int i = 0; i < blocks; ++i)
      for (std::size_t r = 0; r < lat.size(); ++r) {
        const auto d = lat.at(r);
        for (int from = 0; from < m_; ++from) {
          if (d[static_cast<std::size_t>(from)] == 0) continue;
          for (int to = 0; to < m_; ++to) {
            if (to == from) continue;
            std::copy(d.begin(), d.end(), c.begin());
            --c[static_cast<std::size_t>(from)];
            ++c[static_cast<std::size_t>(to)];
            const std::size_t r2 = lat.rank(c);
            for (int s = 0; s < m_; ++s) worst = std::max(worst, std::abs(F(i, s, r) - F(i, s, r2)));
          }
        }
      }
    return worst;
  }

 protected:
  AnonymousGame(GameKind kind, int n, int m, double delta, std::vector<double> table, bool symmetric)
      : Game(kind, std::vector<int>(static_cast<std::size_t>(n), m)),
        m_(m),
        delta_(delta),
        symmetric_(symmetric),
        lattice_(lattice(n - 1, m)) {
    require(n >= 1 && m >= 1, "anonymous game: need n >= 1 and m >= 1");
    require(delta >= 0.0, "anonymous game: delta must be nonnegative");
    const std::size_t size = lattice_->size();
    const std::size_t blocks = symmetric ? 1 : static_cast<std::size_t>(n);
    require(table.size() == blocks * static_cast<std::size_t>(m) * size,
            "anonymous game: F must have " + std::to_string(blocks * static_cast<std::size_t>(m) * size) + " entries");
    // reorder from (player, strategy, rank) to (player, rank, strategy)
    values_.resize(table.size());
    for (std::size_t b = 0; b < blocks; ++b)
      for (std::size_t s = 0; s < static_cast<std::size_t>(m); ++s)
        for (std::size_t r = 0; r < size; ++r)
          values_[(b * size + r) * static_cast<std::size_t>(m) + s] = table[(b * static_cast<std::size_t>(m) + s) * size + r];
    constant_.assign(blocks * static_cast<std::size_t>(m), true);
    for (std::size_t b = 0; b < blocks; ++b)
      for (std::size_t s = 0; s < static_cast<std::size_t>(m); ++s)
        for (std::size_t r = 1; r < size; ++r)
          if (table[(b * static_cast<std::size_t>(m) + s) * size + r] != table[(b * static_cast<std::size_t>(m) + s) * size]) {
            constant_[b * static_cast<std::size_t>(m) + s] = false;
            break;
          }
    const double observed = adjacent_lipschitz();
    require(observed <= delta + 1e-12, "anonymous game: F violates the declared Lipschitz constant (" +
                                           std::to_string(observed) + " > " + std::to_string(delta) + ")");
  }

 private:
  std::size_t slot(int player, std::size_t rank) const {
    const std::size_t b = symmetric_ ? 0 : static_cast<std::size_t>(player);
    return (b * lattice_->size() + rank) * static_cast<std::size_t>(m_);
  }
  std::size_t constant_slot(int player, int s) const {
    const std::size_t b = symmetric_ ? 0 : static_cast<std::size_t>(player);
    return b * static_cast<std::size_t>(m_) + static_cast<std::size_t>(s);
  }

  int m_;
  double delta_;
  bool symmetric_;
  std::shared_ptr<const DistributionLattice> lattice_;
  std::vector<double> values_;
  std::vector<bool> constant_;
};

/// Random anonymous game whose F_i(s, .) are random walks over the lattice:
/// distributions are visited in colex order and each new value is its
/// neighbour's value plus a uniform step in [-delta, delta], clamped into the
/// interval still consistent with every value assigned so far. The result
/// satisfies |F(s,d) - F(s,d')| <= delta ||d - d'||_1 / 2 everywhere.
inline std::shared_ptr<AnonymousGame> random_anonymous(int n, int m, double delta, std::uint64_t seed) {
  require(n >= 1 && m >= 1 && delta >= 0.0, "random_anonymous: need n, m >= 1 and delta >= 0");
  const DistributionLattice& lat = *lattice(n - 1, m);
  const std::size_t size = lat.size();
  Rng rng(seed);
  std::vector<double> table(static_cast<std::size_t>(n) * static_cast<std::size_t>(m) * size);
  std::vector<int> c(static_cast<std::size_t>(m));
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < m; ++s) {
      double* v = table.data() + (static_cast<std::size_t>(i) * static_cast<std::size_t>(m) + static_cast<std::size_t>(s)) * size;
      v[0] = rng.uniform01();
      for (std::size_t r = 1; r < size; ++r) {
        const auto d = lat.at(r);
        // predecessor: move one unit from the highest occupied cell above 0 into cell 0
        std::copy(d.begin(), d.end(), c.begin());
        std::size_t t = c.size() - 1;
        while (c[t] == 0) --t;
        --c[t];
        ++c[0];
        const double step = v[lat.rank(c)] + rng.uniform(-delta, delta);
        double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
        for (std::size_t q = 0; q < r; ++q) {
          double dist = 0.0;
          const auto e = lat.at(q);
          for (std::size_t k = 0; k < c.size(); ++k) dist += std::abs(d[k] - e[k]);
          dist *= 0.5;
          lo = std::max(lo, v[q] - delta * dist);
          hi = std::min(hi, v[q] + delta * dist);
        }
        v[r] = std::clamp(step, lo, hi);
      }
    }
  return std::make_shared<AnonymousGame>(n, m, delta, std::move(table));
}

// ---------------------------------------------------------------------------
// The auxiliary continuous game.

/// Lipschitz extension of F_i(s, .) from D_{n-1}(S) to Delta_{n-1}(S):
/// max over d of F_i(s, d) - delta ||d - x||_1 / 2.
inline double lipschitz_extension(const AnonymousGame& g, int player, int s, std::span<const double> x) {
  require(x.size() == static_cast<std::size_t>(g.m()), "lipschitz_extension: point has wrong dimension");
  const DistributionLattice& lat = g.opponents_lattice();
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < lat.size(); ++r) {
    const auto d = lat.at(r);
    double dist = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) dist += std::abs(d[t] - x[t]);
    best = std::max(best, g.F(player, s, r) - g.delta() * dist / 2);
  }
  return best;
}

inline double lipschitz_extension(const AnonymousGame& g, int player, int s, const SimplexPoint& x) {
  require(std::abs(x.mass - (g.n() - 1)) <= 1e-9, "lipschitz_extension: point must have mass n - 1");
  return lipschitz_extension(g, player, s, x.weights);
}

/// Extended payoffs of every strategy of `player` at the same point x.
inline std::vector<double> extension_values(const AnonymousGame& g, int player, std::span<const double> x) {
  const DistributionLattice& lat = g.opponents_lattice();
  std::vector<double> best(static_cast<std::size_t>(g.m()), -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < lat.size(); ++r) {
    const auto d = lat.at(r);
    double dist = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) dist += std::abs(d[t] - x[t]);
    const double penalty = g.delta() * dist / 2;
    for (int s = 0; s < g.m(); ++s) best[static_cast<std::size_t>(s)] = std::max(best[static_cast<std::size_t>(s)], g.F(player, s, r) - penalty);
  }
  return best;
}

namespace detail {

inline std::vector<double> opponents_sum(std::span<const SimplexPoint> p, int player, int m) {
  std::vector<double> x(static_cast<std::size_t>(m), 0.0);
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (static_cast<int>(j) == player) continue;
    for (std::size_t t = 0; t < x.size(); ++t) x[t] += p[j].weights[t];
  }
  return x;
}

}  // namespace detail

/// R_i(p) = sum_s p_i[s] F_i(s, sum_{j != i} p_j).
inline double auxiliary_payoff(const AnonymousGame& g, int player, std::span<const SimplexPoint> p) {
  require(p.size() == static_cast<std::size_t>(g.n()), "auxiliary_payoff: need one point per player");
  const auto x = detail::opponents_sum(p, player, g.m());
  const auto v = extension_values(g, player, x);
  double total = 0.0;
  for (int s = 0; s < g.m(); ++s) total += p[static_cast<std::size_t>(player)].weights[static_cast<std::size_t>(s)] * v[static_cast<std::size_t>(s)];
  return total;
}

namespace detail {

using Mixed = std::vector<std::vector<double>>;

/// Extended payoffs V[i][s] = F_i(s, X - p_i) for the whole profile. In
/// symmetric games players with identical strategies share one evaluation.
inline Mixed auxiliary_values(const AnonymousGame& g, const Mixed& p) {
  const int n = g.n(), m = g.m();
  std::vector<double> total(static_cast<std::size_t>(m), 0.0);
  for (const auto& pi : p)
    for (int t = 0; t < m; ++t) total[static_cast<std::size_t>(t)] += pi[static_cast<std::size_t>(t)];
  Mixed v(static_cast<std::size_t>(n));
  std::map<std::vector<double>, std::size_t> seen;
  std::vector<double> x(static_cast<std::size_t>(m));
  for (int i = 0; i < n; ++i) {
    const auto& pi = p[static_cast<std::size_t>(i)];
    if (g.symmetric()) {
      if (auto it = seen.find(pi); it != seen.end()) {
        v[static_cast<std::size_t>(i)] = v[it->second];
        continue;
      }
    }
    for (int t = 0; t < m; ++t) x[static_cast<std::size_t>(t)] = std::max(0.0, total[static_cast<std::size_t>(t)] - pi[static_cast<std::size_t>(t)]);
    v[static_cast<std::size_t>(i)] = extension_values(g, i, x);
    if (g.symmetric()) seen.emplace(pi, static_cast<std::size_t>(i));
  }
  return v;
}

/// Worst violation of the support condition: over players and strategies
/// with weight above `threshold`, the gap to the best extended payoff.
inline double support_slack(const Mixed& p, const Mixed& v, double threshold) {
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double best = *std::max_element(v[i].begin(), v[i].end());
    for (std::size_t s = 0; s < p[i].size(); ++s)
      if (p[i][s] > threshold) worst = std::max(worst, best - v[i][s]);
  }
  return worst;
}

/// Zeroes weights at or below tol and renormalizes.
inline Mixed clean(Mixed p, double tol) {
  for (auto& pi : p) {
    double sum = 0.0;
    for (double& w : pi) {
      if (w <= tol) w = 0.0;
      sum += w;
    }
    if (sum <= 0.0) {
      pi.assign(pi.size(), 0.0);
      pi[0] = 1.0;
      continue;
    }
    for (double& w : pi) w /= sum;
  }
  return p;
}

/// Newton's method on the indifference conditions of the players whose
/// near-optimal set (gap <= eta) has more than one strategy; everyone else
/// is snapped to a best response. Strategies whose weight turns negative are
/// dropped and the solve is repeated.
inline Mixed polish(const AnonymousGame& g, const Mixed& start, double eta, int max_newton) {
  const int n = g.n(), m = g.m();
  Mixed p = start;
  const Mixed v0 = auxiliary_values(g, p);
  std::vector<std::vector<int>> support(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& vi = v0[static_cast<std::size_t>(i)];
    const double best = *std::max_element(vi.begin(), vi.end());
    const int br = static_cast<int>(std::max_element(vi.begin(), vi.end()) - vi.begin());
    for (int s = 0; s < m; ++s)
      if (best - vi[static_cast<std::size_t>(s)] <= eta && (s == br || p[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)] > 0.0))
        support[static_cast<std::size_t>(i)].push_back(s);
  }

  for (int round = 0; round < 2 * n * m; ++round) {
    // restrict and renormalize
    for (int i = 0; i < n; ++i) {
      auto& pi = p[static_cast<std::size_t>(i)];
      const auto& sup = support[static_cast<std::size_t>(i)];
      double sum = 0.0;
      for (int s : sup) sum += pi[static_cast<std::size_t>(s)];
      std::vector<double> q(static_cast<std::size_t>(m), 0.0);
      for (int s : sup) q[static_cast<std::size_t>(s)] = sum > 0.0 ? pi[static_cast<std::size_t>(s)] / sum : 1.0 / static_cast<double>(sup.size());
      pi = std::move(q);
    }
    std::vector<std::pair<int, int>> vars;  // (player, strategy) with implicit first-support remainder
    for (int i = 0; i < n; ++i) {
      const auto& sup = support[static_cast<std::size_t>(i)];
      for (std::size_t k = 1; k < sup.size(); ++k) vars.emplace_back(i, sup[k]);
    }
    if (vars.empty()) return p;
    const auto k = static_cast<Eigen::Index>(vars.size());

    auto set = [&](Mixed& q, const Eigen::VectorXd& z) {
      for (Eigen::Index r = 0; r < k; ++r) q[static_cast<std::size_t>(vars[static_cast<std::size_t>(r)].first)][static_cast<std::size_t>(vars[static_cast<std::size_t>(r)].second)] = z(r);
      for (int i = 0; i < n; ++i) {
        const auto& sup = support[static_cast<std::size_t>(i)];
        if (sup.size() < 2) continue;
        double rest = 1.0;
        for (std::size_t t = 1; t < sup.size(); ++t) rest -= q[static_cast<std::size_t>(i)][static_cast<std::size_t>(sup[t])];
        q[static_cast<std::size_t>(i)][static_cast<std::size_t>(sup[0])] = rest;
      }
    };
    auto residual = [&](const Mixed& q) {
      const Mixed v = auxiliary_values(g, q);
      Eigen::VectorXd res(k);
      for (Eigen::Index r = 0; r < k; ++r) {
        const auto [i, s] = vars[static_cast<std::size_t>(r)];
        res(r) = v[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)] - v[static_cast<std::size_t>(i)][static_cast<std::size_t>(support[static_cast<std::size_t>(i)][0])];
      }
      return res;
    };

    Eigen::VectorXd z(k);
    for (Eigen::Index r = 0; r < k; ++r) z(r) = p[static_cast<std::size_t>(vars[static_cast<std::size_t>(r)].first)][static_cast<std::size_t>(vars[static_cast<std::size_t>(r)].second)];
    Eigen::VectorXd res = residual(p);
    constexpr double h = 1e-7;
    for (int it = 0; it < max_newton && res.lpNorm<Eigen::Infinity>() > 1e-13; ++it) {
      Eigen::MatrixXd jac(k, k);
      for (Eigen::Index c = 0; c < k; ++c) {
        Eigen::VectorXd zc = z;
        zc(c) += h;
        Mixed q = p;
        set(q, zc);
        jac.col(c) = (residual(q) - res) / h;
      }
      const Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-res);
      if (!step.allFinite()) break;
      double lambda = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
        Eigen::VectorXd zt = z + lambda * step;
        Mixed q = p;
        set(q, zt);
        const Eigen::VectorXd rt = residual(q);
        if (rt.norm() < res.norm() * (1.0 - 1e-4 * lambda)) {
          z = zt;
          p = std::move(q);
          res = rt;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }

    // drop the most negative weight, if any, and solve again
    int worst_i = -1, worst_s = -1;
    double worst_w = -1e-12;
    for (int i = 0; i < n; ++i)
      for (int s : support[static_cast<std::size_t>(i)])
        if (p[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)] < worst_w) {
          worst_w = p[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
          worst_i = i;
          worst_s = s;
        }
    if (worst_i < 0) {
      for (auto& pi : p)
        for (double& w : pi) w = std::max(0.0, w);
      return p;
    }
    auto& sup = support[static_cast<std::size_t>(worst_i)];
    sup.erase(std::find(sup.begin(), sup.end(), worst_s));
    p[static_cast<std::size_t>(worst_i)][static_cast<std::size_t>(worst_s)] = 0.0;
  }
  for (auto& pi : p)
    for (double& w : pi) w = std::max(0.0, w);
  return p;
}

}  // namespace detail

struct AuxiliarySolution {
  std::vector<SimplexPoint> profile;  ///< weights at or below tol removed
  double slack = 0.0;                 ///< achieved support-condition slack
  bool converged = false;             ///< slack <= tol
  int iterations = 0;
  int restarts = 0;
};

/// Approximate equilibrium of the auxiliary game in which each player picks a
/// point of the simplex. Damped simultaneous best response
/// p <- (1 - g_t) p + g_t BR(p), g_t = 1/(t+2), with periodic Newton polishing
/// of the indifference conditions. On stall the solver restarts, first with
/// pure best-response dynamics on the original game, then from seeded random
/// profiles. Non-convergence is reported through `converged` and `slack`.
inline AuxiliarySolution solve_auxiliary(const AnonymousGame& g, double tol = 1e-6, int max_iters = 4000,
                                         std::uint64_t seed = 0, int max_restarts = 4) {
  const int n = g.n(), m = g.m();
  using detail::Mixed;
  Mixed best_p;
  double best_slack = std::numeric_limits<double>::infinity();
  AuxiliarySolution out;

  auto consider = [&](const Mixed& raw) {
    const Mixed q = detail::clean(raw, tol);
    const double slack = detail::support_slack(q, detail::auxiliary_values(g, q), 0.0);
    if (slack < best_slack) {
      best_slack = slack;
      best_p = q;
    }
    return slack <= tol;
  };

  auto polish_and_check = [&](const Mixed& p) {
    for (double eta : {1e-4, 1e-3, 1e-2, 5e-2})
      if (consider(detail::polish(g, p, eta, 50))) return true;
    return false;
  };

  Rng rng(seed);
  bool done = false;
  for (int restart = 0; restart <= max_restarts && !done; ++restart) {
    out.restarts = restart;
    Mixed p(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(m), 1.0 / m));
    if (restart == 1) {
      // pure best-response dynamics from the best responses to the current best iterate
      PureProfile a(static_cast<std::size_t>(n), 0);
      const Mixed v = detail::auxiliary_values(g, best_p.empty() ? p : best_p);
      for (int i = 0; i < n; ++i)
        a[static_cast<std::size_t>(i)] = static_cast<int>(std::max_element(v[static_cast<std::size_t>(i)].begin(), v[static_cast<std::size_t>(i)].end()) - v[static_cast<std::size_t>(i)].begin());
      const auto dyn = best_response_dynamics(g, a, 50 * n, derive_seed(seed, 1), 0.0);
      Mixed q(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(m), 0.0));
      for (int i = 0; i < n; ++i) q[static_cast<std::size_t>(i)][static_cast<std::size_t>(dyn.profile[static_cast<std::size_t>(i)])] = 1.0;
      if (consider(q)) break;
      p = std::move(q);
    } else if (restart >= 2) {
      for (auto& pi : p) {
        double sum = 0.0;
        for (double& w : pi) sum += (w = -std::log(1.0 - rng.uniform01()));
        for (double& w : pi) w /= sum;
      }
    }
    double last_best = best_slack;
    int stalls = 0;
    const int polish_every = std::max(50, max_iters / 20);
    for (int t = 0; t < max_iters; ++t) {
      ++out.iterations;
      const Mixed v = detail::auxiliary_values(g, p);
      const double gamma = 1.0 / (t + 2.0);
      for (int i = 0; i < n; ++i) {
        const auto& vi = v[static_cast<std::size_t>(i)];
        const auto br = static_cast<std::size_t>(std::max_element(vi.begin(), vi.end()) - vi.begin());
        for (std::size_t s = 0; s < static_cast<std::size_t>(m); ++s)
          p[static_cast<std::size_t>(i)][s] = (1.0 - gamma) * p[static_cast<std::size_t>(i)][s] + (s == br ? gamma : 0.0);
      }
      if ((t + 1) % polish_every == 0 || t + 1 == max_iters) {
        if (polish_and_check(p)) {
          done = true;
          break;
        }
        if (best_slack < last_best * 0.5) {
          last_best = best_slack;
          stalls = 0;
        } else if (++stalls >= 4) {
          break;
        }
      }
    }
  }
  out.slack = best_slack;
  out.converged = best_slack <= tol;
  out.profile.reserve(static_cast<std::size_t>(n));
  for (auto& pi : best_p) out.profile.emplace_back(pi, 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// Shapley-Folkman rounding.

struct RoundingResult {
  PureProfile profile;
  double l1_gap = 0.0;            ///< ||sum_i 1^{s_i} - sum_i p_i||_1
  double max_opponent_gap = 0.0;  ///< max_i ||sum_{j != i} 1^{s_j} - sum_{j != i} p_j||_1
  int fractional = 0;             ///< players still mixing when the exchange phase stopped
  int pivots = 0;
  double drift = 0.0;             ///< ||sum_i q_i - sum_i p_i||_1 before the final substitutions
};

namespace detail {

/// Nonzero kernel vector of a matrix with more columns than rank.
inline std::vector<double> kernel_vector(const Eigen::MatrixXd& a) {
  const Eigen::MatrixXd k = Eigen::FullPivLU<Eigen::MatrixXd>(a).kernel();
  std::vector<double> out(static_cast<std::size_t>(a.cols()), 0.0);
  if (k.cols() == 0 || k.col(0).isZero()) return out;
  for (Eigen::Index c = 0; c < a.cols(); ++c) out[static_cast<std::size_t>(c)] = k(c, 0);
  return out;
}

}  // namespace detail

/// Rounds mixed strategies to a pure profile while keeping the aggregate
/// close. Exchange phase: while more than m - 1 players mix, a nonzero
/// combination of their in-face directions sums to zero; moving along it
/// preserves sum_i p_i and is continued until some weight reaches zero. Each
/// remaining mixer then takes the lowest strategy of its support, so the
/// aggregate moves by at most 2(m - 1) in L1.
inline RoundingResult shapley_folkman_round(std::span<const SimplexPoint> p,
                                            const std::vector<std::vector<int>>& supports) {
  require(!p.empty(), "shapley_folkman_round: empty profile");
  require(supports.size() == p.size(), "shapley_folkman_round: one support per player");
  const std::size_t n = p.size();
  const std::size_t m = p[0].weights.size();
  constexpr double kSnap = 1e-12;

  std::vector<std::vector<double>> q(n);
  for (std::size_t i = 0; i < n; ++i) {
    require(p[i].weights.size() == m, "shapley_folkman_round: points have different dimensions");
    require(!supports[i].empty(), "shapley_folkman_round: empty support for player " + std::to_string(i));
    q[i].assign(m, 0.0);
    double sum = 0.0;
    for (int s : supports[i]) {
      require(s >= 0 && static_cast<std::size_t>(s) < m, "shapley_folkman_round: support strategy out of range");
      q[i][static_cast<std::size_t>(s)] = p[i].weights[static_cast<std::size_t>(s)];
      sum += q[i][static_cast<std::size_t>(s)];
    }
    if (sum <= 0.0) {
      q[i][static_cast<std::size_t>(supports[i][0])] = 1.0;
    } else {
      for (double& w : q[i]) w /= sum;
    }
  }

  RoundingResult res;
  std::vector<double> target(m, 0.0);
  for (const auto& pi : p)
    for (std::size_t t = 0; t < m; ++t) target[t] += pi.weights[t];

  auto positive = [&](std::size_t i) {
    std::vector<std::size_t> s;
    for (std::size_t t = 0; t < m; ++t)
      if (q[i][t] > 0.0) s.push_back(t);
    return s;
  };

  while (true) {
    std::vector<std::size_t> mixers;
    for (std::size_t i = 0; i < n; ++i)
      if (positive(i).size() >= 2) mixers.push_back(i);
    if (mixers.size() <= m - 1) break;
    mixers.resize(m);  // m mixers carry at least m > m - 1 directions

    struct Column {
      std::size_t player, from, to;
    };
    std::vector<Column> columns;
    for (std::size_t i : mixers) {
      const auto s = positive(i);
      for (std::size_t k = 1; k < s.size(); ++k) columns.push_back({i, s[0], s[k]});
    }
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
      a(static_cast<Eigen::Index>(columns[c].to), static_cast<Eigen::Index>(c)) += 1.0;
      a(static_cast<Eigen::Index>(columns[c].from), static_cast<Eigen::Index>(c)) -= 1.0;
    }
    const std::vector<double> kv = detail::kernel_vector(a);
    if (std::all_of(kv.begin(), kv.end(), [](double v) { return v == 0.0; })) break;

    std::map<std::size_t, std::vector<double>> dir;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      auto& v = dir.try_emplace(columns[c].player, std::vector<double>(m, 0.0)).first->second;
      v[columns[c].to] += kv[c];
      v[columns[c].from] -= kv[c];
    }
    // largest steps in the + and - directions that keep every weight >= 0
    double up = std::numeric_limits<double>::infinity(), down = up;
    std::pair<std::size_t, std::size_t> up_hit{}, down_hit{};
    for (const auto& [i, v] : dir)
      for (std::size_t t = 0; t < m; ++t) {
        if (v[t] < -1e-15 && q[i][t] / -v[t] < up) {
          up = q[i][t] / -v[t];
          up_hit = {i, t};
        }
        if (v[t] > 1e-15 && q[i][t] / v[t] < down) {
          down = q[i][t] / v[t];
          down_hit = {i, t};
        }
      }
    const bool go_up = up <= down;
    const double step = go_up ? up : -down;
    const auto hit = go_up ? up_hit : down_hit;
    for (const auto& [i, v] : dir)
      for (std::size_t t = 0; t < m; ++t) {
        q[i][t] += step * v[t];
        if (q[i][t] < kSnap) q[i][t] = 0.0;
      }
    q[hit.first][hit.second] = 0.0;
    ++res.pivots;
  }

  std::vector<double> before(m, 0.0);
  for (const auto& qi : q)
    for (std::size_t t = 0; t < m; ++t) before[t] += qi[t];
  res.drift = l1_distance(before, target);

  std::vector<int> a(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = positive(i);
    if (s.size() >= 2) ++res.fractional;
    a[i] = static_cast<int>(s.front());
  }
  res.profile = PureProfile(std::move(a));

  std::vector<double> rounded(m, 0.0);
  for (int s : res.profile) rounded[static_cast<std::size_t>(s)] += 1.0;
  res.l1_gap = l1_distance(rounded, target);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> r = rounded, x = target;
    r[static_cast<std::size_t>(res.profile[i])] -= 1.0;
    for (std::size_t t = 0; t < m; ++t) x[t] -= p[i].weights[t];
    res.max_opponent_gap = std::max(res.max_opponent_gap, l1_distance(r, x));
  }
  return res;
}

// ---------------------------------------------------------------------------

struct AnonymousPurification {
  PureProfile profile;
  double max_regret = 0.0;
  double bound = 0.0;  ///< 2 m delta + solver slack
  bool within_bound = false;
  bool chain_holds = false;  ///< extension-Lipschitz / optimality / extension-Lipschitz chain
  AuxiliarySolution auxiliary;
  RoundingResult rounding;
};

/// Solve the auxiliary game, round with Shapley-Folkman, and verify that the
/// pure profile is a (2 m delta + slack)-equilibrium of the original game.
inline AnonymousPurification anonymous_purify(const AnonymousGame& g, double tol = 1e-6, std::uint64_t seed = 0,
                                              int max_iters = 4000) {
  AnonymousPurification out;
  out.auxiliary = solve_auxiliary(g, tol, max_iters, seed);
  const auto& pbar = out.auxiliary.profile;
  std::vector<std::vector<int>> supports(pbar.size());
  for (std::size_t i = 0; i < pbar.size(); ++i)
    for (std::size_t s = 0; s < pbar[i].weights.size(); ++s)
      if (pbar[i].weights[s] > tol) supports[i].push_back(static_cast<int>(s));
  out.rounding = shapley_folkman_round(pbar, supports);
  out.profile = out.rounding.profile;
  out.max_regret = max_regret(g, out.profile);
  const double md = g.m() * g.delta();
  out.bound = 2.0 * md + out.auxiliary.slack;
  out.within_bound = out.max_regret <= out.bound + 1e-9;

  out.chain_holds = true;
  const DeviationTable pure = g.all_deviation_payoffs(out.profile.view());
  for (int i = 0; i < g.n() && out.chain_holds; ++i) {
    const auto x = detail::opponents_sum(pbar, i, g.m());
    const auto ext = extension_values(g, i, x);
    const auto own = static_cast<std::size_t>(out.profile[static_cast<std::size_t>(i)]);
    const auto row = pure.row(static_cast<std::size_t>(i));
    for (std::size_t s = 0; s < row.size(); ++s) {
      if (row[s] > ext[s] + md + 1e-9) out.chain_holds = false;
      if (ext[s] > ext[own] + out.auxiliary.slack + 1e-9) out.chain_holds = false;
    }
    if (ext[own] + md > row[own] + 2 * md + 1e-9) out.chain_holds = false;
  }
  return out;
}

}  // namespace lipgame
