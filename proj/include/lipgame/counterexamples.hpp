#pragma once

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "analysis.hpp"
#include "anonymous.hpp"
#include "errors.hpp"
#include "game.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace lipgame {

// Strategy encoding shared by the sign-valued games: index 0 is +1, index 1
// is -1; bit b of a vector-valued strategy encodes coordinate b the same way.
inline int sign_of(int index) { return index == 0 ? 1 : -1; }
inline int sign_bit(int strategy, int b) { return (strategy >> b & 1) ? -1 : 1; }

/// K(t): identity on [-1, 1], sign outside.
inline double truncate(double t) { return std::clamp(t, -1.0, 1.0); }

/// k x k matrix with entries in {+1, -1}.
class SignMatrix {
 public:
  SignMatrix() = default;
  explicit SignMatrix(std::vector<std::vector<int>> rows) : k_(static_cast<int>(rows.size())) {
    require(k_ >= 1, "sign matrix: need k >= 1");
    entries_.reserve(static_cast<std::size_t>(k_) * static_cast<std::size_t>(k_));
    for (const auto& row : rows) {
      require(row.size() == static_cast<std::size_t>(k_), "sign matrix: must be square");
      for (int v : row) {
        require(v == 1 || v == -1, "sign matrix: entries must be +1 or -1");
        entries_.push_back(static_cast<std::int8_t>(v));
      }
    }
  }

  static SignMatrix random(int k, Rng& rng) {
    std::vector<std::vector<int>> rows(static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(k)));
    for (auto& row : rows)
      for (int& v : row) v = rng.sign();
    return SignMatrix(std::move(rows));
  }

  static SignMatrix filled(int k, int value) {
    return SignMatrix(std::vector<std::vector<int>>(static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(k), value)));
  }

  int k() const noexcept { return k_; }
  int operator()(int i, int j) const { return entries_[static_cast<std::size_t>(i) * static_cast<std::size_t>(k_) + static_cast<std::size_t>(j)]; }

  std::vector<std::vector<int>> rows() const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(k_));
    for (int i = 0; i < k_; ++i)
      for (int j = 0; j < k_; ++j) out[static_cast<std::size_t>(i)].push_back((*this)(i, j));
    return out;
  }

  bool operator==(const SignMatrix&) const = default;

 private:
  int k_ = 0;
  std::vector<std::int8_t> entries_;
};

// ---------------------------------------------------------------------------
// Gale-Berlekamp game: k "female" players choose rows x_i, k "male" players
// choose columns y_j, u_i = delta x_i (M y)_i and v_j = -delta y_j (x M)_j,
// each truncated to [-1, 1]. Players 0..k-1 are female, k..2k-1 male.

class GaleBerlekampGame final : public Game {
 public:
  GaleBerlekampGame(SignMatrix m, double delta, std::optional<std::uint64_t> seed = std::nullopt)
      : Game(GameKind::gale_berlekamp, std::vector<int>(static_cast<std::size_t>(2 * m.k()), 2)),
        m_(std::move(m)),
        delta_(delta),
        seed_(seed) {}

  static double default_delta(int k) { return 20.0 / std::sqrt(static_cast<double>(k)); }

  int k() const noexcept { return m_.k(); }
  double delta() const noexcept { return delta_; }
  const SignMatrix& matrix() const noexcept { return m_; }
  std::optional<std::uint64_t> seed() const noexcept { return seed_; }

  /// Untruncated payoff divided by delta; an integer.
  long untruncated_units(int player, std::span<const int> a) const {
    const int k = m_.k();
    long s = 0;
    if (player < k) {
      for (int j = 0; j < k; ++j) s += m_(player, j) * sign_of(a[static_cast<std::size_t>(k + j)]);
      return sign_of(a[static_cast<std::size_t>(player)]) * s;
    }
    const int j = player - k;
    for (int i = 0; i < k; ++i) s += m_(i, j) * sign_of(a[static_cast<std::size_t>(i)]);
    return -sign_of(a[static_cast<std::size_t>(player)]) * s;
  }

  double untruncated(int player, std::span<const int> a) const { return delta_ * static_cast<double>(untruncated_units(player, a)); }

  double payoff(int player, std::span<const int> a) const override { return truncate(untruncated(player, a)); }

  DeviationTable all_deviation_payoffs(std::span<const int> a) const override {
    const int k = m_.k();
    std::vector<long> my(static_cast<std::size_t>(k), 0), xm(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        my[static_cast<std::size_t>(i)] += m_(i, j) * sign_of(a[static_cast<std::size_t>(k + j)]);
        xm[static_cast<std::size_t>(j)] += m_(i, j) * sign_of(a[static_cast<std::size_t>(i)]);
      }
    DeviationTable t(strategy_counts());
    for (int i = 0; i < k; ++i) {
      auto row = t.row(static_cast<std::size_t>(i));
      row[0] = truncate(delta_ * static_cast<double>(my[static_cast<std::size_t>(i)]));
      row[1] = truncate(delta_ * static_cast<double>(-my[static_cast<std::size_t>(i)]));
    }
    for (int j = 0; j < k; ++j) {
      auto row = t.row(static_cast<std::size_t>(k + j));
      row[0] = truncate(delta_ * static_cast<double>(-xm[static_cast<std::size_t>(j)]));
      row[1] = truncate(delta_ * static_cast<double>(xm[static_cast<std::size_t>(j)]));
    }
    return t;
  }

  void deviation_payoffs(int player, std::span<const int> a, std::span<double> out) const override {
    std::vector<int> b(a.begin(), a.end());
    b[static_cast<std::size_t>(player)] = 0;
    const double plus = untruncated(player, b);
    out[0] = truncate(plus);
    out[1] = truncate(-plus);
  }

  std::optional<double> lipschitz_bound() const override { return 2.0 * delta_; }

  /// The opponents' signed sum is a sum of independent +-1 terms, so its
  /// distribution is a convolution over k + 1 values.
  std::optional<double> closed_form_expectation(int player, int strategy, const MixedProfile& mu) const override {
    const int k = m_.k();
    std::vector<double> dist(static_cast<std::size_t>(2 * k + 1), 0.0), next(dist.size());
    dist[static_cast<std::size_t>(k)] = 1.0;
    const bool female = player < k;
    for (int q = 0; q < k; ++q) {
      const int other = female ? k + q : q;
      const int coeff = female ? m_(player, q) : m_(q, player - k);
      const double p_plus = mu[static_cast<std::size_t>(other)][0];
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t v = 0; v < dist.size(); ++v) {
        if (dist[v] == 0.0) continue;
        next[static_cast<std::size_t>(static_cast<int>(v) + coeff)] += dist[v] * p_plus;
        next[static_cast<std::size_t>(static_cast<int>(v) - coeff)] += dist[v] * (1.0 - p_plus);
      }
      std::swap(dist, next);
    }
    const int own = female ? sign_of(strategy) : -sign_of(strategy);
    double total = 0.0;
    for (std::size_t v = 0; v < dist.size(); ++v)
      if (dist[v] != 0.0) total += dist[v] * truncate(delta_ * own * (static_cast<int>(v) - k));
    return total;
  }

 private:
  SignMatrix m_;
  double delta_;
  std::optional<std::uint64_t> seed_;
};

inline std::shared_ptr<GaleBerlekampGame> build_gb_game(const SignMatrix& m, std::optional<double> delta = std::nullopt,
                                                        std::optional<std::uint64_t> seed = std::nullopt) {
  return std::make_shared<GaleBerlekampGame>(m, delta.value_or(GaleBerlekampGame::default_delta(m.k())), seed);
}

// ---------------------------------------------------------------------------
// Discrepancy property: for every row vector x in {+-1}^k, more than k/3
// columns have |(xM)_j| > sqrt(k)/20.

/// |z| > sqrt(k)/20, in integers.
inline bool large_column(long z, int k) { return 400 * z * z > k; }

struct DiscrepancyMode {
  enum class Kind { exhaustive, monte_carlo } kind = Kind::exhaustive;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;

  static DiscrepancyMode exhaustive() { return {}; }
  static DiscrepancyMode monte_carlo(std::uint64_t samples, std::uint64_t seed) {
    return {Kind::monte_carlo, samples, seed};
  }
};

struct DiscrepancyResult {
  bool holds = true;
  std::vector<int> worst_x;  ///< +-1 vector with the fewest large columns
  int worst_count = 0;       ///< its number of large columns
  std::uint64_t checked = 0;
};

namespace detail {

struct ScanPart {
  int worst = std::numeric_limits<int>::max();
  std::uint64_t worst_index = 0;
};

inline std::vector<int> gray_vector(int k, std::uint64_t index) {
  const std::uint64_t gray = index ^ (index >> 1);
  std::vector<int> x(static_cast<std::size_t>(k), 1);
  for (int b = 0; b + 1 < k; ++b)
    if (gray >> b & 1) x[static_cast<std::size_t>(b + 1)] = -1;
  return x;
}

/// Walks the Gray-code order of x with x_0 = +1 (x and -x have the same
/// column magnitudes). With `stop` set, gives up as soon as any chunk fails.
inline ScanPart scan_chunk(const SignMatrix& m, std::uint64_t begin, std::uint64_t end, std::atomic<bool>* stop) {
  const int k = m.k();
  ScanPart part;
  if (begin >= end) return part;
  std::vector<int> x = gray_vector(k, begin);
  std::vector<long> z(static_cast<std::size_t>(k), 0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) z[static_cast<std::size_t>(j)] += x[static_cast<std::size_t>(i)] * m(i, j);
  for (std::uint64_t g = begin;; ++g) {
    int count = 0;
    for (long v : z) count += large_column(v, k);
    if (count < part.worst) {
      part.worst = count;
      part.worst_index = g;
    }
    if (stop) {
      if (3 * count <= k) {
        stop->store(true, std::memory_order_relaxed);
        return part;
      }
      if ((g & 1023) == 0 && stop->load(std::memory_order_relaxed)) return part;
    }
    if (g + 1 == end) break;
    const int row = std::countr_zero(g + 1) + 1;
    int& xi = x[static_cast<std::size_t>(row)];
    xi = -xi;
    for (int j = 0; j < k; ++j) z[static_cast<std::size_t>(j)] += 2L * xi * m(row, j);
  }
  return part;
}

inline void check_discrepancy_budget(int k, const Limits& limits) {
  const std::uint64_t need = k >= 63 ? std::numeric_limits<std::uint64_t>::max() : std::uint64_t{1} << k;
  if (need > limits.budget) throw BudgetExceeded("exhaustive discrepancy check", need, limits.budget);
}

inline constexpr unsigned kScanChunks = 64;

}  // namespace detail

inline DiscrepancyResult verify_discrepancy(const SignMatrix& m, const DiscrepancyMode& mode = {},
                                            const Limits& limits = {}) {
  const int k = m.k();
  DiscrepancyResult res;
  if (mode.kind == DiscrepancyMode::Kind::exhaustive) {
    detail::check_discrepancy_budget(k, limits);
    const std::uint64_t total = std::uint64_t{1} << (k - 1);
    std::vector<detail::ScanPart> parts(detail::kScanChunks);
    for_each_chunk(total, detail::kScanChunks, limits.threads, [&](unsigned c, std::uint64_t b, std::uint64_t e) {
      parts[c] = detail::scan_chunk(m, b, e, nullptr);
    });
    detail::ScanPart best;
    for (const auto& p : parts)
      if (p.worst < best.worst) best = p;
    res.checked = total;
    res.worst_count = best.worst;
    res.worst_x = detail::gray_vector(k, best.worst_index);
  } else {
    require(mode.samples >= 1, "verify_discrepancy: need at least one sample");
    const unsigned chunks = static_cast<unsigned>(std::min<std::uint64_t>(detail::kScanChunks, mode.samples));
    struct Part {
      int worst = std::numeric_limits<int>::max();
      std::vector<int> x;
    };
    std::vector<Part> parts(chunks);
    for_each_chunk(mode.samples, chunks, limits.threads, [&](unsigned c, std::uint64_t b, std::uint64_t e) {
      Rng rng(derive_seed(mode.seed, c));
      std::vector<int> x(static_cast<std::size_t>(k));
      for (std::uint64_t t = b; t < e; ++t) {
        for (int& v : x) v = rng.sign();
        int count = 0;
        for (int j = 0; j < k; ++j) {
          long z = 0;
          for (int i = 0; i < k; ++i) z += x[static_cast<std::size_t>(i)] * m(i, j);
          count += large_column(z, k);
        }
        if (count < parts[c].worst) parts[c] = {count, x};
      }
    });
    Part best;
    for (auto& p : parts)
      if (p.worst < best.worst) best = std::move(p);
    res.checked = mode.samples;
    res.worst_count = best.worst;
    res.worst_x = std::move(best.x);
  }
  res.holds = 3 * res.worst_count > k;
  return res;
}

struct GbMatrixSearch {
  SignMatrix matrix;
  int attempts = 0;
};

/// Resamples uniform sign matrices (attempt t seeded from (seed, t)) until
/// one has the discrepancy property, checked exhaustively.
inline GbMatrixSearch find_gb_matrix(int k, std::uint64_t seed, int max_attempts = 100, const Limits& limits = {}) {
  require(k >= 1, "find_gb_matrix: need k >= 1");
  detail::check_discrepancy_budget(k, limits);
  const std::uint64_t total = std::uint64_t{1} << (k - 1);
  for (int t = 0; t < max_attempts; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    SignMatrix m = SignMatrix::random(k, rng);
    std::atomic<bool> failed{false};
    for_each_chunk(total, detail::kScanChunks, limits.threads, [&](unsigned, std::uint64_t b, std::uint64_t e) {
      if (!failed.load(std::memory_order_relaxed)) detail::scan_chunk(m, b, e, &failed);
    });
    if (!failed.load()) return {std::move(m), t + 1};
  }
  throw NotFound("find_gb_matrix: no matrix with the discrepancy property in " + std::to_string(max_attempts) +
                 " attempts");
}

// ---------------------------------------------------------------------------
// Mass matching pennies: 2k players with 2^k strategies. Female i picks
// x_i in {+-1}^k, male j picks y_j in {+-1}^k; female i plays matching
// pennies against every male through the coordinates x_i[j] and y_j[i].

class MassMatchingPenniesGame final : public Game {
 public:
  explicit MassMatchingPenniesGame(int k)
      : Game(GameKind::mass_matching_pennies, std::vector<int>(static_cast<std::size_t>(2 * checked(k)), 1 << k)),
        k_(k) {}

  int k() const noexcept { return k_; }

  /// Payoff times 4k; an integer.
  int payoff_units(int player, std::span<const int> a) const {
    int s = 0;
    if (player < k_) {
      for (int j = 0; j < k_; ++j) s += sign_bit(a[static_cast<std::size_t>(player)], j) * sign_bit(a[static_cast<std::size_t>(k_ + j)], player);
      return s;
    }
    const int j = player - k_;
    for (int i = 0; i < k_; ++i) s += sign_bit(a[static_cast<std::size_t>(i)], j) * sign_bit(a[static_cast<std::size_t>(player)], i);
    return -s;
  }

  double payoff(int player, std::span<const int> a) const override { return payoff_units(player, a) / (4.0 * k_); }

  void deviation_payoffs(int player, std::span<const int> a, std::span<double> out) const override {
    // opponents' coordinates facing this player
    std::vector<int> c(static_cast<std::size_t>(k_));
    const bool female = player < k_;
    for (int q = 0; q < k_; ++q)
      c[static_cast<std::size_t>(q)] = female ? sign_bit(a[static_cast<std::size_t>(k_ + q)], player)
                                              : -sign_bit(a[static_cast<std::size_t>(q)], player - k_);
    for (int x = 0; x < (1 << k_); ++x) {
      int s = 0;
      for (int q = 0; q < k_; ++q) s += sign_bit(x, q) * c[static_cast<std::size_t>(q)];
      out[static_cast<std::size_t>(x)] = s / (4.0 * k_);
    }
  }

  std::optional<double> lipschitz_bound() const override { return 1.0 / (2.0 * k_); }

  std::optional<double> closed_form_expectation(int player, int strategy, const MixedProfile& mu) const override {
    const bool female = player < k_;
    const int own_coord = female ? player : player - k_;
    double total = 0.0;
    for (int q = 0; q < k_; ++q) {
      const auto& p = mu[static_cast<std::size_t>(female ? k_ + q : q)];
      double mean = 0.0;
      for (std::size_t s = 0; s < p.size(); ++s) mean += p[s] * sign_bit(static_cast<int>(s), own_coord);
      total += sign_bit(strategy, q) * mean;
    }
    return (female ? total : -total) / (4.0 * k_);
  }

 private:
  static int checked(int k) {
    require(k >= 1 && k <= 16, "mass matching pennies: need 1 <= k <= 16");
    return k;
  }
  int k_;
};

inline std::shared_ptr<MassMatchingPenniesGame> build_mass_mp_game(int k) {
  return std::make_shared<MassMatchingPenniesGame>(k);
}

// ---------------------------------------------------------------------------
// Restaurant: 2n+1 players choose H (0, cook at home) or R (1, restaurant).
// R pays g(number of other diners); H pays the constant E g(X), X ~ Bin(2n, 1/2).

inline constexpr double kRestaurantBand = 0.477;

inline double restaurant_g(int j, int n, double delta) {
  require(j >= 0 && j <= 2 * n, "restaurant_g: need 0 <= j <= 2n");
  const double dist = std::abs(j - n);
  const double band = kRestaurantBand * std::sqrt(static_cast<double>(n));
  if (dist <= band) return 1.0;
  return std::max(0.0, 1.0 - delta * (dist - band));
}

/// Exact E g(X), summed in log space. Uses the same multinomial weights as
/// the anonymous-game expectation so that both agree to the last bit.
inline double restaurant_home_payoff(int n, double delta) {
  require(n >= 1, "restaurant_home_payoff: need n >= 1");
  const double half[2] = {0.5, 0.5};
  double total = 0.0;
  for (int j = 0; j <= 2 * n; ++j) {
    const int counts[2] = {2 * n - j, j};
    total += restaurant_g(j, n, delta) * std::exp(multinomial_log_pmf(counts, half));
  }
  return total;
}

class RestaurantGame final : public AnonymousGame {
 public:
  RestaurantGame(int n, double delta)
      : AnonymousGame(GameKind::restaurant, 2 * n + 1, 2, delta, table(n, delta), true), half_(n), home_(restaurant_home_payoff(n, delta)) {}

  static constexpr int kHome = 0;
  static constexpr int kRestaurant = 1;

  /// The n of the construction (players = 2n + 1).
  int half() const noexcept { return half_; }
  double home_payoff() const noexcept { return home_; }

 private:
  static std::vector<double> table(int n, double delta) {
    require(n >= 1 && delta >= 0.0, "restaurant: need n >= 1 and delta >= 0");
    // with two cells the colex rank is the count in cell 1, i.e. the other diners
    const auto size = static_cast<std::size_t>(2 * n + 1);
    std::vector<double> t(2 * size);
    const double home = restaurant_home_payoff(n, delta);
    for (std::size_t r = 0; r < size; ++r) {
      t[r] = home;
      t[size + r] = restaurant_g(static_cast<int>(r), n, delta);
    }
    return t;
  }

  int half_;
  double home_;
};

inline std::shared_ptr<RestaurantGame> build_restaurant_game(int n, double delta) {
  return std::make_shared<RestaurantGame>(n, delta);
}

/// Max regret in a symmetric anonymous game from the strategy counts alone:
/// all players using the same strategy face the same opponents' distribution.
inline double symmetric_max_regret(const AnonymousGame& g, const Distribution& counts) {
  require(g.symmetric(), "symmetric_max_regret: game is not symmetric");
  require(counts.cells() == static_cast<std::size_t>(g.m()) && counts.mass() == g.n(),
          "symmetric_max_regret: counts must cover every player");
  double worst = 0.0;
  std::vector<int> d = counts.counts;
  for (int t = 0; t < g.m(); ++t) {
    if (counts.counts[static_cast<std::size_t>(t)] == 0) continue;
    --d[static_cast<std::size_t>(t)];
    const std::size_t r = g.opponents_lattice().rank(d);
    ++d[static_cast<std::size_t>(t)];
    double best = g.F(0, 0, r);
    for (int s = 1; s < g.m(); ++s) best = std::max(best, g.F(0, s, r));
    worst = std::max(worst, best - g.F(0, t, r));
  }
  return worst;
}

struct FailureRate {
  int n = 0;
  std::uint64_t samples = 0;
  std::uint64_t passed = 0;
  double probability = 0.0;
  double std_error = 0.0;
};

/// Fraction of profiles drawn from the uniform equilibrium of the restaurant
/// game that are pure eps-equilibria. Samples are generated in fixed chunks
/// seeded from (seed, chunk), so the result is independent of the thread count.
inline FailureRate purification_failure_experiment(int n, double delta, double eps, std::uint64_t samples,
                                                   std::uint64_t seed, const Limits& limits = {}) {
  require(samples >= 1, "purification_failure_experiment: need at least one sample");
  const RestaurantGame g(n, delta);
  const int players = g.n();
  constexpr unsigned kChunks = 64;
  const unsigned chunks = static_cast<unsigned>(std::min<std::uint64_t>(kChunks, samples));
  std::vector<std::uint64_t> passed(chunks, 0);
  // the pass/fail verdict depends only on the number of diners
  std::vector<int> verdict(static_cast<std::size_t>(players) + 1, -1);
  for (int r = 0; r <= players; ++r) {
    Distribution d{{players - r, r}};
    verdict[static_cast<std::size_t>(r)] = symmetric_max_regret(g, d) <= eps + limits.tol;
  }
  for_each_chunk(samples, chunks, limits.threads, [&](unsigned c, std::uint64_t b, std::uint64_t e) {
    Rng rng(derive_seed(seed, c));
    for (std::uint64_t t = b; t < e; ++t) {
      int diners = 0;
      for (int left = players; left > 0; left -= 64) {
        std::uint64_t bits = rng.next();
        if (left < 64) bits &= (std::uint64_t{1} << left) - 1;
        diners += std::popcount(bits);
      }
      passed[c] += static_cast<std::uint64_t>(verdict[static_cast<std::size_t>(diners)]);
    }
  });
  FailureRate out;
  out.n = n;
  out.samples = samples;
  for (auto p : passed) out.passed += p;
  out.probability = static_cast<double>(out.passed) / static_cast<double>(samples);
  out.std_error = std::sqrt(out.probability * (1.0 - out.probability) / static_cast<double>(samples));
  return out;
}

}  // namespace lipgame
