#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace lipgame {

/// Execution knobs shared by the exhaustive and sampling operations.
struct Limits {
  /// Maximum number of cells an exhaustive operation may evaluate.
  std::uint64_t budget = 10'000'000;
  /// Worker cap. Results never depend on this value.
  unsigned threads = 1;
  /// Additive slack on every equilibrium inequality.
  double tol = 1e-9;
};

/// Splits [0, count) into `chunks` contiguous ranges and runs
/// `body(chunk_index, begin, end)` for each, on up to `threads` workers.
/// Callers merge per-chunk results in chunk order.
template <typename Body>
void for_each_chunk(std::uint64_t count, unsigned chunks, unsigned threads, Body&& body) {
  chunks = std::max(1u, chunks);
  const auto range = [&](unsigned c) {
    const std::uint64_t begin = count * c / chunks;
    const std::uint64_t end = count * (c + 1) / chunks;
    return std::pair{begin, end};
  };
  threads = std::max(1u, std::min(threads, chunks));
  if (threads == 1) {
    for (unsigned c = 0; c < chunks; ++c) {
      auto [b, e] = range(c);
      body(c, b, e);
    }
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (unsigned c = t; c < chunks; c += threads) {
          auto [b, e] = range(c);
          body(c, b, e);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace lipgame
