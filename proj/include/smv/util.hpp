#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace smv {

// Pairwise (tree-order) summation. Deterministic: the reduction tree depends
// only on the length, never on thread scheduling.
inline double pairwise_sum(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("pairwise_mean: empty range");
  return pairwise_sum(v) / static_cast<double>(v.size());
}

// Sample standard deviation (n-1 normalization).
inline double sample_sd(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  const double m = pairwise_mean(v);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (v[i] - m) * (v[i] - m);
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(n - 1));
}

// Global worker count used by parallel_for. Set once from the CLI.
inline int& worker_count() {
  static int n = static_cast<int>(std::thread::hardware_concurrency());
  return n;
}

inline bool& in_parallel_region() {
  thread_local bool flag = false;
  return flag;
}

// Chunked parallel loop. Work is split into fixed-size chunks assigned to
// threads dynamically; any per-chunk output the caller collects must be
// indexed by chunk, so results are independent of the worker count. Nested
// calls from inside a worker run serially.
inline void parallel_for(std::size_t begin, std::size_t end,
                         const std::function<void(std::size_t, std::size_t)>& body,
                         std::size_t chunk = 0) {
  const std::size_t n = end > begin ? end - begin : 0;
  if (n == 0) return;
  int workers = std::max(1, worker_count());
  if (chunk == 0) chunk = std::max<std::size_t>(1, n / (4 * static_cast<std::size_t>(workers)));
  if (workers == 1 || n <= chunk || in_parallel_region()) {
    body(begin, end);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{begin};
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      in_parallel_region() = true;
      for (;;) {
        std::size_t lo = next.fetch_add(chunk);
        if (lo >= end) return;
        body(lo, std::min(end, lo + chunk));
      }
    });
  }
  for (auto& t : pool) t.join();
}

// FNV-1a, used for config hashes in run manifests.
inline std::uint64_t fnv1a(std::span<const char> bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s) {
  return fnv1a(std::span<const char>(s.data(), s.size()));
}

}  // namespace smv
