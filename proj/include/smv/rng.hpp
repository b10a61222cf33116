#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace smv {

// Philox 4x32-10 counter-based generator. A draw is a pure function of
// (key, counter), so parallel runs are schedule-independent by construction.
namespace philox {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                          std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

}  // namespace philox

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Identifies an independent substream: (experiment, replication) select the
// Philox key, (particle, step) live in the counter, so substreams of one run
// can never collide.
struct StreamKey {
  std::uint32_t experiment = 0;
  std::uint32_t replication = 0;
  std::uint32_t particle = 0;
  std::uint32_t step = 0;
};

class RandomStream {
 public:
  RandomStream() = default;
  RandomStream(std::uint64_t seed, StreamKey key)
      : particle_(key.particle), step_(key.step) {
    std::uint64_t k = splitmix64(seed ^ splitmix64(0x45584Dull ^ key.experiment));
    k = splitmix64(k ^ (0x524550ull + key.replication));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
  }

  // Value-like splitting: same (seed, key) tuple, fresh draw counter.
  RandomStream substream(std::uint32_t particle, std::uint32_t step) const {
    RandomStream s(*this);
    s.particle_ = particle;
    s.step_ = step;
    s.draw_ = 0;
    return s;
  }

  std::uint64_t next_u64() {
    const auto out = philox::block({particle_, step_, draw_++, 0u}, key_);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  }

  // Uniform on (0,1), endpoints excluded.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Box-Muller without caching, so copies of a stream stay reproducible.
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double exponential() { return -std::log(uniform01()); }

 private:
  std::array<std::uint32_t, 2> key_{0, 0};
  std::uint32_t particle_ = 0;
  std::uint32_t step_ = 0;
  std::uint32_t draw_ = 0;
};

}  // namespace smv
