#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>

namespace dtpop::sim {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Seed for the (root_seed, label) substream.
constexpr std::uint64_t derive_seed(std::uint64_t root_seed, std::string_view label) noexcept {
  return splitmix64(splitmix64(root_seed) ^ fnv1a64(label));
}

/**
 * Labelled pseudo-random stream.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the
 * standard. Distributions are computed here rather than through <random>
 * distribution objects, which are implementation-defined, so draws are
 * identical across standard libraries.
 */
class RngStream {
 public:
  RngStream(std::uint64_t root_seed, std::string label)
      : seed_(derive_seed(root_seed, label)), label_(std::move(label)), engine_(seed_) {}

  std::uint64_t seed() const noexcept { return seed_; }
  const std::string& label() const noexcept { return label_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer on [0, n); modulo bias is below n / 2^64.
  std::size_t uniform_index(std::size_t n) {
    return n == 0 ? 0 : static_cast<std::size_t>(engine_() % static_cast<std::uint64_t>(n));
  }

  double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

  // Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

 private:
  std::uint64_t seed_;
  std::string label_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline RngStream rng_stream(std::uint64_t root_seed, std::string label) {
  return RngStream(root_seed, std::move(label));
}

}  // namespace dtpop::sim
