#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace saenad {

// Portable random helpers: uniform, bounded, normal and shuffle built directly
// on std::mt19937_64 output.

std::uint64_t splitmix64(std::uint64_t x);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

// Seed for a named sub-stream ("init", "shuffle", "dropout", "split", "synth")
// derived from the run seed. `salt` distinguishes instances of one stream.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view stream, std::uint64_t salt = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, bound), bound > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t bound);

  // Standard normal via Box-Muller (one value per call, the partner is dropped).
  double normal();

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace saenad
