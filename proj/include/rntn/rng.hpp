#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace rntn {

// Deterministic random source. mt19937_64 supplies the bits; uniform,
// gaussian and bounded-integer draws are derived here by hand because the
// standard <random> distributions are implementation-defined and would make
// seeded runs depend on the stdlib version.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Standard normal via Box-Muller; the paired value is cached.
  double gaussian();

  // Unbiased integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    // Fisher-Yates with our own bounded draw.
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stateless mix of a seed with stream coordinates (epoch, sentence index),
// used to give every sentence its own reproducible dropout stream no matter
// which thread processes it.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

}  // namespace rntn
