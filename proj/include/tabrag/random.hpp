#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace tabrag {

// Seeded generator with distribution helpers written out by hand so that
// sequences are identical across standard library implementations
// (std::*_distribution output is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  // Uniform double in [0, 1).
  double uniform();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; caches the second variate.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Fisher-Yates shuffle of the whole range.
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent sub-seed from a parent seed and a stream name
// (splitmix64 over parent ^ fnv1a(name)).
std::uint64_t derive_seed(std::uint64_t parent, std::string_view stream);

// Random permutation of 0..n-1.
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed);

// k distinct values drawn uniformly from `population`, returned in
// ascending order. k >= population.size() returns a sorted copy.
std::vector<std::size_t> sample_without_replacement(
    std::vector<std::size_t> population, std::size_t k, std::uint64_t seed);

}  // namespace tabrag
