#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace escm {

// SplitMix64 finalizer. Used to derive independent sub-seeds and keyed draws.
std::uint64_t mix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

inline std::uint64_t hash_keys(std::uint64_t seed) { return mix64(seed); }

template <class... Rest>
std::uint64_t hash_keys(std::uint64_t seed, std::uint64_t key, Rest... rest) {
  return hash_keys(mix64(seed ^ mix64(key + 0x9e3779b97f4a7c15ULL)), static_cast<std::uint64_t>(rest)...);
}

// Maps 64 random bits to a double in [0, 1).
inline double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1p-53; }

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return to_unit(engine_()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  // Exp(1) variate.
  double exponential();
  double normal(double mean, double stddev);
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t bits() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

// Source of values in [0, 1]; production code wraps an Rng, tests pin it.
using UnitDraw = std::function<double()>;

inline UnitDraw unit_draw(Rng& rng) {
  return [&rng] { return rng.uniform(); };
}

inline UnitDraw constant_draw(double value) {
  return [value] { return value; };
}

}  // namespace escm
