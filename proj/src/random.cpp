#include "escm/random.hpp"

#include <cmath>

namespace escm {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) { return hash_keys(seed, stream); }

std::size_t Rng::index(std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

double Rng::exponential() { return -std::log1p(-uniform()); }

double Rng::normal(double mean, double stddev) {
  return normal_(engine_, std::normal_distribution<double>::param_type(mean, stddev));
}

}  // namespace escm
