#pragma once

// Independent reference computations shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "escm/analytics.hpp"

namespace oracle {

struct Estimate {
  double mean;
  double stderr_;
};

// Samples r with density 2r/R^2, optional displacement d ~ U[-vt, vt] and h ~ Exp(1).
inline Estimate monte_carlo_success(const escm::analytics::ChannelParams& p, double power, double max_displacement,
                                    std::int64_t samples, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> gain(1.0);
  const double radius = p.radius();
  const double z = p.snr_threshold();
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < samples; ++i) {
    const double r = radius * std::sqrt(unit(gen));
    const double d = max_displacement * (2.0 * unit(gen) - 1.0);
    const double dist = std::abs(r + d);
    const double h = gain(gen);
    if (power * h > z * p.noise_power * std::pow(dist, p.path_loss_exponent)) ++hits;
  }
  const double m = static_cast<double>(hits) / static_cast<double>(samples);
  return {m, std::sqrt(std::max(m * (1.0 - m), 1e-12) / static_cast<double>(samples))};
}

// Poisson head start for the attacker followed by a gambler's-ruin walk.
inline double dsa_race(double p_m, double p_h, int z, std::int64_t trials, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double lambda = z * p_m / p_h;
  std::poisson_distribution<int> head_start(lambda > 0.0 ? lambda : 1e-300);
  const double attacker_step = p_m / (p_m + p_h);
  std::int64_t wins = 0;
  for (std::int64_t t = 0; t < trials; ++t) {
    int deficit = z - (lambda > 0.0 ? head_start(gen) : 0);
    while (deficit > 0 && deficit < 64) deficit += unit(gen) < attacker_step ? -1 : 1;
    if (deficit <= 0) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(trials);
}

// Truncated Gaussian CR density on a uniform grid, normalized to unit mass.
struct GridDensity {
  double start;
  double step;
  std::vector<double> mass;
};

inline GridDensity truncated_gaussian_grid(const escm::analytics::TruncatedGaussian& g, double step) {
  GridDensity out{g.min, step, {}};
  const int n = static_cast<int>(std::round((g.max - g.min) / step));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = g.min + (i + 0.5) * step;
    const double w = std::exp(-0.5 * std::pow((x - g.mean) / g.stddev, 2));
    out.mass.push_back(w);
    total += w;
  }
  for (auto& m : out.mass) m /= total;
  out.start = g.min + 0.5 * step;
  return out;
}

inline GridDensity convolve(const GridDensity& a, const GridDensity& b) {
  GridDensity out{a.start + b.start, a.step, std::vector<double>(a.mass.size() + b.mass.size() - 1, 0.0)};
  for (std::size_t i = 0; i < a.mass.size(); ++i)
    for (std::size_t j = 0; j < b.mass.size(); ++j) out.mass[i + j] += a.mass[i] * b.mass[j];
  return out;
}

inline GridDensity sum_of(const GridDensity& base, int count) {
  GridDensity acc = base;
  for (int i = 1; i < count; ++i) acc = convolve(acc, base);
  return acc;
}

// Pr[A >= B] for independent grid densities sharing a step.
inline double prob_at_least(const GridDensity& a, const GridDensity& b) {
  std::vector<double> cdf(b.mass.size());
  double run = 0.0;
  for (std::size_t j = 0; j < b.mass.size(); ++j) cdf[j] = (run += b.mass[j]);
  double p = 0.0;
  for (std::size_t i = 0; i < a.mass.size(); ++i) {
    const double x = a.start + static_cast<double>(i) * a.step;
    const double idx = (x - b.start) / b.step;
    if (idx < 0) continue;
    const auto j = static_cast<std::size_t>(std::floor(idx + 1e-9));
    p += a.mass[i] * (j >= cdf.size() ? 1.0 : cdf[j] - 0.5 * b.mass[j] * (std::abs(idx - std::round(idx)) < 1e-9));
  }
  return p;
}

// Enumerates every committee explicitly and integrates the CR condition per malicious count.
inline double internal_attack_enumeration(int total, int marked, int draws, const escm::analytics::TruncatedGaussian& g) {
  const GridDensity unit = truncated_gaussian_grid(g, 0.25);
  std::vector<long> committees_with(static_cast<std::size_t>(draws) + 1, 0);
  long committees = 0;
  std::vector<int> pick(static_cast<std::size_t>(draws));
  for (int i = 0; i < draws; ++i) pick[static_cast<std::size_t>(i)] = i;
  for (;;) {
    int x = 0;
    for (int v : pick) x += v < marked;
    ++committees_with[static_cast<std::size_t>(x)];
    ++committees;
    int i = draws - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == total - draws + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < draws; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
  double p = 0.0;
  for (int x = 1; x <= draws; ++x) {
    const long count = committees_with[static_cast<std::size_t>(x)];
    if (count == 0) continue;
    const double cond = x == draws ? 1.0 : prob_at_least(sum_of(unit, x), sum_of(unit, draws - x));
    p += cond * static_cast<double>(count) / static_cast<double>(committees);
  }
  return p;
}

}  // namespace oracle
