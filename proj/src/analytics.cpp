#include "escm/analytics.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <fmt/format.h>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace escm::analytics {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

template <class F>
double integrate(F f, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  double error = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 30, tol, &error);
}

// Integral of s -> 2 s f(s) over [0, 1], split at an interior kink if given.
template <class F>
double weighted_unit_integral(F f, double kink, double tol) {
  auto g = [&](double s) { return 2.0 * s * f(s); };
  if (kink > 0.0 && kink < 1.0) return integrate(g, 0.0, kink, tol) + integrate(g, kink, 1.0, tol);
  return integrate(g, 0.0, 1.0, tol);
}

// Integral of exp(-c u^alpha) over [0, a], extended as an odd function of a.
double decay_integral(double c, double alpha, double a) {
  if (a < 0.0) return -decay_integral(c, alpha, -a);
  if (c == 0.0) return a;
  const double shape = 1.0 / alpha;
  return boost::math::tgamma_lower(shape, c * std::pow(a, alpha)) / (alpha * std::pow(c, shape));
}

std::int64_t gcd64(std::int64_t a, std::int64_t b) { return std::gcd(a, b); }

}  // namespace

void ChannelParams::validate() const {
  require(std::isfinite(transmit_power) && transmit_power > 0.0, "transmit_power must be finite and > 0");
  require(std::isfinite(noise_power) && noise_power >= 0.0, "noise_power must be finite and >= 0");
  require(std::isfinite(path_loss_exponent) && path_loss_exponent >= 1.0, "path_loss_exponent must be >= 1");
  require(!std::isnan(snr_threshold_db) && snr_threshold_db != INFINITY, "snr_threshold_db must be finite or -inf");
  require(std::isfinite(density) && density > 0.0, "density must be finite and > 0");
  require(node_count >= 1, "node_count must be >= 1");
}

double ChannelParams::snr_threshold() const { return std::pow(10.0, snr_threshold_db / 10.0); }

double ChannelParams::radius() const { return std::sqrt(node_count / (std::numbers::pi * density)); }

void MobilityParams::validate() const {
  require(std::isfinite(relative_speed) && relative_speed >= 0.0, "relative_speed must be finite and >= 0");
  require(std::isfinite(elapsed_time) && elapsed_time >= 0.0, "elapsed_time must be finite and >= 0");
  require(std::isfinite(light_speed) && light_speed > 0.0, "light_speed must be finite and > 0");
}

double static_success_rate(const ChannelParams& p) {
  p.validate();
  const double radius = p.radius();
  const double c = p.noise_power * p.snr_threshold() / p.transmit_power;
  const double scale = c * std::pow(radius, p.path_loss_exponent);
  if (scale == 0.0) return 1.0;
  const double alpha = p.path_loss_exponent;
  const double value = weighted_unit_integral([&](double s) { return std::exp(-scale * std::pow(s, alpha)); }, -1.0, 1e-12);
  return std::clamp(value, 0.0, 1.0);
}

double average_doppler_power(double transmit_power, const MobilityParams& m) {
  m.validate();
  require(std::isfinite(transmit_power) && transmit_power > 0.0, "transmit_power must be finite and > 0");
  if (m.doppler == DopplerMode::Disabled) return transmit_power;
  const double ratio = m.relative_speed > 0.0 ? std::min(m.light_speed / m.relative_speed, 1.0) : 1.0;
  return transmit_power * transmit_power / std::numbers::pi * std::asin(ratio);
}

double mobile_success_rate(const ChannelParams& p, const MobilityParams& m, DisplacementMode mode) {
  p.validate();
  m.validate();
  const double radius = p.radius();
  const double alpha = p.path_loss_exponent;
  const double c = p.noise_power * p.snr_threshold() / average_doppler_power(p.transmit_power, m);
  const double bound = m.max_displacement();

  double d = 0.0;
  if (const auto* fixed = std::get_if<FixedOffset>(&mode)) {
    require(std::isfinite(fixed->d) && std::abs(fixed->d) <= bound, "displacement outside [-v t, v t]");
    d = fixed->d;
  }
  if (std::holds_alternative<FixedOffset>(mode) || bound == 0.0) {
    const double value = weighted_unit_integral(
        [&](double s) { return std::exp(-c * std::pow(std::abs(radius * s + d), alpha)); }, -d / radius, 1e-12);
    return std::clamp(value, 0.0, 1.0);
  }

  // Average over d ~ U[-vt, vt]: the inner integral has a closed form via the lower incomplete gamma.
  auto averaged = [&](double s) {
    const double r = radius * s;
    return (decay_integral(c, alpha, r + bound) - decay_integral(c, alpha, r - bound)) / (2.0 * bound);
  };
  const double value = weighted_unit_integral(averaged, bound / radius, 1e-10);
  return std::clamp(value, 0.0, 1.0);
}

std::int64_t ponc_overhead(std::int64_t k) {
  require(k >= 1, "k must be >= 1");
  return 2 * k * k - 1;
}

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw std::invalid_argument("zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = gcd64(num, den);
  num_ = g == 0 ? 0 : num / g;
  den_ = g == 0 ? 1 : den / g;
}

std::string Rational::str() const { return den_ == 1 ? fmt::format("{}", num_) : fmt::format("{}/{}", num_, den_); }

Rational operator+(const Rational& a, const Rational& b) {
  const std::int64_t g = gcd64(a.den_, b.den_);
  return {a.num_ * (b.den_ / g) + b.num_ * (a.den_ / g), a.den_ / g * b.den_};
}

Rational operator*(const Rational& a, const Rational& b) {
  const std::int64_t g1 = gcd64(a.num_, b.den_);
  const std::int64_t g2 = gcd64(b.num_, a.den_);
  const std::int64_t d1 = g1 == 0 ? 1 : g1;
  const std::int64_t d2 = g2 == 0 ? 1 : g2;
  return {(a.num_ / d1) * (b.num_ / d2), (a.den_ / d2) * (b.den_ / d1)};
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
  const __int128 lhs = static_cast<__int128>(a.num_) * b.den_;
  const __int128 rhs = static_cast<__int128>(b.num_) * a.den_;
  if (lhs < rhs) return std::strong_ordering::less;
  if (lhs > rhs) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

Rational poso_overhead(std::int64_t k) {
  require(k >= 1, "k must be >= 1");
  return {k * k * k - k, 2};
}

void DsaParams::validate() const {
  require(std::isfinite(p_m) && p_m >= 0.0 && p_m <= 1.0, "p_m must lie in [0, 1]");
  require(std::isfinite(p_h) && p_h >= 0.0 && p_h <= 1.0, "p_h must lie in [0, 1]");
  require(z_blocks >= 0, "z_blocks must be >= 0");
}

double dsa_success_probability(const DsaParams& d) {
  d.validate();
  if (d.p_h <= d.p_m) return 1.0;
  const double ratio = d.p_m / d.p_h;
  const double lambda = d.lambda();
  const int z = d.z_blocks;
  double caught_up_never = 0.0;
  for (int i = 0; i <= z; ++i) {
    const double log_term = (i == 0 ? 0.0 : i * std::log(lambda)) - lambda - std::lgamma(i + 1.0);
    const double pois = (lambda == 0.0) ? (i == 0 ? 1.0 : 0.0) : std::exp(log_term);
    caught_up_never += pois * (1.0 - std::pow(ratio, z - i));
  }
  return std::clamp(1.0 - caught_up_never, 0.0, 1.0);
}

void TruncatedGaussian::validate() const {
  require(std::isfinite(mean) && std::isfinite(stddev) && stddev > 0.0, "CR distribution needs finite mean and stddev > 0");
  require(std::isfinite(min) && std::isfinite(max) && min < max && min > 0.0, "CR bounds must satisfy 0 < min < max");
}

double TruncatedGaussian::sample(Rng& rng) const {
  for (;;) {
    const double x = rng.normal(mean, stddev);
    if (x >= min && x <= max) return x;
  }
}

void InternalAttackParams::validate() const {
  require(total_drones >= 1, "total_drones must be >= 1");
  require(malicious_count >= 0 && malicious_count <= total_drones, "malicious_count must lie in [0, N]");
  require(committee_size >= 1 && committee_size <= total_drones, "committee_size must lie in [1, N]");
  cr.validate();
}

double hypergeometric_pmf(int total, int marked, int draws, int x) {
  require(total >= 0 && marked >= 0 && marked <= total && draws >= 0 && draws <= total, "invalid hypergeometric parameters");
  if (x < std::max(0, draws - (total - marked)) || x > std::min(draws, marked)) return 0.0;
  auto log_choose = [](int n, int r) { return std::lgamma(n + 1.0) - std::lgamma(r + 1.0) - std::lgamma(n - r + 1.0); };
  return std::exp(log_choose(marked, x) + log_choose(total - marked, draws - x) - log_choose(total, draws));
}

Rational hypergeometric_pmf_exact(int total, int marked, int draws, int x) {
  require(total >= 0 && marked >= 0 && marked <= total && draws >= 0 && draws <= total, "invalid hypergeometric parameters");
  require(total <= 60, "exact pmf supports N <= 60");
  if (x < std::max(0, draws - (total - marked)) || x > std::min(draws, marked)) return {0, 1};
  auto choose = [](std::int64_t n, std::int64_t r) {
    std::int64_t result = 1;
    for (std::int64_t i = 1; i <= r; ++i) result = result * (n - r + i) / i;
    return result;
  };
  return Rational(choose(marked, x), 1) * Rational(choose(total - marked, draws - x), choose(total, draws));
}

int sample_hypergeometric(int total, int marked, int draws, Rng& rng) {
  require(total >= 0 && marked >= 0 && marked <= total && draws >= 0 && draws <= total, "invalid hypergeometric parameters");
  int hits = 0;
  int remaining_marked = marked;
  for (int i = 0; i < draws; ++i) {
    const int remaining = total - i;
    if (rng.index(static_cast<std::size_t>(remaining)) < static_cast<std::size_t>(remaining_marked)) {
      ++hits;
      --remaining_marked;
    }
  }
  return hits;
}

bool internal_attack_succeeds(std::span<const double> malicious_cr, std::span<const double> honest_cr) {
  if (malicious_cr.empty()) return false;
  const double bad = std::accumulate(malicious_cr.begin(), malicious_cr.end(), 0.0);
  const double good = std::accumulate(honest_cr.begin(), honest_cr.end(), 0.0);
  return bad >= 0.5 * (bad + good);
}

double internal_attack_probability(const InternalAttackParams& p, std::int64_t trials, std::uint64_t seed) {
  p.validate();
  require(trials >= 1, "trials must be >= 1");
  Rng rng(seed);
  std::vector<double> cr(static_cast<std::size_t>(p.committee_size));
  std::int64_t successes = 0;
  for (std::int64_t t = 0; t < trials; ++t) {
    const int x = sample_hypergeometric(p.total_drones, p.malicious_count, p.committee_size, rng);
    if (x == 0) continue;
    for (auto& v : cr) v = p.cr.sample(rng);
    const std::span<const double> all(cr);
    if (internal_attack_succeeds(all.first(static_cast<std::size_t>(x)), all.subspan(static_cast<std::size_t>(x)))) ++successes;
  }
  return static_cast<double>(successes) / static_cast<double>(trials);
}

}  // namespace escm::analytics
