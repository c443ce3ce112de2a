#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <variant>

#include "escm/random.hpp"

namespace escm::analytics {

struct ChannelParams {
  double transmit_power = 0.5;      // W
  double noise_power = 0.1;         // W
  double path_loss_exponent = 2.0;
  double snr_threshold_db = 6.0;    // -inf allowed, meaning a linear threshold of 0
  double density = 2.0;             // drones per m^2
  int node_count = 10;

  void validate() const;
  double snr_threshold() const;     // linear
  double radius() const;            // sqrt(k / (pi * gamma))
};

enum class DopplerMode { LiteralClamped, Disabled };

struct MobilityParams {
  double relative_speed = 0.0;      // m/s
  double elapsed_time = 10.0;       // s
  double light_speed = 2.998e8;     // m/s
  DopplerMode doppler = DopplerMode::LiteralClamped;

  void validate() const;
  double max_displacement() const { return relative_speed * elapsed_time; }
};

struct ExpectationUniform {};
struct FixedOffset {
  double d = 0.0;
};
using DisplacementMode = std::variant<ExpectationUniform, FixedOffset>;

// Probability that a link to a uniformly placed neighbour clears the SNR threshold.
double static_success_rate(const ChannelParams& p);

double average_doppler_power(double transmit_power, const MobilityParams& m);

double mobile_success_rate(const ChannelParams& p, const MobilityParams& m,
                           DisplacementMode mode = ExpectationUniform{});

std::int64_t ponc_overhead(std::int64_t k);

// Exact fraction with a positive denominator, always kept in lowest terms.
class Rational {
 public:
  Rational(std::int64_t num = 0, std::int64_t den = 1);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::string str() const;

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  friend bool operator==(const Rational& a, const Rational& b) = default;
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);

 private:
  std::int64_t num_;
  std::int64_t den_;
};

Rational poso_overhead(std::int64_t k);

struct DsaParams {
  double p_m = 0.1;
  double p_h = 1.0;
  int z_blocks = 1;

  void validate() const;
  double lambda() const { return z_blocks * p_m / p_h; }
};

double dsa_success_probability(const DsaParams& d);

struct TruncatedGaussian {
  double mean = 200.0;   // kbps
  double stddev = 50.0;
  double min = 100.0;
  double max = 300.0;

  void validate() const;
  // Rejection sampling against the untruncated normal.
  double sample(Rng& rng) const;
};

struct InternalAttackParams {
  int total_drones = 50;
  int malicious_count = 10;
  int committee_size = 5;
  TruncatedGaussian cr;

  void validate() const;
};

double hypergeometric_pmf(int total, int marked, int draws, int x);
Rational hypergeometric_pmf_exact(int total, int marked, int draws, int x);
int sample_hypergeometric(int total, int marked, int draws, Rng& rng);

// The committee is captured when malicious members hold at least half of its CR.
bool internal_attack_succeeds(std::span<const double> malicious_cr, std::span<const double> honest_cr);

double internal_attack_probability(const InternalAttackParams& p, std::int64_t trials, std::uint64_t seed);

}  // namespace escm::analytics
