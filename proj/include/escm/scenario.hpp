#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "escm/abc_routing.hpp"
#include "escm/analytics.hpp"
#include "escm/ponc.hpp"
#include "escm/sim_core.hpp"

namespace escm {

enum class MobilityModel { Formation, Waypoint };

struct DroneSettings {
  int count = 50;
  double speed_kmh = 40.0;
  double malicious_fraction = 0.0;
  std::vector<std::uint32_t> malicious;  // explicit ids, added to the drawn fraction
  MobilityModel mobility = MobilityModel::Formation;
  double formation_radius = 30.0;  // m
  std::vector<sim::Vec3> positions;  // static placement; empty means random
  analytics::TruncatedGaussian capability;
};

struct MessageSettings {
  bool enabled = true;
  int size_bits = 128;
  double interval = 1.0;  // s between batches per sender
};

// Combination network used by the throughput model; parallel_messages is also the data batch size.
struct TopologySettings {
  int relays = 6;
  int per_receiver = 5;
  int receivers = 6;
  int parallel_messages = 2;
};

struct ConsensusSettings {
  int max_retries = 3;
  double inflation_factor = 10.0;
  ponc::Strategy strategy = ponc::Strategy::DependentVectors;
  double ipc_latency = 0.001;  // s per phase between replicas
};

struct FeatureFlags {
  bool coding = true;
  bool ponc = true;
  bool dt = true;
};

// Radio parameters behind drone-to-drone consensus messaging when the twin network is off.
struct RadioSettings {
  analytics::ChannelParams channel{0.5, 0.1, 2.0, 6.0, 2.0, 5};
  double elapsed_time = 10.0;
};

struct Fig2Curve {
  double speed = 3.0;    // m/s
  double density = 2.0;  // drones per square meter
};

struct Fig2Settings {
  analytics::ChannelParams channel{0.5, 0.1, 2.0, 6.0, 2.0, 10};
  double elapsed_time = 10.0;
  std::vector<Fig2Curve> curves{{3.0, 2.0}, {3.0, 5.0}, {5.0, 5.0}};
  std::vector<int> committee_sizes{2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
};

struct Fig12Settings {
  std::vector<int> committee_sizes{2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  std::vector<int> block_counts{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int block_committee = 5;
  double honest_rate = 1.0;
  std::vector<double> malicious_rates{0.01, 0.1, 0.2};
  std::vector<int> lead_blocks{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int attack_population = 50;
  std::vector<int> attack_committees{5, 10, 15};
  std::vector<double> malicious_ratios{0.1, 0.2, 0.3, 0.4, 0.5};
  int attack_trials = 20000;
};

struct Fig11Settings {
  int committee = 5;
  std::vector<int> parallel_messages{2, 3, 4};
  std::vector<int> relays{6, 7, 8, 9, 10};
  double hop_latency = 0.005;  // s per data hop
};

struct SweepSettings {
  std::vector<int> drone_counts{10, 20, 30, 40, 50};
  std::vector<double> speeds_kmh{20.0, 40.0, 60.0, 80.0, 100.0};
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  sim::Vec3 volume{1000.0, 1000.0, 1000.0};
  DroneSettings drones;
  analytics::ChannelParams channel{0.5, 1e-4, 2.0, 6.0, 2.0, 10};
  sim::LinkModel link;
  abc::AbcConfig abc;
  abc::BeeProtocolConfig bees;
  MessageSettings message;
  int candidates = 5;
  TopologySettings topology;
  ConsensusSettings consensus;
  FeatureFlags features;
  RadioSettings radio;
  double duration = 300.0;        // s
  double warmup = 10.0;           // s before the first data batch
  double view_refresh = 1.0;      // s between fitness advertisements
  double mobility_step = 0.1;     // s
  double edge_radius = 650.0;     // m
  int replications = 10;
  std::string output_dir = "results";
  SweepSettings sweeps;
  Fig2Settings fig2;
  Fig11Settings fig11;
  Fig12Settings fig12;

  // Throws ConfigError naming the offending field.
  void validate() const;
  sim::Box box() const { return {{0.0, 0.0, 0.0}, volume}; }
  double speed() const { return drones.speed_kmh / 3.6; }
};

std::string to_json_text(const ScenarioConfig& cfg);
// Missing keys keep their defaults; unknown keys and malformed text are rejected.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);

}  // namespace escm
