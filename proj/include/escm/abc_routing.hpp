#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "escm/analytics.hpp"
#include "escm/random.hpp"
#include "escm/sim_core.hpp"

namespace escm::abc {

struct AbcConfig {
  int population = 20;
  int dimension = 3;
  int max_generations = 500;
  int limit = 20;
  std::vector<double> lower{0.0, 0.0, 0.0};
  std::vector<double> upper{1000.0, 1000.0, 1000.0};
  double weight_load = 0.5;
  double weight_success = 0.5;

  void validate() const;
};

struct FoodSource {
  std::vector<double> solution;
  double objective = 0.0;
  double fitness = 0.0;
  int trial_counter = 0;
  int crowding = 0;
};

using Objective = std::function<double(std::span<const double>)>;

// Solutions only; objective and fitness are filled in by the caller.
std::vector<FoodSource> init_population(const AbcConfig& cfg, const UnitDraw& draw);

// v = x_i + phi (x_i - x_k), component-wise, clamped to [lower, upper]. `phi` yields values in [-1, 1].
std::vector<double> explore_neighbor(std::span<const double> x_i, std::span<const double> x_k, std::size_t i,
                                     std::size_t k, const std::function<double()>& phi,
                                     std::span<const double> lower, std::span<const double> upper);

double fitness(double concentration);
double selection_probability(double fit_i, double fit_max);
double food_concentration(double load, double success, double a, double b);

struct AbcResult {
  std::vector<double> solution;
  double objective = 0.0;
  double fitness = 0.0;
  std::int64_t evaluations = 0;
  std::vector<double> best_fitness_history;
  int scouts = 0;
};

// Called after every generation with the population and a flag per source replaced by a scout.
using GenerationObserver = std::function<void(int, std::span<const FoodSource>, std::span<const char>)>;

AbcResult abc_optimize(const AbcConfig& cfg, const Objective& objective, Rng& rng,
                       const GenerationObserver& observer = {});

// Routing adaptation.

enum class BeeRole { Employed, Scout, Onlooker };

const char* role_name(BeeRole role);
bool is_valid_transition(BeeRole from, BeeRole to);

struct BeeMessage {
  std::uint64_t id = 0;
  BeeRole role = BeeRole::Scout;
  DroneId origin{};
  DroneId current{};
  int hops_remaining = 15;
  int size_bits = 16;
  std::optional<DroneId> food;
  double range_advertisement = 20.0;
};

// Applies a role change, rejecting edges outside the SBM/EBM/OBM graph.
void change_role(BeeMessage& bm, BeeRole to);

struct RoutingWeights {
  double load = 0.5;
  double success = 0.5;
  // When set, concentration uses (1 - mu) so that reliable drones are the fitter ones.
  bool invert_concentration = true;

  void validate() const;
};

double drone_fitness(double load, double success, const RoutingWeights& w);

struct PriorityEntry {
  DroneId drone{};
  double fitness = 0.0;
  int crowding = 0;
  double discovered_at = 0.0;
};

class PrioritySet {
 public:
  explicit PrioritySet(DroneId owner = {}) : owner_(owner) {}

  DroneId owner() const { return owner_; }
  void upsert(const PriorityEntry& entry);
  bool erase(DroneId drone);
  void expire(double now, double ttl);
  std::optional<PriorityEntry> find(DroneId drone) const;
  bool contains(DroneId drone) const { return find(drone).has_value(); }
  // Fitness descending, lower id first on ties.
  const std::vector<PriorityEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  DroneId owner_;
  std::vector<PriorityEntry> entries_;
};

struct FoodDrone {
  DroneId id{};
  double fitness = 0.0;
  int crowding = 0;
};

struct TransitionResult {
  BeeRole role = BeeRole::Scout;
  std::optional<DroneId> next_food;
};

using CrowdingLookup = std::function<int(DroneId)>;

// Role update for a BM standing at a food drone (EBM), at a scout's best find (SBM) or at an
// onlooker's roulette pick (OBM; empty when the priority set has nothing to offer).
TransitionResult bm_transition(BeeMessage& bm, const std::optional<FoodDrone>& food, PrioritySet& priority, int limit,
                               const CrowdingLookup& crowding);

struct DroneView {
  DroneId id{};
  sim::Vec3 position;
  double load = 0.0;
  double success_rate = 1.0;
  bool alive = true;
};

// Periodic advertisement snapshot; malicious drones advertise an idle queue and perfect delivery.
struct NetworkView {
  std::vector<DroneView> drones;
  double range = 20.0;
  double taken_at = 0.0;

  const DroneView& at(DroneId id) const { return drones[index_of(id)]; }
  double fitness_of(DroneId id, const RoutingWeights& w) const;
  bool linked(DroneId a, DroneId b) const;
};

NetworkView snapshot(std::span<const sim::DroneState> drones, double range, double now);

// Priority-set entries that can relay from sender to receiver, best first.
std::vector<DroneId> rank_candidates(DroneId sender, DroneId receiver, const NetworkView& view,
                                     const PrioritySet& priority, const RoutingWeights& w,
                                     const CrowdingLookup& crowding, int limit);

struct BeeProtocolConfig {
  double rate_hz = 5.0;
  int ttl_hops = 15;
  int size_bits = 16;
  double dwell = 0.2;         // s an EBM or OBM stays at its food drone
  int scout_probes = 4;       // neighbourhood explorations per scout step
  double entry_ttl = 5.0;     // s before an undiscovered priority entry expires
  int limit = 20;
  RoutingWeights weights;

  void validate() const;
};

class BeeRouting {
 public:
  enum class EventKind { Generate, Arrive, Depart };
  struct Event {
    EventKind kind = EventKind::Generate;
    DroneId drone{};
    std::uint64_t bm = 0;
  };
  using Schedule = std::function<void(double, const Event&)>;

  struct World {
    std::span<sim::DroneState> drones;
    const NetworkView* view = nullptr;
    const analytics::ChannelParams* channel = nullptr;
    const sim::LinkModel* link = nullptr;
    sim::Box box;
    Rng* rng = nullptr;
    std::uint64_t channel_seed = 0;
  };

  BeeRouting(BeeProtocolConfig cfg, std::size_t drone_count);

  // Staggers the first generation of every drone over one BM period.
  void start(double now, const Schedule& schedule);
  void handle(const Event& event, double now, World& world, const Schedule& schedule);

  const BeeProtocolConfig& config() const { return cfg_; }
  PrioritySet& priority_set(DroneId id) { return priority_[index_of(id)]; }
  const PrioritySet& priority_set(DroneId id) const { return priority_[index_of(id)]; }
  int crowding(DroneId id) const { return crowding_[index_of(id)]; }
  CrowdingLookup crowding_lookup() const;
  std::size_t dwelling() const { return dwelling_; }
  std::size_t in_flight() const { return messages_.size() - dwelling_; }
  std::uint64_t generated() const { return generated_; }
  std::uint64_t transmissions() const { return transmissions_; }
  std::uint64_t transitions(BeeRole from, BeeRole to) const;

  std::vector<DroneId> candidates(DroneId sender, DroneId receiver, const NetworkView& view, double now);

 private:
  void scout(BeeMessage& bm, DroneId at, double now, World& world, const Schedule& schedule);
  void onlook(BeeMessage& bm, DroneId at, double now, World& world, const Schedule& schedule);
  void hop(BeeMessage& bm, DroneId from, DroneId to, double now, World& world, const Schedule& schedule);
  void settle(BeeMessage& bm, DroneId at, double now, World& world, const Schedule& schedule);
  void retire(std::uint64_t id);
  void record(BeeRole from, BeeRole to);
  FoodDrone food_at(DroneId id, const World& world) const;

  BeeProtocolConfig cfg_;
  std::vector<PrioritySet> priority_;
  std::vector<int> crowding_;
  std::vector<std::uint64_t> generation_count_;
  std::vector<double> phase_;
  std::vector<std::uint64_t> ticks_;
  std::unordered_map<std::uint64_t, BeeMessage> messages_;
  std::size_t dwelling_ = 0;
  std::uint64_t next_id_ = 1;
  std::uint64_t generated_ = 0;
  std::uint64_t transmissions_ = 0;
  std::array<std::uint64_t, 9> transitions_{};
};

// Runs the BM protocol over a frozen network for `warmup` seconds, then returns the sender's
// top-k relays toward the receiver. Throws CandidateShortage when fewer than k qualify.
std::vector<DroneId> select_candidates(DroneId sender, DroneId receiver, std::size_t k,
                                       std::span<sim::DroneState> drones, const analytics::ChannelParams& channel,
                                       const sim::LinkModel& link, const BeeProtocolConfig& cfg, double warmup,
                                       std::uint64_t seed);

}  // namespace escm::abc
