#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <queue>
#include <span>
#include <vector>

#include "escm/analytics.hpp"
#include "escm/random.hpp"

namespace escm {

enum class DroneId : std::uint32_t {};

constexpr std::size_t index_of(DroneId id) { return static_cast<std::size_t>(id); }
constexpr DroneId drone_id(std::size_t i) { return static_cast<DroneId>(i); }

}  // namespace escm

namespace escm::sim {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(Vec3 a, Vec3 b) = default;
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline double distance(Vec3 a, Vec3 b) { return (a - b).norm(); }

// Mean of the last W outcomes; 1.0 before any outcome is recorded.
class OutcomeWindow {
 public:
  explicit OutcomeWindow(std::size_t width = 20) : width_(width) {}

  void record(bool success);
  double mean() const;
  std::size_t size() const { return outcomes_.size(); }

 private:
  std::size_t width_;
  std::deque<bool> outcomes_;
  std::size_t successes_ = 0;
};

class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity = 64) : capacity_(capacity) {}

  bool push(std::uint64_t message);
  std::optional<std::uint64_t> pop();
  bool remove(std::uint64_t message);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return items_.size() >= capacity_; }

 private:
  std::size_t capacity_;
  std::deque<std::uint64_t> items_;
};

struct DroneState {
  DroneId id{};
  Vec3 position;
  Vec3 velocity;
  Vec3 waypoint;
  double speed = 0.0;               // m/s
  double coding_capability = 200.0;  // kbps
  bool is_malicious = false;
  bool alive = true;
  BoundedQueue queue;
  OutcomeWindow outcomes;

  double load() const { return static_cast<double>(queue.size()) / static_cast<double>(queue.capacity()); }
  double success_rate() const { return outcomes.mean(); }
};

// Events leave in (time, sequence) order; the sequence makes equal timestamps deterministic.
template <class Payload>
class EventQueue {
 public:
  struct Entry {
    double time;
    std::uint64_t sequence;
    Payload payload;
  };

  std::uint64_t push(double time, Payload payload) {
    const std::uint64_t seq = next_++;
    heap_.push(Entry{time, seq, std::move(payload)});
    return seq;
  }

  Entry pop() {
    Entry top = heap_.top();
    heap_.pop();
    return top;
  }

  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  double next_time() const { return heap_.top().time; }

 private:
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.sequence > b.sequence;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
  std::uint64_t next_ = 0;
};

struct SimMetrics {
  std::uint64_t messages_sent = 0;
  std::uint64_t messages_delivered = 0;
  std::uint64_t messages_lost = 0;
  std::vector<double> delays;
  std::uint64_t delivered_bits = 0;
  double duration = 0.0;
  std::uint64_t consensus_messages = 0;
  std::uint64_t consensus_rounds = 0;
  std::uint64_t consensus_failures = 0;
  std::uint64_t consensus_link_attempts = 0;
  std::uint64_t consensus_link_successes = 0;
  std::uint64_t bee_transmissions = 0;
  std::uint64_t blocks = 0;
  std::uint64_t coded_batches = 0;
  std::uint64_t relay_fallbacks = 0;

  double arrival_rate() const;
  double mean_delay() const;
  double throughput() const;  // bits per second
  friend bool operator==(const SimMetrics&, const SimMetrics&) = default;
};

struct LinkModel {
  double range = 20.0;          // m
  double mac_delay = 0.005;     // s
  double light_speed = 2.998e8;
};

double compute_snr(const analytics::ChannelParams& p, double gain, double r);

struct TransmissionOutcome {
  bool delivered = false;
  double delay = 0.0;
};

// One Rayleigh-faded hop with an explicit gain sample; records the outcome in the sender's window.
TransmissionOutcome attempt_transmission_with_gain(DroneState& sender, const DroneState& receiver,
                                                   const analytics::ChannelParams& p, const LinkModel& link, double gain);

TransmissionOutcome attempt_transmission(DroneState& sender, const DroneState& receiver,
                                         const analytics::ChannelParams& p, const LinkModel& link, Rng& rng);

struct Box {
  Vec3 low{0.0, 0.0, 0.0};
  Vec3 high{1000.0, 1000.0, 1000.0};

  Vec3 clamp(Vec3 v) const;
  Vec3 reflect(Vec3 v) const;
  bool contains(Vec3 v) const;
  Vec3 sample(Rng& rng) const;
};

// Random waypoint inside the box.
void step_mobility(std::span<DroneState> drones, double dt, const Box& box, Rng& rng);

// Swarm variant: a formation centre performs random waypoint in the shrunken box and every
// member performs random waypoint inside a ball around it, both at the member's speed.
class FormationMobility {
 public:
  FormationMobility(const Box& box, double radius, Rng& rng);

  void place(std::span<DroneState> drones, Rng& rng);
  void step(std::span<DroneState> drones, double dt, Rng& rng);
  Vec3 centre() const { return centre_; }
  double radius() const { return radius_; }

 private:
  Vec3 sample_offset(Rng& rng) const;

  Box box_;
  Box centre_box_;
  double radius_;
  Vec3 centre_;
  Vec3 centre_waypoint_;
  std::vector<Vec3> offsets_;
};

}  // namespace escm::sim
