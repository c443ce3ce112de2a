#include "escm/sim_core.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "escm/error.hpp"

namespace escm::sim {

void OutcomeWindow::record(bool success) {
  outcomes_.push_back(success);
  successes_ += success;
  if (outcomes_.size() > width_) {
    successes_ -= outcomes_.front();
    outcomes_.pop_front();
  }
}

double OutcomeWindow::mean() const {
  if (outcomes_.empty()) return 1.0;
  return static_cast<double>(successes_) / static_cast<double>(outcomes_.size());
}

bool BoundedQueue::push(std::uint64_t message) {
  if (full()) return false;
  items_.push_back(message);
  return true;
}

std::optional<std::uint64_t> BoundedQueue::pop() {
  if (items_.empty()) return std::nullopt;
  const std::uint64_t m = items_.front();
  items_.pop_front();
  return m;
}

bool BoundedQueue::remove(std::uint64_t message) {
  const auto it = std::find(items_.begin(), items_.end(), message);
  if (it == items_.end()) return false;
  items_.erase(it);
  return true;
}

double SimMetrics::arrival_rate() const {
  if (messages_sent == 0) return 1.0;
  return static_cast<double>(messages_delivered) / static_cast<double>(messages_sent);
}

double SimMetrics::mean_delay() const {
  if (delays.empty()) return 0.0;
  return std::accumulate(delays.begin(), delays.end(), 0.0) / static_cast<double>(delays.size());
}

double SimMetrics::throughput() const {
  if (duration <= 0.0) return 0.0;
  return static_cast<double>(delivered_bits) / duration;
}

double compute_snr(const analytics::ChannelParams& p, double gain, double r) {
  if (!(r > 0.0)) throw DegenerateGeometry("colocated drones: distance must be > 0");
  const double signal = p.transmit_power * gain * std::pow(r, -p.path_loss_exponent);
  if (signal == 0.0) return 0.0;
  if (p.noise_power == 0.0) return std::numeric_limits<double>::infinity();
  return signal / p.noise_power;
}

TransmissionOutcome attempt_transmission_with_gain(DroneState& sender, const DroneState& receiver,
                                                   const analytics::ChannelParams& p, const LinkModel& link, double gain) {
  const double d = distance(sender.position, receiver.position);
  bool ok = false;
  if (d <= link.range) ok = compute_snr(p, gain, std::max(d, 1e-9)) > p.snr_threshold();
  sender.outcomes.record(ok);
  if (!ok) return {};
  return {true, link.mac_delay + d / link.light_speed};
}

TransmissionOutcome attempt_transmission(DroneState& sender, const DroneState& receiver,
                                         const analytics::ChannelParams& p, const LinkModel& link, Rng& rng) {
  return attempt_transmission_with_gain(sender, receiver, p, link, rng.exponential());
}

Vec3 Box::clamp(Vec3 v) const {
  return {std::clamp(v.x, low.x, high.x), std::clamp(v.y, low.y, high.y), std::clamp(v.z, low.z, high.z)};
}

namespace {

double reflect_axis(double v, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0.0) return lo;
  double t = std::fmod(v - lo, 2.0 * span);
  if (t < 0.0) t += 2.0 * span;
  return lo + (t <= span ? t : 2.0 * span - t);
}

// Moves `position` toward `waypoint` by up to `budget`; returns the unused budget.
double advance(Vec3& position, Vec3 waypoint, double budget) {
  const Vec3 delta = waypoint - position;
  const double gap = delta.norm();
  if (budget < gap) {
    position = position + (budget / gap) * delta;
    return 0.0;
  }
  position = waypoint;
  return budget - gap;
}

Vec3 heading(Vec3 from, Vec3 to, double speed) {
  const Vec3 delta = to - from;
  const double n = delta.norm();
  return n > 0.0 ? (speed / n) * delta : Vec3{};
}

}  // namespace

Vec3 Box::reflect(Vec3 v) const {
  return {reflect_axis(v.x, low.x, high.x), reflect_axis(v.y, low.y, high.y), reflect_axis(v.z, low.z, high.z)};
}

bool Box::contains(Vec3 v) const {
  return v.x >= low.x && v.x <= high.x && v.y >= low.y && v.y <= high.y && v.z >= low.z && v.z <= high.z;
}

Vec3 Box::sample(Rng& rng) const {
  const double x = rng.uniform(low.x, high.x);
  const double y = rng.uniform(low.y, high.y);
  const double z = rng.uniform(low.z, high.z);
  return {x, y, z};
}

void step_mobility(std::span<DroneState> drones, double dt, const Box& box, Rng& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  for (auto& d : drones) {
    if (d.speed <= 0.0) {
      d.velocity = {};
      continue;
    }
    double budget = d.speed * dt;
    for (int guard = 0; budget > 0.0 && guard < 64; ++guard) {
      budget = advance(d.position, d.waypoint, budget);
      if (budget > 0.0 || d.position == d.waypoint) d.waypoint = box.sample(rng);
    }
    d.position = box.reflect(d.position);
    d.velocity = heading(d.position, d.waypoint, d.speed);
  }
}

FormationMobility::FormationMobility(const Box& box, double radius, Rng& rng) : box_(box), radius_(radius) {
  if (!(radius >= 0.0)) throw std::invalid_argument("formation radius must be >= 0");
  centre_box_ = box;
  const Vec3 margin{radius, radius, radius};
  centre_box_.low = box.low + margin;
  centre_box_.high = box.high - margin;
  if (!(centre_box_.low.x <= centre_box_.high.x && centre_box_.low.y <= centre_box_.high.y &&
        centre_box_.low.z <= centre_box_.high.z))
    throw std::invalid_argument("formation radius does not fit inside the volume");
  centre_ = centre_box_.sample(rng);
  centre_waypoint_ = centre_box_.sample(rng);
}

Vec3 FormationMobility::sample_offset(Rng& rng) const {
  for (;;) {
    const Vec3 v{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    if (v.norm() <= 1.0) return radius_ * v;
  }
}

void FormationMobility::place(std::span<DroneState> drones, Rng& rng) {
  offsets_.assign(drones.size(), Vec3{});
  for (std::size_t i = 0; i < drones.size(); ++i) {
    offsets_[i] = sample_offset(rng);
    drones[i].waypoint = sample_offset(rng);
    drones[i].position = box_.clamp(centre_ + offsets_[i]);
  }
}

void FormationMobility::step(std::span<DroneState> drones, double dt, Rng& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  if (offsets_.size() != drones.size()) throw std::invalid_argument("formation was placed with a different drone count");
  double speed = 0.0;
  for (const auto& d : drones) speed += d.speed;
  speed = drones.empty() ? 0.0 : speed / static_cast<double>(drones.size());

  const Vec3 centre_before = centre_;
  double budget = speed * dt;
  for (int guard = 0; budget > 0.0 && guard < 64; ++guard) {
    budget = advance(centre_, centre_waypoint_, budget);
    if (budget > 0.0 || centre_ == centre_waypoint_) centre_waypoint_ = centre_box_.sample(rng);
  }
  const Vec3 centre_velocity = (1.0 / dt) * (centre_ - centre_before);

  for (std::size_t i = 0; i < drones.size(); ++i) {
    auto& d = drones[i];
    Vec3& offset = offsets_[i];
    double local = d.speed * dt;
    for (int guard = 0; local > 0.0 && guard < 64; ++guard) {
      local = advance(offset, d.waypoint, local);
      if (local > 0.0 || offset == d.waypoint) d.waypoint = sample_offset(rng);
    }
    d.position = box_.clamp(centre_ + offset);
    d.velocity = centre_velocity + heading(offset, d.waypoint, d.speed);
  }
}

}  // namespace escm::sim
