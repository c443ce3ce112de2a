#include <doctest.h>

#include <cmath>
#include <vector>

#include "escm/error.hpp"
#include "escm/sim_core.hpp"

using namespace escm;
using namespace escm::sim;

namespace {

analytics::ChannelParams example_channel() {
  analytics::ChannelParams p;
  p.transmit_power = 0.5;
  p.noise_power = 0.1;
  p.path_loss_exponent = 2.0;
  p.snr_threshold_db = 6.0;
  return p;
}

DroneState drone_at(std::size_t id, Vec3 pos) {
  DroneState d;
  d.id = drone_id(id);
  d.position = pos;
  d.waypoint = pos;
  return d;
}

}  // namespace

TEST_CASE("compute_snr") {
  const auto p = example_channel();
  CHECK(compute_snr(p, 1.0, 1.0) == doctest::Approx(5.0));
  CHECK(compute_snr(p, 0.0, 3.0) == 0.0);
  CHECK_THROWS_AS(compute_snr(p, 1.0, 0.0), DegenerateGeometry);
  auto lossless = p;
  lossless.noise_power = 0.0;
  CHECK(std::isinf(compute_snr(lossless, 0.3, 10.0)));
}

TEST_CASE("SNR exceedance matches the exponential closed form") {
  const auto p = example_channel();
  Rng rng(3);
  for (double r : {0.5, 1.0, 1.5}) {
    const int n = 100'000;
    int hits = 0;
    for (int i = 0; i < n; ++i) hits += compute_snr(p, rng.exponential(), r) > p.snr_threshold();
    const double expected = std::exp(-p.noise_power * r * r * p.snr_threshold() / p.transmit_power);
    CHECK(std::abs(hits / double(n) - expected) < 3.0 * std::sqrt(expected * (1 - expected) / n));
  }
}

TEST_CASE("attempt_transmission range and loss behaviour") {
  auto p = example_channel();
  LinkModel link;
  Rng rng(1);
  DroneState a = drone_at(0, {0, 0, 0});
  DroneState far = drone_at(1, {25, 0, 0});
  for (int i = 0; i < 100; ++i) CHECK_FALSE(attempt_transmission(a, far, p, link, rng).delivered);
  CHECK(a.success_rate() == 0.0);

  p.noise_power = 0.0;
  DroneState b = drone_at(0, {0, 0, 0});
  DroneState near = drone_at(1, {20, 0, 0});
  for (int i = 0; i < 1000; ++i) {
    const auto out = attempt_transmission(b, near, p, link, rng);
    REQUIRE(out.delivered);
    CHECK(out.delay == doctest::Approx(link.mac_delay + 20.0 / link.light_speed));
  }
  CHECK(b.success_rate() == 1.0);
}

TEST_CASE("attempt_transmission success frequency at 10 m") {
  auto p = example_channel();
  p.noise_power = 1e-3;
  LinkModel link;
  Rng rng(7);
  DroneState a = drone_at(0, {0, 0, 0});
  DroneState b = drone_at(1, {10, 0, 0});
  const int n = 100'000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += attempt_transmission(a, b, p, link, rng).delivered;
  const double expected = std::exp(-p.noise_power * 100.0 * p.snr_threshold() / p.transmit_power);
  CHECK(std::abs(hits / double(n) - expected) < 3.0 * std::sqrt(expected * (1 - expected) / n));
}

TEST_CASE("outcome window") {
  OutcomeWindow w(20);
  CHECK(w.mean() == 1.0);
  for (int i = 0; i < 20; ++i) w.record(i % 4 != 0);
  CHECK(w.mean() == 15.0 / 20.0);
  for (int i = 0; i < 20; ++i) w.record(false);
  CHECK(w.mean() == 0.0);
  w.record(true);
  CHECK(w.mean() == 1.0 / 20.0);
  CHECK(w.size() == 20);
}

TEST_CASE("bounded queue defines the load") {
  DroneState d;
  CHECK(d.load() == 0.0);
  for (std::uint64_t i = 0; i < 64; ++i) CHECK(d.queue.push(i));
  CHECK_FALSE(d.queue.push(99));
  CHECK(d.load() == 1.0);
  CHECK(d.queue.pop() == 0u);
  CHECK(d.queue.remove(10));
  CHECK_FALSE(d.queue.remove(10));
  CHECK(d.load() == doctest::Approx(62.0 / 64.0));
}

TEST_CASE("event queue orders by time then insertion") {
  EventQueue<int> q;
  q.push(2.0, 1);
  q.push(1.0, 2);
  q.push(2.0, 3);
  q.push(1.0, 4);
  std::vector<int> order;
  while (!q.empty()) order.push_back(q.pop().payload);
  CHECK(order == std::vector<int>{2, 4, 1, 3});
}

TEST_CASE("random waypoint kinematics") {
  Box box;
  Rng rng(4);
  std::vector<DroneState> still{drone_at(0, {10, 20, 30})};
  step_mobility(still, 1.0, box, rng);
  CHECK(still[0].position == Vec3{10, 20, 30});

  std::vector<DroneState> one{drone_at(0, {100, 100, 100})};
  one[0].waypoint = {900, 100, 100};
  one[0].speed = 11.0;
  step_mobility(one, 2.0, box, rng);
  CHECK(distance(one[0].position, {100, 100, 100}) == doctest::Approx(22.0).epsilon(1e-12));

  CHECK_THROWS_AS(step_mobility(one, 0.0, box, rng), std::invalid_argument);
}

TEST_CASE("random waypoint keeps 50 drones in bounds at the configured speed") {
  Box box;
  Rng rng(9);
  std::vector<DroneState> drones;
  const double speed = 40.0 / 3.6;
  for (std::size_t i = 0; i < 50; ++i) {
    auto d = drone_at(i, box.sample(rng));
    d.waypoint = box.sample(rng);
    d.speed = speed;
    drones.push_back(d);
  }
  const double dt = 0.1;
  double moved = 0.0;
  int steps = 0;
  for (int s = 0; s < 600; ++s) {
    std::vector<Vec3> before;
    for (const auto& d : drones) before.push_back(d.position);
    step_mobility(drones, dt, box, rng);
    for (std::size_t i = 0; i < drones.size(); ++i) {
      REQUIRE(box.contains(drones[i].position));
      moved += distance(before[i], drones[i].position);
      ++steps;
    }
  }
  // Straight-line displacement only falls short of speed*dt on the rare waypoint turn.
  CHECK(moved / steps == doctest::Approx(speed * dt).epsilon(0.01));
}

TEST_CASE("formation mobility keeps members together and in bounds") {
  Box box;
  Rng rng(2);
  FormationMobility formation(box, 30.0, rng);
  std::vector<DroneState> drones;
  for (std::size_t i = 0; i < 50; ++i) {
    auto d = drone_at(i, {});
    d.speed = 100.0 / 3.6;
    drones.push_back(d);
  }
  formation.place(drones, rng);
  for (int s = 0; s < 3000; ++s) {
    formation.step(drones, 0.1, rng);
    for (const auto& d : drones) {
      REQUIRE(box.contains(d.position));
      REQUIRE(distance(d.position, formation.centre()) <= 30.0 + 1e-9);
    }
  }
  CHECK_THROWS_AS(FormationMobility(box, 600.0, rng), std::invalid_argument);
}

TEST_CASE("metrics conventions") {
  SimMetrics m;
  CHECK(m.arrival_rate() == 1.0);
  m.messages_sent = 4;
  m.messages_delivered = 3;
  m.delays = {1.0, 2.0, 3.0};
  m.delivered_bits = 384;
  m.duration = 2.0;
  CHECK(m.arrival_rate() == 0.75);
  CHECK(m.mean_delay() == 2.0);
  CHECK(m.throughput() == 192.0);
}

TEST_CASE("box reflection") {
  Box box;
  CHECK(box.reflect({-5, 1005, 500}) == Vec3{5, 995, 500});
  CHECK(box.contains(box.reflect({-2500, 3700, 1e6})));
}
