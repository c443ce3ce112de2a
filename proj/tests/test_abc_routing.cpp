#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "escm/abc_routing.hpp"
#include "escm/error.hpp"

using namespace escm;
using namespace escm::abc;

namespace {

AbcConfig sphere_config() {
  AbcConfig cfg;
  cfg.lower = {-5, -5, -5};
  cfg.upper = {5, 5, 5};
  return cfg;
}

double sphere(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double random_search(const AbcConfig& cfg, std::int64_t budget, std::uint64_t seed) {
  Rng rng(seed);
  double best = INFINITY;
  std::vector<double> x(3);
  for (std::int64_t i = 0; i < budget; ++i) {
    for (std::size_t j = 0; j < 3; ++j) x[j] = rng.uniform(cfg.lower[j], cfg.upper[j]);
    best = std::min(best, sphere(x));
  }
  return best;
}

sim::DroneState drone_at(std::size_t id, sim::Vec3 p) {
  sim::DroneState d;
  d.id = drone_id(id);
  d.position = p;
  d.waypoint = p;
  return d;
}

}  // namespace

TEST_CASE("initial population endpoints and uniformity") {
  AbcConfig cfg = sphere_config();
  for (const auto& f : init_population(cfg, constant_draw(0.0))) CHECK(f.solution == cfg.lower);
  for (const auto& f : init_population(cfg, constant_draw(1.0))) CHECK(f.solution == cfg.upper);
  cfg.population = 10'000;
  Rng rng(1);
  const auto pop = init_population(cfg, unit_draw(rng));
  for (std::size_t j = 0; j < 3; ++j) {
    double lo = INFINITY, hi = -INFINITY, sum = 0.0;
    for (const auto& f : pop) {
      lo = std::min(lo, f.solution[j]);
      hi = std::max(hi, f.solution[j]);
      sum += f.solution[j];
    }
    CHECK(lo >= -5.0);
    CHECK(hi <= 5.0);
    // Mean within 1% of the box width around the centre.
    CHECK(std::abs(sum / pop.size()) < 0.1);
  }
}

TEST_CASE("neighbour exploration") {
  const std::vector<double> lo{-10, -10}, hi{10, 10};
  const std::vector<double> xi{1.0, 2.0}, xk{3.0, -1.0};
  CHECK(explore_neighbor(xi, xk, 0, 1, [] { return 0.0; }, lo, hi) == xi);
  CHECK(explore_neighbor(xi, xi, 0, 1, [] { return 0.7; }, lo, hi) == xi);
  CHECK(explore_neighbor(xi, xk, 0, 1, [] { return 1.0; }, lo, hi) == std::vector<double>{-1.0, 5.0});
  const std::vector<double> narrow_lo{0, 0}, narrow_hi{4, 4};
  CHECK(explore_neighbor(xi, xk, 0, 1, [] { return 1.0; }, narrow_lo, narrow_hi) == std::vector<double>{0.0, 4.0});
  CHECK_THROWS_AS(explore_neighbor(xi, xk, 2, 2, [] { return 0.0; }, lo, hi), std::invalid_argument);
}

TEST_CASE("fitness, selection probability and concentration") {
  CHECK(fitness(0.0) == 1.0);
  CHECK(fitness(1.0) == 0.5);
  CHECK(fitness(-0.5) == 1.5);
  double prev = INFINITY;
  for (double f = 0.0; f < 50.0; f += 0.37) {
    const double v = fitness(f);
    CHECK(v > 0.0);
    CHECK(v < prev);
    prev = v;
  }
  for (double f = -20.0; f < 20.0; f += 0.5) CHECK(fitness(f) <= std::max(1.0, 1.0 + std::abs(f)));

  CHECK(selection_probability(2.0, 2.0) == doctest::Approx(1.0));
  CHECK(selection_probability(0.0, 2.0) == doctest::Approx(0.1));
  CHECK(selection_probability(1.0, 2.0) == doctest::Approx(0.55));
  CHECK_THROWS_AS(selection_probability(0.0, 0.0), std::invalid_argument);

  CHECK(food_concentration(0.4, 0.8, 0.5, 0.5) == doctest::Approx(0.6));
  CHECK(food_concentration(0.4, 0.8, 1.0, 0.0) == 0.4);
  CHECK(food_concentration(0.4, 0.8, 0.0, 1.0) == 0.8);
  CHECK_THROWS_AS(food_concentration(0.4, 0.8, 0.5, 0.6), std::invalid_argument);
}

TEST_CASE("ABC on a flat landscape") {
  AbcConfig cfg = sphere_config();
  cfg.max_generations = 20;
  Rng rng(1);
  const auto r = abc_optimize(cfg, [](std::span<const double>) { return 0.0; }, rng);
  CHECK(r.fitness == 1.0);
}

TEST_CASE("ABC beats random search on the sphere") {
  const AbcConfig cfg = sphere_config();
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const auto r = abc_optimize(cfg, sphere, rng);
    CHECK(r.objective <= 1e-2);
    wins += random_search(cfg, r.evaluations, 100 + seed) >= r.objective;
  }
  CHECK(wins >= 8);
}

TEST_CASE("ABC bookkeeping invariants") {
  AbcConfig cfg = sphere_config();
  cfg.max_generations = 200;
  cfg.limit = 5;
  Rng rng(3);
  int generations = 0;
  const auto r = abc_optimize(cfg, sphere, rng, [&](int, std::span<const FoodSource> pop, std::span<const char> replaced) {
    ++generations;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      REQUIRE((pop[i].trial_counter < cfg.limit || replaced[i]));
      if (replaced[i]) REQUIRE(pop[i].trial_counter == 0);
      REQUIRE(pop[i].fitness == fitness(pop[i].objective));
    }
  });
  CHECK(generations == 200);
  CHECK(r.scouts > 0);
  for (std::size_t g = 1; g < r.best_fitness_history.size(); ++g)
    CHECK(r.best_fitness_history[g] >= r.best_fitness_history[g - 1]);
  CHECK(r.evaluations == 20 + 200 * 40 + r.scouts);
}

TEST_CASE("ABC config validation") {
  AbcConfig cfg;
  cfg.weight_load = 0.5;
  cfg.weight_success = 0.6;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = AbcConfig{};
  cfg.population = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = AbcConfig{};
  cfg.lower = {0, 0, 5};
  cfg.upper = {1, 1, 5};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("role transition graph") {
  CHECK(is_valid_transition(BeeRole::Scout, BeeRole::Employed));
  CHECK(is_valid_transition(BeeRole::Employed, BeeRole::Scout));
  CHECK(is_valid_transition(BeeRole::Onlooker, BeeRole::Employed));
  CHECK(is_valid_transition(BeeRole::Onlooker, BeeRole::Scout));
  CHECK_FALSE(is_valid_transition(BeeRole::Scout, BeeRole::Onlooker));
  CHECK_FALSE(is_valid_transition(BeeRole::Employed, BeeRole::Onlooker));
  BeeMessage bm;
  bm.role = BeeRole::Employed;
  CHECK_THROWS_AS(change_role(bm, BeeRole::Onlooker), InvalidTransition);
  CHECK(bm.role == BeeRole::Employed);
}

TEST_CASE("bee message transitions") {
  const int limit = 3;
  std::vector<int> crowd(10, 0);
  const CrowdingLookup lookup = [&](DroneId id) { return crowd[index_of(id)]; };

  SUBCASE("employed at a mined-out food drone becomes a scout") {
    BeeMessage bm;
    bm.role = BeeRole::Employed;
    PrioritySet p;
    bm_transition(bm, FoodDrone{drone_id(2), 0.5, limit}, p, limit, lookup);
    CHECK(bm.role == BeeRole::Scout);
  }
  SUBCASE("onlooker with an empty priority set becomes a scout") {
    BeeMessage bm;
    bm.role = BeeRole::Onlooker;
    PrioritySet p;
    CHECK(bm_transition(bm, std::nullopt, p, limit, lookup).role == BeeRole::Scout);
  }
  SUBCASE("scout that found a food drone becomes employed") {
    BeeMessage bm;
    PrioritySet p;
    const auto r = bm_transition(bm, FoodDrone{drone_id(4), 0.9, 0}, p, limit, lookup);
    CHECK(bm.role == BeeRole::Employed);
    CHECK(r.next_food == drone_id(4));
  }
  SUBCASE("onlooker switches to another entry when its pick is mined out") {
    BeeMessage bm;
    bm.role = BeeRole::Onlooker;
    PrioritySet p;
    p.upsert({drone_id(1), 0.9, 0, 0});
    p.upsert({drone_id(2), 0.8, 0, 0});
    p.upsert({drone_id(3), 0.7, 0, 0});
    crowd[1] = limit;
    crowd[2] = limit;
    const auto r = bm_transition(bm, FoodDrone{drone_id(1), 0.9, limit}, p, limit, lookup);
    CHECK(bm.role == BeeRole::Employed);
    CHECK(r.next_food == drone_id(3));
    CHECK_FALSE(p.contains(drone_id(1)));
  }
  SUBCASE("onlooker keeps its role for an uncrowded pick") {
    BeeMessage bm;
    bm.role = BeeRole::Onlooker;
    PrioritySet p;
    p.upsert({drone_id(5), 0.9, 0, 0});
    CHECK(bm_transition(bm, FoodDrone{drone_id(5), 0.9, 0}, p, limit, lookup).next_food == drone_id(5));
    CHECK(bm.role == BeeRole::Onlooker);
  }
}

TEST_CASE("priority set ordering and expiry") {
  PrioritySet p(drone_id(0));
  p.upsert({drone_id(4), 0.5, 0, 0.0});
  p.upsert({drone_id(2), 0.5, 0, 1.0});
  p.upsert({drone_id(7), 0.9, 0, 2.0});
  p.upsert({drone_id(4), 0.6, 0, 3.0});
  std::vector<DroneId> order;
  for (const auto& e : p.entries()) order.push_back(e.drone);
  CHECK(order == std::vector<DroneId>{drone_id(7), drone_id(4), drone_id(2)});
  p.expire(4.5, 3.0);
  CHECK(p.size() == 2);
  CHECK_FALSE(p.contains(drone_id(2)));
}

TEST_CASE("candidate ranking examples") {
  // Sender 0, receiver 1, relays 2 (A) and 3 (B) in range of both.
  std::vector<sim::DroneState> drones{drone_at(0, {0, 0, 0}), drone_at(1, {20, 0, 0}), drone_at(2, {10, 5, 0}),
                                      drone_at(3, {10, -5, 0})};
  auto view = snapshot(drones, 20.0, 0.0);
  view.drones[2].load = 0.2;
  view.drones[2].success_rate = 0.9;
  view.drones[3].load = 0.9;
  view.drones[3].success_rate = 0.9;
  RoutingWeights literal{0.5, 0.5, false};
  PrioritySet p(drone_id(0));
  p.upsert({drone_id(2), 0, 0, 0});
  p.upsert({drone_id(3), 0, 0, 0});
  const CrowdingLookup none = [](DroneId) { return 0; };
  CHECK(rank_candidates(drone_id(0), drone_id(1), view, p, literal, none, 20).front() == drone_id(2));

  view.drones[3].load = 0.2;
  CHECK(rank_candidates(drone_id(0), drone_id(1), view, p, literal, none, 20).front() == drone_id(2));
  CHECK(rank_candidates(drone_id(0), drone_id(1), view, p, literal, [](DroneId id) { return id == drone_id(2) ? 20 : 0; }, 20)
            == std::vector<DroneId>{drone_id(3)});
}

TEST_CASE("malicious drones advertise a perfect state") {
  std::vector<sim::DroneState> drones{drone_at(0, {0, 0, 0})};
  drones[0].is_malicious = true;
  for (int i = 0; i < 10; ++i) drones[0].outcomes.record(false);
  drones[0].queue.push(1);
  const auto view = snapshot(drones, 20.0, 0.0);
  CHECK(view.drones[0].load == 0.0);
  CHECK(view.drones[0].success_rate == 1.0);
}

TEST_CASE("select_candidates over a frozen network") {
  analytics::ChannelParams channel;
  channel.noise_power = 0.0;
  sim::LinkModel link;
  BeeProtocolConfig cfg;

  SUBCASE("identical relays resolve to the lowest ids") {
    std::vector<sim::DroneState> drones{drone_at(0, {100, 100, 100}), drone_at(1, {110, 100, 100})};
    for (std::size_t i = 2; i < 9; ++i) drones.push_back(drone_at(i, {105, 100 + static_cast<double>(i) - 5.0, 100}));
    for (auto& d : drones) d.is_malicious = true;  // frozen, identical advertisements
    const auto picked = select_candidates(drone_id(0), drone_id(1), 3, drones, channel, link, cfg, 10.0, 4);
    CHECK(picked == std::vector<DroneId>{drone_id(2), drone_id(3), drone_id(4)});
  }
  SUBCASE("shortage is reported") {
    std::vector<sim::DroneState> drones{drone_at(0, {100, 100, 100}), drone_at(1, {110, 100, 100}),
                                        drone_at(2, {105, 100, 100})};
    CHECK_THROWS_AS(select_candidates(drone_id(0), drone_id(1), 2, drones, channel, link, cfg, 10.0, 4),
                    CandidateShortage);
  }
}

TEST_CASE("bee protocol conserves crowding and walks the role graph") {
  analytics::ChannelParams channel;
  channel.noise_power = 1e-4;
  sim::LinkModel link;
  BeeProtocolConfig cfg;
  cfg.limit = 2;
  Rng place(5);
  std::vector<sim::DroneState> drones;
  for (std::size_t i = 0; i < 40; ++i) {
    sim::Vec3 p{500 + place.uniform(-20, 20), 500 + place.uniform(-20, 20), 500 + place.uniform(-20, 20)};
    drones.push_back(drone_at(i, p));
  }
  const auto view = snapshot(drones, link.range, 0.0);
  Rng rng(6);
  BeeRouting routing(cfg, drones.size());
  BeeRouting::World world{drones, &view, &channel, &link, sim::Box{}, &rng, 77};
  sim::EventQueue<BeeRouting::Event> queue;
  const BeeRouting::Schedule schedule = [&](double t, const BeeRouting::Event& e) { queue.push(t, e); };
  routing.start(0.0, schedule);
  while (!queue.empty() && queue.next_time() < 20.0) {
    const auto e = queue.pop();
    routing.handle(e.payload, e.time, world, schedule);
    int total = 0;
    for (std::size_t i = 0; i < drones.size(); ++i) {
      REQUIRE(routing.crowding(drone_id(i)) >= 0);
      REQUIRE(routing.crowding(drone_id(i)) <= cfg.limit);
      total += routing.crowding(drone_id(i));
    }
    REQUIRE(static_cast<std::size_t>(total) == routing.dwelling());
  }
  CHECK(routing.generated() == 40u * 100u);
  CHECK(routing.transitions(BeeRole::Scout, BeeRole::Employed) > 0);
  CHECK(routing.transitions(BeeRole::Employed, BeeRole::Scout) > 0);
  CHECK(routing.transitions(BeeRole::Scout, BeeRole::Onlooker) == 0);
  CHECK(routing.transitions(BeeRole::Employed, BeeRole::Onlooker) == 0);
}
