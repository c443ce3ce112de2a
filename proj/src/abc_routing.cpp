#include "escm/abc_routing.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <stdexcept>

#include "escm/error.hpp"

namespace escm::abc {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

bool weights_sum_to_one(double a, double b) { return std::abs(a + b - 1.0) <= 1e-12; }

std::size_t role_index(BeeRole r) { return static_cast<std::size_t>(r); }

bool better(double fit_a, DroneId a, double fit_b, DroneId b) {
  if (fit_a != fit_b) return fit_a > fit_b;
  return a < b;
}

}  // namespace

void AbcConfig::validate() const {
  require(population >= 2, "population must be >= 2");
  require(dimension >= 1, "dimension must be >= 1");
  require(max_generations >= 0, "max_generations must be >= 0");
  require(limit >= 1, "limit must be >= 1");
  require(lower.size() == static_cast<std::size_t>(dimension) && upper.size() == lower.size(),
          "bounds must have one entry per dimension");
  for (std::size_t j = 0; j < lower.size(); ++j) require(lower[j] < upper[j], "lower bound must be below upper bound");
  require(weights_sum_to_one(weight_load, weight_success), "fitness weights must satisfy a + b = 1");
}

std::vector<FoodSource> init_population(const AbcConfig& cfg, const UnitDraw& draw) {
  cfg.validate();
  std::vector<FoodSource> pop(static_cast<std::size_t>(cfg.population));
  for (auto& f : pop) {
    f.solution.resize(static_cast<std::size_t>(cfg.dimension));
    for (std::size_t j = 0; j < f.solution.size(); ++j)
      f.solution[j] = cfg.lower[j] + draw() * (cfg.upper[j] - cfg.lower[j]);
  }
  return pop;
}

std::vector<double> explore_neighbor(std::span<const double> x_i, std::span<const double> x_k, std::size_t i,
                                     std::size_t k, const std::function<double()>& phi,
                                     std::span<const double> lower, std::span<const double> upper) {
  require(i != k, "neighbour must differ from the source being explored");
  require(x_i.size() == x_k.size() && lower.size() == x_i.size() && upper.size() == x_i.size(),
          "dimension mismatch");
  std::vector<double> v(x_i.size());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = std::clamp(x_i[j] + phi() * (x_i[j] - x_k[j]), lower[j], upper[j]);
  return v;
}

double fitness(double concentration) {
  require(std::isfinite(concentration), "concentration must be finite");
  return concentration >= 0.0 ? 1.0 / (1.0 + concentration) : 1.0 + std::abs(concentration);
}

double selection_probability(double fit_i, double fit_max) {
  require(fit_max > 0.0, "fit_max must be > 0");
  return 0.9 * fit_i / fit_max + 0.1;
}

double food_concentration(double load, double success, double a, double b) {
  require(weights_sum_to_one(a, b), "fitness weights must satisfy a + b = 1");
  return a * load + b * success;
}

AbcResult abc_optimize(const AbcConfig& cfg, const Objective& objective, Rng& rng, const GenerationObserver& observer) {
  cfg.validate();
  AbcResult result;
  auto pop = init_population(cfg, unit_draw(rng));
  auto evaluate = [&](FoodSource& f) {
    f.objective = objective(f.solution);
    f.fitness = fitness(f.objective);
    ++result.evaluations;
  };
  for (auto& f : pop) evaluate(f);

  const std::size_t n = pop.size();
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (pop[i].fitness > pop[best].fitness) best = i;
  result.solution = pop[best].solution;
  result.objective = pop[best].objective;
  result.fitness = pop[best].fitness;
  auto note_best = [&](const FoodSource& f) {
    if (f.fitness > result.fitness) {
      result.solution = f.solution;
      result.objective = f.objective;
      result.fitness = f.fitness;
    }
  };

  auto phi = [&rng] { return rng.uniform(-1.0, 1.0); };
  auto try_improve = [&](std::size_t i) {
    std::size_t k = rng.index(n - 1);
    if (k >= i) ++k;
    FoodSource candidate;
    candidate.solution = explore_neighbor(pop[i].solution, pop[k].solution, i, k, phi, cfg.lower, cfg.upper);
    evaluate(candidate);
    if (candidate.fitness > pop[i].fitness) {
      candidate.crowding = pop[i].crowding;
      pop[i] = std::move(candidate);
      note_best(pop[i]);
    } else {
      ++pop[i].trial_counter;
    }
  };

  std::vector<char> replaced(n);
  std::vector<double> prob(n);
  for (int gen = 0; gen < cfg.max_generations; ++gen) {
    for (std::size_t i = 0; i < n; ++i) try_improve(i);

    double fit_max = 0.0;
    for (const auto& f : pop) fit_max = std::max(fit_max, f.fitness);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += prob[i] = selection_probability(pop[i].fitness, fit_max);
    for (std::size_t t = 0; t < n; ++t) {
      double u = rng.uniform() * total;
      std::size_t i = 0;
      while (i + 1 < n && u >= prob[i]) u -= prob[i++];
      try_improve(i);
    }

    std::fill(replaced.begin(), replaced.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (pop[i].trial_counter < cfg.limit) continue;
      FoodSource fresh;
      fresh.solution.resize(static_cast<std::size_t>(cfg.dimension));
      for (std::size_t j = 0; j < fresh.solution.size(); ++j)
        fresh.solution[j] = cfg.lower[j] + rng.uniform() * (cfg.upper[j] - cfg.lower[j]);
      evaluate(fresh);
      pop[i] = std::move(fresh);
      note_best(pop[i]);
      replaced[i] = 1;
      ++result.scouts;
    }
    result.best_fitness_history.push_back(result.fitness);
    if (observer) observer(gen, pop, replaced);
  }
  return result;
}

const char* role_name(BeeRole role) {
  switch (role) {
    case BeeRole::Employed: return "EBM";
    case BeeRole::Scout: return "SBM";
    case BeeRole::Onlooker: return "OBM";
  }
  return "?";
}

bool is_valid_transition(BeeRole from, BeeRole to) {
  if (from == to) return true;
  switch (from) {
    case BeeRole::Scout: return to == BeeRole::Employed;
    case BeeRole::Employed: return to == BeeRole::Scout;
    case BeeRole::Onlooker: return to == BeeRole::Employed || to == BeeRole::Scout;
  }
  return false;
}

void change_role(BeeMessage& bm, BeeRole to) {
  if (!is_valid_transition(bm.role, to))
    throw InvalidTransition(fmt::format("{} cannot become {}", role_name(bm.role), role_name(to)));
  bm.role = to;
}

void RoutingWeights::validate() const {
  require(load >= 0.0 && success >= 0.0, "routing weights must be non-negative");
  require(weights_sum_to_one(load, success), "fitness weights must satisfy a + b = 1");
}

double drone_fitness(double load, double success, const RoutingWeights& w) {
  const double mu = w.invert_concentration ? 1.0 - success : success;
  return fitness(food_concentration(load, mu, w.load, w.success));
}

void PrioritySet::upsert(const PriorityEntry& entry) {
  erase(entry.drone);
  const auto pos = std::find_if(entries_.begin(), entries_.end(), [&](const PriorityEntry& e) {
    return better(entry.fitness, entry.drone, e.fitness, e.drone);
  });
  entries_.insert(pos, entry);
}

bool PrioritySet::erase(DroneId drone) {
  const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const PriorityEntry& e) { return e.drone == drone; });
  if (it == entries_.end()) return false;
  entries_.erase(it);
  return true;
}

void PrioritySet::expire(double now, double ttl) {
  std::erase_if(entries_, [&](const PriorityEntry& e) { return now - e.discovered_at > ttl; });
}

std::optional<PriorityEntry> PrioritySet::find(DroneId drone) const {
  for (const auto& e : entries_)
    if (e.drone == drone) return e;
  return std::nullopt;
}

TransitionResult bm_transition(BeeMessage& bm, const std::optional<FoodDrone>& food, PrioritySet& priority, int limit,
                               const CrowdingLookup& crowding) {
  if (bm.hops_remaining < 0) throw std::invalid_argument("bee message has expired");
  switch (bm.role) {
    case BeeRole::Scout:
      if (food && food->crowding < limit) {
        change_role(bm, BeeRole::Employed);
        bm.food = food->id;
        return {bm.role, food->id};
      }
      return {bm.role, std::nullopt};
    case BeeRole::Employed:
      if (!food || food->crowding >= limit) {
        change_role(bm, BeeRole::Scout);
        bm.food.reset();
        return {bm.role, std::nullopt};
      }
      return {bm.role, food->id};
    case BeeRole::Onlooker: {
      if (food && food->crowding < limit) {
        bm.food = food->id;
        return {bm.role, food->id};
      }
      if (food) priority.erase(food->id);
      for (const auto& e : priority.entries()) {
        if (crowding(e.drone) < limit) {
          change_role(bm, BeeRole::Employed);
          bm.food = e.drone;
          return {bm.role, e.drone};
        }
      }
      change_role(bm, BeeRole::Scout);
      bm.food.reset();
      return {bm.role, std::nullopt};
    }
  }
  return {bm.role, std::nullopt};
}

double NetworkView::fitness_of(DroneId id, const RoutingWeights& w) const {
  const auto& d = at(id);
  return drone_fitness(d.load, d.success_rate, w);
}

bool NetworkView::linked(DroneId a, DroneId b) const { return sim::distance(at(a).position, at(b).position) <= range; }

NetworkView snapshot(std::span<const sim::DroneState> drones, double range, double now) {
  NetworkView view;
  view.range = range;
  view.taken_at = now;
  view.drones.reserve(drones.size());
  for (const auto& d : drones) {
    DroneView v{d.id, d.position, d.load(), d.success_rate(), d.alive};
    if (d.is_malicious) {
      v.load = 0.0;
      v.success_rate = 1.0;
    }
    view.drones.push_back(v);
  }
  return view;
}

std::vector<DroneId> rank_candidates(DroneId sender, DroneId receiver, const NetworkView& view,
                                     const PrioritySet& priority, const RoutingWeights& w,
                                     const CrowdingLookup& crowding, int limit) {
  struct Scored {
    DroneId id;
    double fit;
  };
  std::vector<Scored> pool;
  for (const auto& e : priority.entries()) {
    if (e.drone == sender || e.drone == receiver) continue;
    if (!view.at(e.drone).alive) continue;
    if (crowding(e.drone) >= limit) continue;
    if (!view.linked(e.drone, sender) || !view.linked(e.drone, receiver)) continue;
    pool.push_back({e.drone, view.fitness_of(e.drone, w)});
  }
  std::sort(pool.begin(), pool.end(), [](const Scored& a, const Scored& b) { return better(a.fit, a.id, b.fit, b.id); });
  std::vector<DroneId> out;
  out.reserve(pool.size());
  for (const auto& s : pool) out.push_back(s.id);
  return out;
}

void BeeProtocolConfig::validate() const {
  require(rate_hz > 0.0, "BM rate must be > 0");
  require(ttl_hops >= 1, "BM hop budget must be >= 1");
  require(dwell >= 0.0, "dwell must be >= 0");
  require(scout_probes >= 1, "scout_probes must be >= 1");
  require(entry_ttl > 0.0, "entry_ttl must be > 0");
  require(limit >= 1, "limit must be >= 1");
  weights.validate();
}

BeeRouting::BeeRouting(BeeProtocolConfig cfg, std::size_t drone_count)
    : cfg_(std::move(cfg)), crowding_(drone_count, 0), generation_count_(drone_count, 0) {
  cfg_.validate();
  priority_.reserve(drone_count);
  for (std::size_t i = 0; i < drone_count; ++i) priority_.emplace_back(drone_id(i));
}

void BeeRouting::start(double now, const Schedule& schedule) {
  const double period = 1.0 / cfg_.rate_hz;
  const std::size_t n = crowding_.size();
  phase_.assign(n, 0.0);
  ticks_.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    phase_[i] = now + period * static_cast<double>(i) / static_cast<double>(n);
    schedule(phase_[i], Event{EventKind::Generate, drone_id(i), 0});
  }
}

CrowdingLookup BeeRouting::crowding_lookup() const {
  return [this](DroneId id) { return crowding_[index_of(id)]; };
}

std::uint64_t BeeRouting::transitions(BeeRole from, BeeRole to) const {
  return transitions_[role_index(from) * 3 + role_index(to)];
}

void BeeRouting::record(BeeRole from, BeeRole to) {
  if (from != to) ++transitions_[role_index(from) * 3 + role_index(to)];
}

FoodDrone BeeRouting::food_at(DroneId id, const World& world) const {
  return {id, world.view->fitness_of(id, cfg_.weights), crowding_[index_of(id)]};
}

void BeeRouting::retire(std::uint64_t id) { messages_.erase(id); }

void BeeRouting::handle(const Event& event, double now, World& world, const Schedule& schedule) {
  switch (event.kind) {
    case EventKind::Generate: {
      const auto& drone = world.drones[index_of(event.drone)];
      const std::size_t i = index_of(event.drone);
      // Absolute tick times avoid drift from summing the period.
      schedule(phase_[i] + static_cast<double>(++ticks_[i]) / cfg_.rate_hz, event);
      if (!drone.alive) return;
      BeeMessage bm;
      bm.id = next_id_++;
      bm.role = (generation_count_[index_of(event.drone)]++ % 2 == 0) ? BeeRole::Scout : BeeRole::Onlooker;
      bm.origin = bm.current = event.drone;
      bm.hops_remaining = cfg_.ttl_hops;
      bm.size_bits = cfg_.size_bits;
      bm.range_advertisement = world.link->range;
      ++generated_;
      auto& stored = messages_.emplace(bm.id, bm).first->second;
      if (stored.role == BeeRole::Scout)
        scout(stored, event.drone, now, world, schedule);
      else
        onlook(stored, event.drone, now, world, schedule);
      return;
    }
    case EventKind::Arrive: {
      const auto it = messages_.find(event.bm);
      if (it == messages_.end()) return;
      BeeMessage& bm = it->second;
      if (!world.drones[index_of(event.drone)].alive) {
        retire(bm.id);
        return;
      }
      if (bm.role == BeeRole::Scout)
        scout(bm, event.drone, now, world, schedule);
      else
        settle(bm, event.drone, now, world, schedule);
      return;
    }
    case EventKind::Depart: {
      const auto it = messages_.find(event.bm);
      if (it == messages_.end()) return;
      --crowding_[index_of(event.drone)];
      --dwelling_;
      retire(event.bm);
      return;
    }
  }
}

void BeeRouting::scout(BeeMessage& bm, DroneId at, double now, World& world, const Schedule& schedule) {
  const auto& here = world.drones[index_of(at)];
  std::vector<DroneId> neighbours;
  for (const auto& d : world.drones) {
    if (d.id == at || !d.alive) continue;
    if (sim::distance(d.position, here.position) <= world.link->range) neighbours.push_back(d.id);
  }
  if (neighbours.empty()) {
    retire(bm.id);
    return;
  }
  const std::array<double, 3> lo{world.box.low.x, world.box.low.y, world.box.low.z};
  const std::array<double, 3> hi{world.box.high.x, world.box.high.y, world.box.high.z};
  const std::array<double, 3> origin{here.position.x, here.position.y, here.position.z};
  auto phi = [&world] { return world.rng->uniform(-1.0, 1.0); };

  std::optional<FoodDrone> best;
  auto& priority = priority_[index_of(at)];
  for (int p = 0; p < cfg_.scout_probes; ++p) {
    const DroneId partner = neighbours[world.rng->index(neighbours.size())];
    const auto& pp = world.drones[index_of(partner)].position;
    const std::array<double, 3> other{pp.x, pp.y, pp.z};
    const auto v = explore_neighbor(origin, other, 0, 1, phi, lo, hi);
    const sim::Vec3 target{v[0], v[1], v[2]};
    DroneId nearest = neighbours.front();
    double nearest_d = std::numeric_limits<double>::infinity();
    for (DroneId n : neighbours) {
      const double d = sim::distance(world.drones[index_of(n)].position, target);
      if (d < nearest_d) {
        nearest_d = d;
        nearest = n;
      }
    }
    const FoodDrone found = food_at(nearest, world);
    priority.upsert({found.id, found.fitness, found.crowding, now});
    if (!best || better(found.fitness, found.id, best->fitness, best->id)) best = found;
  }
  const BeeRole before = bm.role;
  const auto decision = bm_transition(bm, best, priority, cfg_.limit, crowding_lookup());
  record(before, bm.role);
  // A crowded best find leaves the scout a scout; it keeps searching from that drone.
  hop(bm, at, decision.next_food.value_or(best->id), now, world, schedule);
}

void BeeRouting::onlook(BeeMessage& bm, DroneId at, double now, World& world, const Schedule& schedule) {
  auto& priority = priority_[index_of(at)];
  priority.expire(now, cfg_.entry_ttl);
  std::optional<FoodDrone> pick;
  if (!priority.empty()) {
    double fit_max = 0.0;
    for (const auto& e : priority.entries()) fit_max = std::max(fit_max, world.view->fitness_of(e.drone, cfg_.weights));
    std::vector<double> weight;
    double total = 0.0;
    for (const auto& e : priority.entries())
      total += weight.emplace_back(selection_probability(world.view->fitness_of(e.drone, cfg_.weights), fit_max));
    double u = world.rng->uniform() * total;
    std::size_t i = 0;
    while (i + 1 < weight.size() && u >= weight[i]) u -= weight[i++];
    pick = food_at(priority.entries()[i].drone, world);
  }
  const BeeRole before = bm.role;
  const auto decision = bm_transition(bm, pick, priority, cfg_.limit, crowding_lookup());
  record(before, bm.role);
  if (decision.role == BeeRole::Scout) {
    scout(bm, at, now, world, schedule);
    return;
  }
  hop(bm, at, *decision.next_food, now, world, schedule);
}

void BeeRouting::hop(BeeMessage& bm, DroneId from, DroneId to, double now, World& world, const Schedule& schedule) {
  if (bm.hops_remaining <= 0) {
    retire(bm.id);
    return;
  }
  const double u = to_unit(hash_keys(world.channel_seed, bm.id, static_cast<std::uint64_t>(bm.hops_remaining)));
  const double gain = -std::log1p(-u);
  ++transmissions_;
  const auto outcome = sim::attempt_transmission_with_gain(world.drones[index_of(from)], world.drones[index_of(to)],
                                                           *world.channel, *world.link, gain);
  if (!outcome.delivered) {
    retire(bm.id);
    return;
  }
  --bm.hops_remaining;
  bm.current = to;
  schedule(now + outcome.delay, Event{EventKind::Arrive, to, bm.id});
}

void BeeRouting::settle(BeeMessage& bm, DroneId at, double now, World& world, const Schedule& schedule) {
  const BeeRole before = bm.role;
  const auto decision = bm_transition(bm, food_at(at, world), priority_[index_of(at)], cfg_.limit, crowding_lookup());
  record(before, bm.role);
  if (decision.role == BeeRole::Scout) {
    scout(bm, at, now, world, schedule);
    return;
  }
  if (decision.next_food && *decision.next_food != at) {
    hop(bm, at, *decision.next_food, now, world, schedule);
    return;
  }
  ++crowding_[index_of(at)];
  ++dwelling_;
  schedule(now + cfg_.dwell, Event{EventKind::Depart, at, bm.id});
}

std::vector<DroneId> BeeRouting::candidates(DroneId sender, DroneId receiver, const NetworkView& view, double now) {
  auto& priority = priority_[index_of(sender)];
  priority.expire(now, cfg_.entry_ttl);
  for (const auto& e : std::vector<PriorityEntry>(priority.entries()))
    if (crowding_[index_of(e.drone)] >= cfg_.limit) priority.erase(e.drone);
  return rank_candidates(sender, receiver, view, priority, cfg_.weights, crowding_lookup(), cfg_.limit);
}

std::vector<DroneId> select_candidates(DroneId sender, DroneId receiver, std::size_t k,
                                       std::span<sim::DroneState> drones, const analytics::ChannelParams& channel,
                                       const sim::LinkModel& link, const BeeProtocolConfig& cfg, double warmup,
                                       std::uint64_t seed) {
  require(k >= 1, "k must be >= 1");
  require(index_of(sender) < drones.size() && index_of(receiver) < drones.size(), "unknown sender or receiver");
  const NetworkView view = snapshot(drones, link.range, 0.0);
  Rng rng(derive_seed(seed, 1));
  BeeRouting routing(cfg, drones.size());
  BeeRouting::World world{drones, &view, &channel, &link, sim::Box{}, &rng, derive_seed(seed, 2)};
  sim::EventQueue<BeeRouting::Event> queue;
  const BeeRouting::Schedule schedule = [&](double t, const BeeRouting::Event& e) { queue.push(t, e); };
  routing.start(0.0, schedule);
  while (!queue.empty() && queue.next_time() <= warmup) {
    const auto entry = queue.pop();
    routing.handle(entry.payload, entry.time, world, schedule);
  }
  auto ranked = routing.candidates(sender, receiver, view, warmup);
  if (ranked.size() < k)
    throw CandidateShortage(fmt::format("only {} admissible relays for k = {}", ranked.size(), k));
  ranked.resize(k);
  return ranked;
}

}  // namespace escm::abc
