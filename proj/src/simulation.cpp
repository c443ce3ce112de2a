#include "escm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include "escm/abc_routing.hpp"
#include "escm/cn_coding.hpp"
#include "escm/error.hpp"
#include "escm/ponc.hpp"

namespace escm {
namespace {

enum class Stream : std::uint64_t { Setup, Mobility, Workload, Bees, Channel, Consensus, Radio };

std::uint64_t stream_seed(const ScenarioConfig& cfg, Stream s) {
  return derive_seed(cfg.seed, static_cast<std::uint64_t>(s));
}

enum class Plan { Direct, Sequential, Coded };

struct Batch {
  DroneId sender{};
  DroneId receiver{};
  double created = 0.0;
  std::vector<std::uint64_t> messages;
  Plan plan = Plan::Direct;
  DroneId relay{};
  std::vector<DroneId> relays;
  std::vector<coding::CodingVector> vectors;
};

struct SimEvent {
  enum class Kind { Bee, Move, View, Send, Forward };
  Kind kind = Kind::Move;
  abc::BeeRouting::Event bee;
  std::size_t drone = 0;
  std::uint64_t batch = 0;
};

class Simulation {
 public:
  Simulation(const ScenarioConfig& cfg, cyber::Ledger* ledger)
      : cfg_(cfg),
        box_(cfg.box()),
        q_(static_cast<std::size_t>(cfg.topology.parallel_messages)),
        mobility_rng_(stream_seed(cfg, Stream::Mobility)),
        workload_rng_(stream_seed(cfg, Stream::Workload)),
        bee_rng_(stream_seed(cfg, Stream::Bees)),
        consensus_rng_(stream_seed(cfg, Stream::Consensus)),
        radio_rng_(stream_seed(cfg, Stream::Radio)),
        channel_seed_(stream_seed(cfg, Stream::Channel)),
        routing_(bee_config(cfg), static_cast<std::size_t>(cfg.drones.count)),
        ledger_(ledger != nullptr ? ledger : &own_ledger_),
        registry_(cfg.seed) {
    place_drones();
    if (cfg_.features.ponc && !cfg_.features.dt) radio_p_ = radio_success_probability(cfg_);
    auto servers = cyber::default_servers(box_, cfg_.edge_radius);
    for (const auto& d : drones_)
      replicas_.push_back(cyber::map_to_cyberspace(d, servers, cyber::Role::CandidateRelay, registry_, signer_));
    last_block_.resize(drones_.size());
  }

  sim::SimMetrics run() {
    const auto bee_schedule = [this](double t, const abc::BeeRouting::Event& e) {
      SimEvent ev{SimEvent::Kind::Bee, e};
      queue_.push(t, ev);
    };
    view_ = abc::snapshot(drones_, cfg_.link.range, 0.0);
    routing_.start(0.0, bee_schedule);
    if (!static_) queue_.push(cfg_.mobility_step, {SimEvent::Kind::Move, {}});
    queue_.push(cfg_.view_refresh, {SimEvent::Kind::View, {}});
    if (cfg_.message.enabled) {
      for (std::size_t i = 0; i < drones_.size(); ++i) {
        if (drones_[i].is_malicious) continue;
        const double first = cfg_.warmup + cfg_.message.interval * static_cast<double>(i) / drones_.size();
        if (first <= cfg_.duration) queue_.push(first, {SimEvent::Kind::Send, {}, i});
      }
    }
    std::vector<std::uint64_t> sends(drones_.size(), 0);

    while (!queue_.empty()) {
      const auto entry = queue_.pop();
      const double now = entry.time;
      const SimEvent& ev = entry.payload;
      if (now > cfg_.duration && ev.kind != SimEvent::Kind::Forward) continue;
      switch (ev.kind) {
        case SimEvent::Kind::Bee: {
          abc::BeeRouting::World world{drones_, &view_, &cfg_.channel, &cfg_.link, box_, &bee_rng_, channel_seed_};
          routing_.handle(ev.bee, now, world, bee_schedule);
          break;
        }
        case SimEvent::Kind::Move:
          if (formation_) formation_->step(drones_, cfg_.mobility_step, mobility_rng_);
          else sim::step_mobility(drones_, cfg_.mobility_step, box_, mobility_rng_);
          queue_.push(now + cfg_.mobility_step, {SimEvent::Kind::Move, {}});
          break;
        case SimEvent::Kind::View:
          view_ = abc::snapshot(drones_, cfg_.link.range, now);
          queue_.push(now + cfg_.view_refresh, {SimEvent::Kind::View, {}});
          break;
        case SimEvent::Kind::Send: {
          send_batch(ev.drone, now);
          const double next = cfg_.warmup + cfg_.message.interval * (static_cast<double>(ev.drone) / drones_.size() +
                                                                      static_cast<double>(++sends[ev.drone]));
          queue_.push(next, ev);
          break;
        }
        case SimEvent::Kind::Forward:
          forward(ev.batch, now);
          break;
      }
    }
    metrics_.duration = cfg_.duration;
    metrics_.bee_transmissions = routing_.transmissions();
    return metrics_;
  }

 private:
  static abc::BeeProtocolConfig bee_config(const ScenarioConfig& cfg) {
    abc::BeeProtocolConfig b = cfg.bees;
    b.limit = cfg.abc.limit;
    b.weights.load = cfg.abc.weight_load;
    b.weights.success = cfg.abc.weight_success;
    return b;
  }

  void place_drones() {
    Rng setup(stream_seed(cfg_, Stream::Setup));
    const auto n = static_cast<std::size_t>(cfg_.drones.count);
    drones_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      drones_[i].id = drone_id(i);
      drones_[i].speed = cfg_.speed();
      drones_[i].coding_capability = cfg_.drones.capability.sample(setup);
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    const auto bad = static_cast<std::size_t>(std::llround(cfg_.drones.malicious_fraction * static_cast<double>(n)));
    for (std::size_t i = 0; i < bad; ++i) {
      std::swap(order[i], order[i + setup.index(n - i)]);
      drones_[order[i]].is_malicious = true;
    }
    for (auto id : cfg_.drones.malicious) drones_[id].is_malicious = true;

    if (!cfg_.drones.positions.empty()) {
      static_ = true;
      for (std::size_t i = 0; i < n; ++i) {
        drones_[i].position = cfg_.drones.positions[i];
        drones_[i].waypoint = drones_[i].position;
        drones_[i].speed = 0.0;
      }
    } else if (cfg_.drones.mobility == MobilityModel::Formation) {
      formation_ = std::make_unique<sim::FormationMobility>(box_, cfg_.drones.formation_radius, mobility_rng_);
      formation_->place(drones_, mobility_rng_);
    } else {
      for (auto& d : drones_) {
        d.position = box_.sample(mobility_rng_);
        d.waypoint = box_.sample(mobility_rng_);
      }
    }
  }

  void send_batch(std::size_t s, double now) {
    const auto& sender = drones_[s];
    std::vector<std::size_t> reachable;
    for (std::size_t j = 0; j < drones_.size(); ++j) {
      if (j == s || drones_[j].is_malicious || !drones_[j].alive) continue;
      if (sim::distance(sender.position, drones_[j].position) <= 2.0 * cfg_.link.range) reachable.push_back(j);
    }
    if (reachable.empty()) return;
    const std::size_t r = reachable[workload_rng_.index(reachable.size())];

    Batch batch;
    batch.sender = sender.id;
    batch.receiver = drones_[r].id;
    batch.created = now;
    for (std::size_t j = 0; j < q_; ++j) {
      const std::uint64_t m = next_message_++;
      ++metrics_.messages_sent;
      if (drones_[s].queue.push(m)) batch.messages.push_back(m);
      else ++metrics_.messages_lost;
    }

    auto candidates = routing_.candidates(batch.sender, batch.receiver, view_, now);
    if (candidates.size() > static_cast<std::size_t>(cfg_.candidates)) candidates.resize(cfg_.candidates);
    double latency = 0.0;
    if (candidates.empty()) {
      batch.plan = Plan::Direct;
    } else {
      latency = elect(batch, candidates, now);
    }
    const std::uint64_t id = next_batch_++;
    batches_.emplace(id, std::move(batch));
    queue_.push(now + latency, {SimEvent::Kind::Forward, {}, 0, id});
  }

  // Picks the relay and coding scheme for a batch; returns the decision latency.
  double elect(Batch& batch, const std::vector<DroneId>& candidates, double now) {
    std::vector<ponc::ConsensusNode> committee;
    for (DroneId c : candidates) {
      const auto& d = drones_[index_of(c)];
      committee.push_back({c, d.coding_capability, d.is_malicious, cfg_.consensus.strategy});
    }
    const std::size_t n = candidates.size();
    const auto topology = coding::CnTopology::combination(n, std::min(q_, n));
    const ponc::ConsensusConfig ccfg{cfg_.consensus.max_retries, cfg_.consensus.inflation_factor};

    batch.relays = candidates;
    batch.plan = cfg_.features.coding && n > q_ ? Plan::Coded : Plan::Sequential;
    batch.relay = candidates.front();
    if (n < 2) return 0.0;

    double latency = 0.0;
    bool decided = false;
    if (cfg_.features.ponc) {
      std::unique_ptr<ponc::MessageBus> bus;
      ponc::RadioBus* radio = nullptr;
      if (cfg_.features.dt) {
        bus = std::make_unique<ponc::TwinBus>(cfg_.consensus.ipc_latency);
      } else {
        auto rb = std::make_unique<ponc::RadioBus>(radio_p_, cfg_.link.mac_delay, unit_draw(radio_rng_));
        radio = rb.get();
        bus = std::move(rb);
      }
      try {
        const auto result = ponc::run_consensus(committee, topology, *bus, consensus_rng_, ccfg);
        metrics_.consensus_messages += static_cast<std::uint64_t>(result.messages_exchanged);
        metrics_.consensus_rounds += static_cast<std::uint64_t>(result.retries + 1);
        latency = result.elapsed + commit(batch, result, now + result.elapsed);
        batch.vectors = result.winning.vectors;
        decided = true;
      } catch (const ponc::ConsensusFailed& e) {
        ++metrics_.consensus_failures;
        ++metrics_.relay_fallbacks;
        metrics_.consensus_messages += static_cast<std::uint64_t>(e.messages());
        metrics_.consensus_rounds += static_cast<std::uint64_t>(e.rounds());
        latency = e.elapsed();
      }
      if (radio != nullptr) {
        metrics_.consensus_link_attempts += radio->attempts();
        metrics_.consensus_link_successes += radio->successes();
      }
    }
    if (!decided) {
      // Unverified choice: the fittest candidate relays and supplies the scheme.
      const auto schemes = ponc::propose_schemes(committee, topology, consensus_rng_, ccfg);
      batch.vectors = schemes.front().vectors;
      batch.relay = candidates.front();
    }
    return latency;
  }

  // Records the decision on the ledger and installs the relay; returns the notification latency.
  double commit(Batch& batch, const ponc::RoundResult& result, double now) {
    cyber::ConsensusDecision decision;
    decision.elected = result.elected;
    for (DroneId id : result.ranking)
      if (id != result.elected) decision.backups.push_back(id);
    decision.scheme_digest = result.winning.digest();
    decision.block_height = ledger_->next_height();

    cyber::Block block;
    block.height = decision.block_height;
    block.previous = ledger_->head_digest();
    block.elected = result.elected;
    block.scheme_digest = decision.scheme_digest;
    block.timestamp_us = static_cast<std::int64_t>(std::llround(now * 1e6));
    const auto& replica = replicas_[index_of(batch.sender)];
    block.transactions.push_back(cyber::build_transaction(replica, replica.address(),
                                                          replicas_[index_of(batch.receiver)].address(), clock_, now,
                                                          registry_, signer_));
    ledger_->append(std::move(block));
    ++metrics_.blocks;

    const cyber::NotificationModel model{cfg_.features.dt, cfg_.consensus.ipc_latency, cfg_.link.mac_delay};
    const auto path = cyber::update_physical(decision, drones_, last_block_, model);
    batch.relay = path.relay;
    return path.notification_latency;
  }

  double gain(std::uint64_t batch, std::uint64_t tag, DroneId relay, std::uint64_t hop) const {
    const double u = to_unit(hash_keys(channel_seed_, batch, tag, static_cast<std::uint64_t>(relay), hop));
    return -std::log1p(-u);
  }

  // Two-hop delivery through `relay`; malicious relays swallow what they receive.
  std::optional<double> relay_path(DroneId from, DroneId relay, DroneId to, std::uint64_t batch, std::uint64_t tag) {
    auto& s = drones_[index_of(from)];
    auto& m = drones_[index_of(relay)];
    const auto first = sim::attempt_transmission_with_gain(s, m, cfg_.channel, cfg_.link, gain(batch, tag, relay, 0));
    if (!first.delivered || m.is_malicious || !m.alive) return std::nullopt;
    const auto second = sim::attempt_transmission_with_gain(m, drones_[index_of(to)], cfg_.channel, cfg_.link,
                                                            gain(batch, tag, relay, 1));
    if (!second.delivered) return std::nullopt;
    return first.delay + second.delay;
  }

  coding::Symbols payload(std::uint64_t message) const {
    coding::Symbols out;
    const auto bytes = static_cast<std::size_t>((cfg_.message.size_bits + 7) / 8);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < bytes; ++i) {
      if (i % 8 == 0) word = hash_keys(channel_seed_, 0x7061796c6f6164ULL, message, i / 8);
      out.emplace_back(static_cast<std::uint8_t>(word >> (8 * (i % 8))));
    }
    return out;
  }

  void deliver(std::uint64_t message_count, double delay) {
    for (std::uint64_t i = 0; i < message_count; ++i) {
      ++metrics_.messages_delivered;
      metrics_.delays.push_back(delay);
      metrics_.delivered_bits += static_cast<std::uint64_t>(cfg_.message.size_bits);
    }
  }

  void forward(std::uint64_t id, double now) {
    const auto it = batches_.find(id);
    Batch batch = std::move(it->second);
    batches_.erase(it);
    auto& sender = drones_[index_of(batch.sender)];
    for (std::uint64_t m : batch.messages) sender.queue.remove(m);
    const double waited = now - batch.created;
    const std::uint64_t count = batch.messages.size();
    std::uint64_t delivered = 0;

    switch (batch.plan) {
      case Plan::Direct:
        for (std::uint64_t j = 0; j < count; ++j) {
          const auto out = sim::attempt_transmission_with_gain(sender, drones_[index_of(batch.receiver)], cfg_.channel,
                                                               cfg_.link, gain(id, 1 + j, batch.receiver, 0));
          if (out.delivered) {
            deliver(1, waited + out.delay);
            ++delivered;
          }
        }
        break;
      case Plan::Sequential:
        for (std::uint64_t j = 0; j < count; ++j) {
          if (const auto d = relay_path(batch.sender, batch.relay, batch.receiver, id, 1 + j)) {
            deliver(1, waited + *d);
            ++delivered;
          }
        }
        break;
      case Plan::Coded: {
        ++metrics_.coded_batches;
        std::vector<coding::Symbols> data;
        for (std::uint64_t m : batch.messages) data.push_back(payload(m));
        std::vector<coding::EncodedMessage> received;
        double slowest = 0.0;
        for (std::size_t i = 0; i < batch.relays.size(); ++i) {
          const auto d = relay_path(batch.sender, batch.relays[i], batch.receiver, id, 0);
          if (d && received.size() < q_) {
            received.push_back(coding::encode(data, batch.vectors[i], i));
            slowest = std::max(slowest, *d);
          }
        }
        if (count == q_ && received.size() == q_) {
          try {
            if (coding::decode(received) == data) {
              deliver(count, waited + slowest);
              delivered = count;
            }
          } catch (const coding::NotDecodable&) {
          }
        }
        break;
      }
    }
    metrics_.messages_lost += count - delivered;
  }

  const ScenarioConfig& cfg_;
  sim::Box box_;
  std::size_t q_;
  Rng mobility_rng_;
  Rng workload_rng_;
  Rng bee_rng_;
  Rng consensus_rng_;
  Rng radio_rng_;
  std::uint64_t channel_seed_;
  std::vector<sim::DroneState> drones_;
  std::unique_ptr<sim::FormationMobility> formation_;
  bool static_ = false;
  abc::BeeRouting routing_;
  abc::NetworkView view_;
  sim::EventQueue<SimEvent> queue_;
  std::map<std::uint64_t, Batch> batches_;
  std::uint64_t next_batch_ = 0;
  std::uint64_t next_message_ = 0;
  double radio_p_ = 1.0;
  cyber::Ledger own_ledger_;
  cyber::Ledger* ledger_;
  cyber::Registry registry_;
  cyber::KeyedHashSigner signer_;
  cyber::TransactionClock clock_;
  std::vector<cyber::Replica> replicas_;
  std::vector<std::optional<std::uint64_t>> last_block_;
  sim::SimMetrics metrics_;
};

}  // namespace

double radio_success_probability(const ScenarioConfig& cfg) {
  analytics::MobilityParams m;
  m.relative_speed = cfg.speed();
  m.elapsed_time = cfg.radio.elapsed_time;
  return analytics::mobile_success_rate(cfg.radio.channel, m);
}

sim::SimMetrics run(const ScenarioConfig& cfg, cyber::Ledger* ledger) {
  cfg.validate();
  Simulation sim(cfg, ledger);
  return sim.run();
}

}  // namespace escm
