#include "escm/ponc.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <map>
#include <numeric>
#include <stdexcept>

namespace escm::ponc {
namespace {

bool abstains(const ConsensusNode& n) { return n.malicious && n.strategy == Strategy::Abstention; }
bool inverts(const ConsensusNode& n) { return n.malicious && n.strategy == Strategy::VerdictInversion; }

bool send(MessageBus& bus, Tally& tally, Step step, ConsensusNode& from, ConsensusNode& to) {
  ++tally.messages;
  ++from.sent;
  const bool ok = from.id == to.id || bus.deliver(step, from.id, to.id);
  if (ok) ++to.received;
  if (tally.trace != nullptr) tally.trace->push_back({tally.round, step, from.id, to.id, ok});
  return ok;
}

Verdict honest_verdict(const CodingScheme& scheme, double provider_capability, const coding::CnTopology& topology) {
  const double canonical = canonical_score(scheme, provider_capability, topology);
  if (canonical == invalid_score || scheme.claimed_score != canonical) return Verdict::invalid();
  return Verdict::valid(canonical);
}

Verdict self_verdict(const CodingScheme& scheme, const ConsensusNode& provider, const coding::CnTopology& topology) {
  if (provider.malicious && provider.strategy != Strategy::VerdictInversion) return Verdict::valid(scheme.claimed_score);
  return honest_verdict(scheme, provider.coding_capability, topology);
}

bool better(double score_a, DroneId a, double score_b, DroneId b) {
  if (score_a != score_b) return score_a > score_b;
  return a < b;
}

}  // namespace

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::ScoreInflation: return "score_inflation";
    case Strategy::DependentVectors: return "dependent_vectors";
    case Strategy::VerdictInversion: return "verdict_inversion";
    case Strategy::Abstention: return "abstention";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (Strategy s : all_strategies)
    if (name == strategy_name(s)) return s;
  return std::nullopt;
}

const char* step_name(Step s) {
  switch (s) {
    case Step::Proposal: return "proposal";
    case Step::ViewExchange: return "view";
    case Step::Broadcast: return "broadcast";
  }
  return "?";
}

cyber::Digest CodingScheme::digest() const {
  cyber::Bytes bytes;
  const auto p = static_cast<std::uint32_t>(provider);
  for (int shift = 24; shift >= 0; shift -= 8) bytes.push_back(static_cast<std::uint8_t>(p >> shift));
  for (const auto& v : vectors) {
    bytes.push_back(v.generator.value());
    bytes.push_back(static_cast<std::uint8_t>(v.length));
  }
  return cyber::sha256(bytes);
}

double canonical_score(const CodingScheme& scheme, double provider_capability, const coding::CnTopology& topology) {
  if (!scheme.proposed || scheme.vectors.size() != topology.relays) return invalid_score;
  for (const auto& v : scheme.vectors)
    if (v.length != topology.per_receiver) return invalid_score;
  return coding::receivers_decodable(topology, scheme.vectors) ? provider_capability : invalid_score;
}

bool RadioBus::deliver(Step, DroneId, DroneId) {
  elapsed_ += mac_;
  ++attempts_;
  const bool ok = draw_() < p_;
  successes_ += ok;
  return ok;
}

std::vector<CodingScheme> propose_schemes(std::span<const ConsensusNode> nodes, const coding::CnTopology& topology,
                                          Rng& rng, const ConsensusConfig& cfg) {
  if (nodes.size() < 2) throw std::invalid_argument("a consensus round needs at least two nodes");
  std::vector<CodingScheme> out;
  out.reserve(nodes.size());
  for (const auto& n : nodes) {
    CodingScheme s{n.id, true, coding::assign_vectors(topology, &rng), n.coding_capability};
    if (n.malicious) {
      switch (n.strategy) {
        case Strategy::ScoreInflation:
          s.claimed_score = n.coding_capability * cfg.inflation_factor;
          break;
        case Strategy::DependentVectors:
          for (auto& v : s.vectors) v.generator = s.vectors.front().generator;
          if (topology.per_receiver < 2) s.vectors.front().length += 1;
          break;
        case Strategy::VerdictInversion:
          break;
        case Strategy::Abstention:
          s.proposed = false;
          s.vectors.clear();
          break;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

Verdict verify_scheme(const CodingScheme& scheme, const ConsensusNode& verifier, double provider_capability,
                      const coding::CnTopology& topology) {
  if (verifier.id == scheme.provider) throw std::invalid_argument("a provider does not verify its own scheme");
  const Verdict honest = honest_verdict(scheme, provider_capability, topology);
  if (!inverts(verifier)) return honest;
  return honest.is_valid() ? Verdict::invalid() : Verdict::valid(scheme.claimed_score);
}

std::vector<std::vector<Verdict>> distribute_and_verify(std::span<ConsensusNode> nodes,
                                                        std::span<const CodingScheme> schemes,
                                                        const coding::CnTopology& topology, MessageBus& bus,
                                                        Tally& tally) {
  const std::size_t k = nodes.size();
  std::vector<std::vector<Verdict>> verdicts(k, std::vector<Verdict>(k));
  for (std::size_t p = 0; p < k; ++p) {
    const auto& scheme = schemes[p];
    if (!scheme.proposed) continue;
    verdicts[p][p] = self_verdict(scheme, nodes[p], topology);
    for (std::size_t v = 0; v < k; ++v) {
      if (v == p) continue;
      if (!send(bus, tally, Step::Proposal, nodes[p], nodes[v]) || abstains(nodes[v])) continue;
      verdicts[v][p] = verify_scheme(scheme, nodes[v], nodes[p].coding_capability, topology);
    }
  }
  bus.end_phase(Step::Proposal);
  return verdicts;
}

ViewMatrix exchange_views(std::span<ConsensusNode> nodes, const std::vector<std::vector<Verdict>>& verdicts,
                          MessageBus& bus, Tally& tally) {
  const std::size_t k = nodes.size();
  ViewMatrix views(k, std::vector<std::vector<Verdict>>(k, std::vector<Verdict>(k)));
  for (std::size_t v = 0; v < k; ++v) {
    if (abstains(nodes[v])) continue;
    for (std::size_t h = 0; h < k; ++h)
      if (send(bus, tally, Step::ViewExchange, nodes[v], nodes[h])) views[h][v] = verdicts[v];
  }
  bus.end_phase(Step::ViewExchange);
  return views;
}

std::optional<RoundResult> decide_and_broadcast(const ViewMatrix& views, std::span<ConsensusNode> nodes,
                                                std::span<const CodingScheme> schemes,
                                                const std::vector<std::vector<Verdict>>& verdicts,
                                                const coding::CnTopology& topology, MessageBus& bus, Tally& tally) {
  const std::size_t k = nodes.size();
  std::vector<double> canonical(k);
  for (std::size_t p = 0; p < k; ++p) canonical[p] = canonical_score(schemes[p], nodes[p].coding_capability, topology);

  auto accepted_by = [&](std::size_t holder) {
    std::vector<std::size_t> accepted;
    for (std::size_t p = 0; p < k; ++p) {
      if (!schemes[p].proposed || canonical[p] == invalid_score) continue;
      std::size_t valid = 0;
      for (std::size_t v = 0; v < k; ++v) valid += views[holder][v][p].is_valid();
      if (2 * valid > k) accepted.push_back(p);
    }
    std::sort(accepted.begin(), accepted.end(), [&](std::size_t a, std::size_t b) {
      return better(canonical[a], nodes[a].id, canonical[b], nodes[b].id);
    });
    return accepted;
  };

  std::map<std::size_t, int> votes;
  for (std::size_t h = 0; h < k; ++h) {
    if (abstains(nodes[h])) continue;
    const auto accepted = accepted_by(h);
    if (!accepted.empty()) ++votes[accepted.front()];
  }
  if (votes.empty()) return std::nullopt;
  std::size_t chosen = votes.begin()->first;
  for (const auto& [p, n] : votes)
    if (n > votes[chosen] || (n == votes[chosen] && nodes[p].id < nodes[chosen].id)) chosen = p;

  std::vector<char> heard(k, 0);
  heard[chosen] = 1;
  for (std::size_t v = 0; v < k; ++v)
    if (v != chosen) heard[v] = send(bus, tally, Step::Broadcast, nodes[chosen], nodes[v]);
  bus.end_phase(Step::Broadcast);

  int approvals = 0;
  for (std::size_t v = 0; v < k; ++v) {
    if (!heard[v] || abstains(nodes[v]) || inverts(nodes[v])) continue;
    const Verdict& own = verdicts[v][chosen];
    approvals += own.is_valid() && own.score == schemes[chosen].claimed_score;
  }
  if (2 * static_cast<std::size_t>(approvals) <= k) return std::nullopt;

  RoundResult r;
  r.elected = nodes[chosen].id;
  r.winning = schemes[chosen];
  r.approvals = approvals;
  r.total = static_cast<int>(k);
  for (std::size_t p : accepted_by(chosen)) r.ranking.push_back(nodes[p].id);
  return r;
}

RoundResult run_consensus(std::span<ConsensusNode> nodes, const coding::CnTopology& topology, MessageBus& bus,
                          Rng& rng, const ConsensusConfig& cfg, std::vector<TraceRecord>* trace) {
  Tally tally{0, 0, trace};
  for (int round = 0; round <= cfg.max_retries; ++round) {
    tally.round = round;
    const auto schemes = propose_schemes(nodes, topology, rng, cfg);
    const auto verdicts = distribute_and_verify(nodes, schemes, topology, bus, tally);
    const auto views = exchange_views(nodes, verdicts, bus, tally);
    if (auto result = decide_and_broadcast(views, nodes, schemes, verdicts, topology, bus, tally)) {
      result->messages_exchanged = tally.messages;
      result->retries = round;
      result->elapsed = bus.elapsed();
      return *result;
    }
  }
  throw ConsensusFailed(fmt::format("no scheme reached a majority in {} rounds", cfg.max_retries + 1), tally.messages,
                        cfg.max_retries + 1, bus.elapsed());
}

DroneId honest_argmax(std::span<const ConsensusNode> nodes) {
  const ConsensusNode* best = nullptr;
  for (const auto& n : nodes) {
    if (n.malicious && n.strategy != Strategy::VerdictInversion) continue;
    if (best == nullptr || better(n.coding_capability, n.id, best->coding_capability, best->id)) best = &n;
  }
  if (best == nullptr) throw std::invalid_argument("no node proposes an honest scheme");
  return best->id;
}

void inject_internal_attack(std::span<ConsensusNode> nodes, std::span<const DroneId> malicious, Strategy strategy) {
  for (DroneId id : malicious) {
    const auto it = std::find_if(nodes.begin(), nodes.end(), [&](const ConsensusNode& n) { return n.id == id; });
    if (it == nodes.end())
      throw std::invalid_argument(fmt::format("drone {} is not part of the committee", static_cast<std::uint32_t>(id)));
    it->malicious = true;
    it->strategy = strategy;
  }
}

RoundResult run_poso_baseline(std::span<const ConsensusNode> nodes, Rng& rng) {
  if (nodes.size() < 2) throw std::invalid_argument("the baseline needs at least two nodes");
  const std::size_t coordinator = rng.index(nodes.size());
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (i != coordinator) order.push_back(i);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  return run_poso_sequence(nodes, coordinator, order);
}

RoundResult run_poso_sequence(std::span<const ConsensusNode> nodes, std::size_t coordinator,
                              std::span<const std::size_t> order) {
  const auto k = static_cast<std::int64_t>(nodes.size());
  if (k < 2) throw std::invalid_argument("the baseline needs at least two nodes");
  if (order.size() + 1 != nodes.size()) throw std::invalid_argument("order must list every node except the coordinator");
  std::size_t best = order.front();
  for (std::size_t i : order) {
    if (i == coordinator) throw std::invalid_argument("the coordinator does not propose");
    if (better(nodes[i].coding_capability, nodes[i].id, nodes[best].coding_capability, nodes[best].id)) best = i;
  }
  const auto position = std::find(order.begin(), order.end(), best) - order.begin() + 1;
  RoundResult r;
  r.elected = nodes[best].id;
  r.approvals = static_cast<int>(k - 1);
  r.total = static_cast<int>(k);
  // Each verified candidate costs its fan-out, the pairwise check among the others and the reply.
  r.messages_exchanged = position * ((k - 1) + (k - 1) * (k - 1) + (k - 1));
  for (std::size_t i = 0; i < static_cast<std::size_t>(position); ++i) r.ranking.push_back(nodes[order[i]].id);
  return r;
}

}  // namespace escm::ponc
