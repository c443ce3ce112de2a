#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "escm/cn_coding.hpp"
#include "escm/cyberuav.hpp"
#include "escm/error.hpp"
#include "escm/random.hpp"
#include "escm/sim_core.hpp"

namespace escm::ponc {

enum class Strategy { ScoreInflation, DependentVectors, VerdictInversion, Abstention };

const char* strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);
inline constexpr Strategy all_strategies[] = {Strategy::ScoreInflation, Strategy::DependentVectors,
                                              Strategy::VerdictInversion, Strategy::Abstention};

struct ConsensusNode {
  DroneId id{};
  double coding_capability = 200.0;  // kbps
  bool malicious = false;
  Strategy strategy = Strategy::ScoreInflation;
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
};

struct CodingScheme {
  DroneId provider{};
  bool proposed = true;
  std::vector<coding::CodingVector> vectors;  // one per relay of the topology
  double claimed_score = 0.0;

  cyber::Digest digest() const;
};

inline constexpr double invalid_score = -std::numeric_limits<double>::infinity();

// Provider CR when the scheme decodes at every receiver, otherwise -inf.
double canonical_score(const CodingScheme& scheme, double provider_capability, const coding::CnTopology& topology);

struct Verdict {
  enum class Kind { Valid, Invalid, Missing };
  Kind kind = Kind::Missing;
  double score = 0.0;

  static Verdict valid(double s) { return {Kind::Valid, s}; }
  static Verdict invalid() { return {Kind::Invalid, 0.0}; }
  bool is_valid() const { return kind == Kind::Valid; }
};

enum class Step { Proposal, ViewExchange, Broadcast };
const char* step_name(Step s);

struct TraceRecord {
  int round = 0;
  Step step = Step::Proposal;
  DroneId from{};
  DroneId to{};
  bool delivered = true;
};

// Transport for consensus messages. Self-addressed messages never reach the bus.
class MessageBus {
 public:
  virtual ~MessageBus() = default;
  virtual bool deliver(Step step, DroneId from, DroneId to) = 0;
  virtual void end_phase(Step) {}
  double elapsed() const { return elapsed_; }

 protected:
  double elapsed_ = 0.0;
};

// Replica-to-replica messaging on the edge: lossless, one IPC latency per phase.
class TwinBus final : public MessageBus {
 public:
  explicit TwinBus(double ipc_latency = 0.001) : ipc_(ipc_latency) {}
  bool deliver(Step, DroneId, DroneId) override { return true; }
  void end_phase(Step) override { elapsed_ += ipc_; }

 private:
  double ipc_;
};

// Drone-to-drone messaging over the radio: each message succeeds with a fixed probability and
// occupies the channel for one access delay.
class RadioBus final : public MessageBus {
 public:
  RadioBus(double success_probability, double mac_delay, UnitDraw draw)
      : p_(success_probability), mac_(mac_delay), draw_(std::move(draw)) {}
  bool deliver(Step, DroneId, DroneId) override;
  std::uint64_t attempts() const { return attempts_; }
  std::uint64_t successes() const { return successes_; }

 private:
  double p_;
  double mac_;
  UnitDraw draw_;
  std::uint64_t attempts_ = 0;
  std::uint64_t successes_ = 0;
};

struct ConsensusConfig {
  int max_retries = 3;
  double inflation_factor = 10.0;  // claimed score multiplier of score-inflating providers
};

class ConsensusFailed : public Error {
 public:
  ConsensusFailed(const std::string& what, std::int64_t messages, int rounds, double elapsed)
      : Error(what), messages_(messages), rounds_(rounds), elapsed_(elapsed) {}
  std::int64_t messages() const { return messages_; }
  int rounds() const { return rounds_; }
  double elapsed() const { return elapsed_; }

 private:
  std::int64_t messages_;
  int rounds_;
  double elapsed_;
};

struct RoundResult {
  DroneId elected{};
  CodingScheme winning;
  int approvals = 0;
  int total = 0;
  std::int64_t messages_exchanged = 0;
  int retries = 0;
  std::vector<DroneId> ranking;  // accepted providers, best first
  double elapsed = 0.0;
};

std::vector<CodingScheme> propose_schemes(std::span<const ConsensusNode> nodes, const coding::CnTopology& topology,
                                          Rng& rng, const ConsensusConfig& cfg = {});

Verdict verify_scheme(const CodingScheme& scheme, const ConsensusNode& verifier, double provider_capability,
                      const coding::CnTopology& topology);

// views[holder][verifier][provider]
using ViewMatrix = std::vector<std::vector<std::vector<Verdict>>>;

struct Tally {
  std::int64_t messages = 0;
  int round = 0;
  std::vector<TraceRecord>* trace = nullptr;
};

// Proposal fan-out and verification; returns verdicts[verifier][provider].
std::vector<std::vector<Verdict>> distribute_and_verify(std::span<ConsensusNode> nodes,
                                                        std::span<const CodingScheme> schemes,
                                                        const coding::CnTopology& topology, MessageBus& bus, Tally& tally);

ViewMatrix exchange_views(std::span<ConsensusNode> nodes, const std::vector<std::vector<Verdict>>& verdicts,
                          MessageBus& bus, Tally& tally);

// Empty when the round yields no elected provider and must be retried.
std::optional<RoundResult> decide_and_broadcast(const ViewMatrix& views, std::span<ConsensusNode> nodes,
                                                std::span<const CodingScheme> schemes,
                                                const std::vector<std::vector<Verdict>>& verdicts,
                                                const coding::CnTopology& topology, MessageBus& bus, Tally& tally);

RoundResult run_consensus(std::span<ConsensusNode> nodes, const coding::CnTopology& topology, MessageBus& bus,
                          Rng& rng, const ConsensusConfig& cfg = {}, std::vector<TraceRecord>* trace = nullptr);

// Ground truth: best CR among nodes whose schemes are valid and honestly scored.
DroneId honest_argmax(std::span<const ConsensusNode> nodes);

void inject_internal_attack(std::span<ConsensusNode> nodes, std::span<const DroneId> malicious, Strategy strategy);

// Sequential baseline. A coordinator is drawn, the other k-1 nodes are verified one after another
// in random order, and the search stops at the best of them.
RoundResult run_poso_baseline(std::span<const ConsensusNode> nodes, Rng& rng);
RoundResult run_poso_sequence(std::span<const ConsensusNode> nodes, std::size_t coordinator,
                              std::span<const std::size_t> order);

}  // namespace escm::ponc
