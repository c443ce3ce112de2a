#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "escm/sim_core.hpp"

namespace escm::cyber {

using Bytes = std::vector<std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> data);
std::string to_hex(std::span<const std::uint8_t> data);
Bytes from_hex(std::string_view hex);

class Signer {
 public:
  virtual ~Signer() = default;
  virtual Bytes sign(std::span<const std::uint8_t> key, std::span<const std::uint8_t> message) const = 0;
  virtual bool verify(std::span<const std::uint8_t> key, std::span<const std::uint8_t> message,
                      std::span<const std::uint8_t> signature) const;
};

// HMAC-SHA256 stand-in for a real signature scheme.
class KeyedHashSigner final : public Signer {
 public:
  Bytes sign(std::span<const std::uint8_t> key, std::span<const std::uint8_t> message) const override;
};

enum class Role : std::uint8_t { Sender, Receiver, CandidateRelay };

struct Address {
  std::uint32_t value = 0;
  friend auto operator<=>(Address, Address) = default;
};

struct Attributes {
  double coding_capability = 0.0;  // kbps
  bool can_relay = true;
  bool can_encode = true;
};

// Identity keys and the drone <-> address bijection.
class Registry {
 public:
  explicit Registry(std::uint64_t seed = 0) : seed_(seed) {}

  Address register_drone(DroneId drone);
  std::optional<Address> address_of(DroneId drone) const;
  DroneId resolve(Address address) const;
  bool contains(Address address) const { return by_address_.count(address.value) != 0; }
  Bytes identity_key(DroneId drone) const;
  std::size_t size() const { return by_address_.size(); }

 private:
  std::uint64_t seed_;
  std::map<std::uint32_t, DroneId> by_address_;
  std::map<std::uint32_t, Address> by_drone_;
};

class Replica {
 public:
  Replica(DroneId drone, Address address, Bytes sig_id, Attributes atr, Role role, int server)
      : drone_(drone), address_(address), sig_id_(std::move(sig_id)), atr_(atr), role_(role), server_(server) {}

  DroneId drone() const { return drone_; }
  Address address() const { return address_; }
  const Bytes& sig_id() const { return sig_id_; }
  const Attributes& attributes() const { return atr_; }
  Role role() const { return role_; }
  int server() const { return server_; }

 private:
  DroneId drone_;
  Address address_;
  Bytes sig_id_;
  Attributes atr_;
  Role role_;
  int server_;
};

Bytes identity_message(DroneId drone, Address address);
bool verify_replica(const Replica& replica, const Registry& registry, const Signer& signer);

struct EdgeServer {
  int id = 0;
  sim::Vec3 position;
  double radius = 650.0;
  std::vector<Address> hosted;
};

// Four servers on a 2x2 grid at mid-height.
std::vector<EdgeServer> default_servers(const sim::Box& box, double radius);

Replica map_to_cyberspace(const sim::DroneState& drone, std::span<EdgeServer> servers, Role role, Registry& registry,
                          const Signer& signer);

struct CyberTransaction {
  Address replica;
  Address sender;
  Address receiver;
  std::int64_t timestamp_us = 0;
  Bytes signature;

  Bytes signed_bytes() const;
  Bytes serialize() const;
};

// Strictly increasing microsecond timestamps per replica.
class TransactionClock {
 public:
  std::int64_t stamp(Address replica, double now_seconds);

 private:
  std::map<std::uint32_t, std::int64_t> last_;
};

CyberTransaction build_transaction(const Replica& replica, Address sender, Address receiver, TransactionClock& clock,
                                   double now, const Registry& registry, const Signer& signer);
bool verify_transaction(const CyberTransaction& tx, const Registry& registry, const Signer& signer);

struct Block {
  std::uint64_t height = 0;
  Digest previous{};
  std::vector<CyberTransaction> transactions;
  DroneId elected{};
  Digest scheme_digest{};
  std::int64_t timestamp_us = 0;

  Bytes serialize() const;
  Digest digest() const;
  static Block parse(std::span<const std::uint8_t> bytes);
};

class Ledger {
 public:
  void append(Block block);
  Digest head_digest() const;
  std::uint64_t next_height() const { return blocks_.size(); }
  const std::vector<Block>& blocks() const { return blocks_; }
  bool empty() const { return blocks_.empty(); }

  // One block per line, canonical serialization in lowercase hex.
  void export_lines(std::ostream& out) const;
  static Ledger import_lines(std::istream& in);

 private:
  std::vector<Block> blocks_;
  Digest head_{};
};

struct ConsensusDecision {
  DroneId elected{};
  std::vector<DroneId> backups;  // next-ranked candidates in order
  Digest scheme_digest{};
  std::uint64_t block_height = 0;
};

struct NotificationModel {
  bool via_twin = true;
  double ipc_latency = 0.001;     // s, replica to replica on the edge
  double channel_latency = 0.005;  // s, one radio hop
};

struct ForwardingPath {
  DroneId relay{};
  bool fell_back = false;
  std::optional<DroneId> lost;
  double notification_latency = 0.0;
};

// Installs the elected relay, or the first live backup, and records the block height on the
// participating drones. Throws ElectedDroneLost when no candidate is alive.
ForwardingPath update_physical(const ConsensusDecision& decision, std::span<const sim::DroneState> drones,
                               std::vector<std::optional<std::uint64_t>>& last_block, const NotificationModel& model);

}  // namespace escm::cyber
