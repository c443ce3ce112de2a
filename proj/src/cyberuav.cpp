#include "escm/cyberuav.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <istream>
#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>
#include <ostream>
#include <stdexcept>

#include "escm/error.hpp"
#include "escm/random.hpp"

namespace escm::cyber {
namespace {

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint64_t uint(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v = (v << 8) | data_[pos_++];
    return v;
  }
  Bytes take(std::size_t n) {
    need(n);
    Bytes out(data_.begin() + static_cast<std::ptrdiff_t>(pos_), data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
  }
  Digest digest() {
    const Bytes b = take(32);
    Digest d{};
    std::copy(b.begin(), b.end(), d.begin());
    return d;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw std::invalid_argument("truncated record");
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

void append_transaction(Bytes& out, const CyberTransaction& tx) {
  const Bytes body = tx.signed_bytes();
  out.insert(out.end(), body.begin(), body.end());
  put_u16(out, static_cast<std::uint16_t>(tx.signature.size()));
  out.insert(out.end(), tx.signature.begin(), tx.signature.end());
}

CyberTransaction read_transaction(Reader& r) {
  CyberTransaction tx;
  tx.replica.value = static_cast<std::uint32_t>(r.uint(4));
  tx.sender.value = static_cast<std::uint32_t>(r.uint(4));
  tx.receiver.value = static_cast<std::uint32_t>(r.uint(4));
  tx.timestamp_us = static_cast<std::int64_t>(r.uint(8));
  tx.signature = r.take(static_cast<std::size_t>(r.uint(2)));
  return tx;
}

}  // namespace

Digest sha256(std::span<const std::uint8_t> data) {
  Digest d{};
  SHA256(data.data(), data.size(), d.data());
  return d;
}

std::string to_hex(std::span<const std::uint8_t> data) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xF]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw std::invalid_argument("hex string has odd length");
  auto nibble = [](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    throw std::invalid_argument("invalid hex digit");
  };
  Bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2)
    out.push_back(static_cast<std::uint8_t>((nibble(hex[i]) << 4) | nibble(hex[i + 1])));
  return out;
}

bool Signer::verify(std::span<const std::uint8_t> key, std::span<const std::uint8_t> message,
                    std::span<const std::uint8_t> signature) const {
  const Bytes expected = sign(key, message);
  return expected.size() == signature.size() && CRYPTO_memcmp(expected.data(), signature.data(), expected.size()) == 0;
}

Bytes KeyedHashSigner::sign(std::span<const std::uint8_t> key, std::span<const std::uint8_t> message) const {
  Bytes out(EVP_MAX_MD_SIZE);
  unsigned len = 0;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), message.data(), message.size(), out.data(), &len);
  out.resize(len);
  return out;
}

Address Registry::register_drone(DroneId drone) {
  const auto id = static_cast<std::uint32_t>(drone);
  if (const auto it = by_drone_.find(id); it != by_drone_.end()) return it->second;
  const Address a{static_cast<std::uint32_t>(by_address_.size() + 1)};
  by_drone_.emplace(id, a);
  by_address_.emplace(a.value, drone);
  return a;
}

std::optional<Address> Registry::address_of(DroneId drone) const {
  const auto it = by_drone_.find(static_cast<std::uint32_t>(drone));
  if (it == by_drone_.end()) return std::nullopt;
  return it->second;
}

DroneId Registry::resolve(Address address) const {
  const auto it = by_address_.find(address.value);
  if (it == by_address_.end()) throw AddressUnknown(fmt::format("address {} is not registered", address.value));
  return it->second;
}

Bytes Registry::identity_key(DroneId drone) const {
  Bytes key;
  put_u64(key, hash_keys(seed_, 0x6b6579, static_cast<std::uint64_t>(drone)));
  put_u64(key, hash_keys(seed_, 0x6b6579 + 1, static_cast<std::uint64_t>(drone)));
  return key;
}

Bytes identity_message(DroneId drone, Address address) {
  Bytes out;
  put_u32(out, static_cast<std::uint32_t>(drone));
  put_u32(out, address.value);
  return out;
}

bool verify_replica(const Replica& replica, const Registry& registry, const Signer& signer) {
  const auto addr = registry.address_of(replica.drone());
  if (!addr || *addr != replica.address()) return false;
  return signer.verify(registry.identity_key(replica.drone()), identity_message(replica.drone(), replica.address()),
                       replica.sig_id());
}

std::vector<EdgeServer> default_servers(const sim::Box& box, double radius) {
  std::vector<EdgeServer> out;
  const sim::Vec3 span = box.high - box.low;
  int id = 0;
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i)
      out.push_back({id++, box.low + sim::Vec3{(0.25 + 0.5 * i) * span.x, (0.25 + 0.5 * j) * span.y, 0.5 * span.z}, radius, {}});
  return out;
}

Replica map_to_cyberspace(const sim::DroneState& drone, std::span<EdgeServer> servers, Role role, Registry& registry,
                          const Signer& signer) {
  EdgeServer* host = nullptr;
  double best = 0.0;
  for (auto& s : servers) {
    const double d = sim::distance(s.position, drone.position);
    if (d > s.radius) continue;
    if (host == nullptr || d < best || (d == best && s.id < host->id)) {
      host = &s;
      best = d;
    }
  }
  if (host == nullptr) throw NoServerInRange(fmt::format("drone {} is outside every edge server's range", static_cast<std::uint32_t>(drone.id)));
  const Address address = registry.register_drone(drone.id);
  if (std::find(host->hosted.begin(), host->hosted.end(), address) == host->hosted.end()) host->hosted.push_back(address);
  Bytes sig = signer.sign(registry.identity_key(drone.id), identity_message(drone.id, address));
  return Replica(drone.id, address, std::move(sig), Attributes{drone.coding_capability, true, true}, role, host->id);
}

Bytes CyberTransaction::signed_bytes() const {
  Bytes out;
  put_u32(out, replica.value);
  put_u32(out, sender.value);
  put_u32(out, receiver.value);
  put_u64(out, static_cast<std::uint64_t>(timestamp_us));
  return out;
}

Bytes CyberTransaction::serialize() const {
  Bytes out;
  append_transaction(out, *this);
  return out;
}

std::int64_t TransactionClock::stamp(Address replica, double now_seconds) {
  std::int64_t t = std::llround(now_seconds * 1e6);
  const auto [it, fresh] = last_.try_emplace(replica.value, t);
  if (!fresh) it->second = t = std::max(t, it->second + 1);
  return t;
}

CyberTransaction build_transaction(const Replica& replica, Address sender, Address receiver, TransactionClock& clock,
                                   double now, const Registry& registry, const Signer& signer) {
  if (sender == receiver) throw std::invalid_argument("transaction sender and receiver must differ");
  registry.resolve(sender);
  registry.resolve(receiver);
  registry.resolve(replica.address());
  CyberTransaction tx{replica.address(), sender, receiver, clock.stamp(replica.address(), now), {}};
  tx.signature = signer.sign(registry.identity_key(replica.drone()), tx.signed_bytes());
  return tx;
}

bool verify_transaction(const CyberTransaction& tx, const Registry& registry, const Signer& signer) {
  if (!registry.contains(tx.replica) || !registry.contains(tx.sender) || !registry.contains(tx.receiver)) return false;
  if (tx.sender == tx.receiver) return false;
  return signer.verify(registry.identity_key(registry.resolve(tx.replica)), tx.signed_bytes(), tx.signature);
}

Bytes Block::serialize() const {
  Bytes out;
  put_u64(out, height);
  out.insert(out.end(), previous.begin(), previous.end());
  put_u32(out, static_cast<std::uint32_t>(transactions.size()));
  for (const auto& tx : transactions) append_transaction(out, tx);
  put_u32(out, static_cast<std::uint32_t>(elected));
  out.insert(out.end(), scheme_digest.begin(), scheme_digest.end());
  put_u64(out, static_cast<std::uint64_t>(timestamp_us));
  return out;
}

Digest Block::digest() const { return sha256(serialize()); }

Block Block::parse(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  Block b;
  b.height = r.uint(8);
  b.previous = r.digest();
  const auto count = r.uint(4);
  for (std::uint64_t i = 0; i < count; ++i) b.transactions.push_back(read_transaction(r));
  b.elected = static_cast<DroneId>(r.uint(4));
  b.scheme_digest = r.digest();
  b.timestamp_us = static_cast<std::int64_t>(r.uint(8));
  if (!r.done()) throw std::invalid_argument("trailing bytes after block");
  return b;
}

void Ledger::append(Block block) {
  if (block.height != next_height())
    throw ChainMismatch(fmt::format("expected height {}, got {}", next_height(), block.height));
  if (block.previous != head_) throw ChainMismatch(fmt::format("block {} does not extend the head", block.height));
  head_ = block.digest();
  blocks_.push_back(std::move(block));
}

Digest Ledger::head_digest() const { return head_; }

void Ledger::export_lines(std::ostream& out) const {
  for (const auto& b : blocks_) out << to_hex(b.serialize()) << '\n';
}

Ledger Ledger::import_lines(std::istream& in) {
  Ledger ledger;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ledger.append(Block::parse(from_hex(line)));
  }
  return ledger;
}

ForwardingPath update_physical(const ConsensusDecision& decision, std::span<const sim::DroneState> drones,
                               std::vector<std::optional<std::uint64_t>>& last_block, const NotificationModel& model) {
  auto alive = [&](DroneId id) { return index_of(id) < drones.size() && drones[index_of(id)].alive; };
  ForwardingPath path;
  path.notification_latency = model.via_twin ? model.ipc_latency : model.channel_latency;
  if (alive(decision.elected)) {
    path.relay = decision.elected;
  } else {
    path.lost = decision.elected;
    const auto it = std::find_if(decision.backups.begin(), decision.backups.end(), alive);
    if (it == decision.backups.end())
      throw ElectedDroneLost(fmt::format("relay {} left the network and no backup is alive",
                                         static_cast<std::uint32_t>(decision.elected)));
    path.relay = *it;
    path.fell_back = true;
  }
  if (last_block.size() < drones.size()) last_block.resize(drones.size());
  last_block[index_of(path.relay)] = decision.block_height;
  for (DroneId b : decision.backups)
    if (alive(b)) last_block[index_of(b)] = decision.block_height;
  return path;
}

}  // namespace escm::cyber
