#include "escm/cn_coding.hpp"

#include <algorithm>
#include <array>
#include <fmt/format.h>
#include <numeric>
#include <stdexcept>

namespace escm::coding {
namespace {

struct Tables {
  std::array<std::uint8_t, 512> exp{};
  std::array<int, 256> log{};

  Tables() {
    std::uint8_t x = 1;
    for (int i = 0; i < 255; ++i) {
      exp[static_cast<std::size_t>(i)] = x;
      log[x] = i;
      // Multiply by the generator 3 = x + 1.
      const std::uint8_t doubled = static_cast<std::uint8_t>((x << 1) ^ ((x & 0x80) ? 0x1B : 0x00));
      x = static_cast<std::uint8_t>(doubled ^ x);
    }
    for (std::size_t i = 255; i < exp.size(); ++i) exp[i] = exp[i - 255];
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

}  // namespace

Gf256 operator*(Gf256 a, Gf256 b) {
  if (a.is_zero() || b.is_zero()) return Gf256{};
  const auto& t = tables();
  return Gf256(t.exp[static_cast<std::size_t>(t.log[a.value()] + t.log[b.value()])]);
}

Gf256 Gf256::inverse() const {
  if (is_zero()) throw std::domain_error("zero has no inverse in GF(256)");
  const auto& t = tables();
  return Gf256(t.exp[static_cast<std::size_t>(255 - t.log[value_])]);
}

Gf256 operator/(Gf256 a, Gf256 b) { return a * b.inverse(); }

Gf256 Gf256::pow(unsigned e) const {
  if (e == 0) return Gf256(1);
  if (is_zero()) return Gf256{};
  const auto& t = tables();
  return Gf256(t.exp[(static_cast<std::size_t>(t.log[value_]) * e) % 255]);
}

Symbols CodingVector::components() const {
  Symbols out(length);
  Gf256 power(1);
  for (auto& c : out) {
    c = power;
    power *= generator;
  }
  return out;
}

Matrix vandermonde_matrix(std::span<const Gf256> generators) {
  const std::size_t k = generators.size();
  Matrix m(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    Gf256 power(1);
    for (std::size_t j = 0; j < k; ++j) {
      m.at(i, j) = power;
      power *= generators[i];
    }
  }
  return m;
}

Gf256 determinant(Matrix m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("determinant needs a square matrix");
  const std::size_t n = m.rows();
  Gf256 det(1);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    while (pivot < n && m.at(pivot, col).is_zero()) ++pivot;
    if (pivot == n) return Gf256{};
    // Row swaps flip the sign, which is the identity in characteristic 2.
    if (pivot != col)
      for (std::size_t c = 0; c < n; ++c) std::swap(m.at(pivot, c), m.at(col, c));
    const Gf256 p = m.at(col, col);
    det *= p;
    const Gf256 inv = p.inverse();
    for (std::size_t r = col + 1; r < n; ++r) {
      const Gf256 factor = m.at(r, col) * inv;
      if (factor.is_zero()) continue;
      for (std::size_t c = col; c < n; ++c) m.at(r, c) += factor * m.at(col, c);
    }
  }
  return det;
}

std::size_t rank(Matrix m) {
  std::size_t r = 0;
  for (std::size_t col = 0; col < m.cols() && r < m.rows(); ++col) {
    std::size_t pivot = r;
    while (pivot < m.rows() && m.at(pivot, col).is_zero()) ++pivot;
    if (pivot == m.rows()) continue;
    for (std::size_t c = 0; c < m.cols(); ++c) std::swap(m.at(pivot, c), m.at(r, c));
    const Gf256 inv = m.at(r, col).inverse();
    for (std::size_t i = r + 1; i < m.rows(); ++i) {
      const Gf256 factor = m.at(i, col) * inv;
      for (std::size_t c = col; c < m.cols(); ++c) m.at(i, c) += factor * m.at(r, c);
    }
    ++r;
  }
  return r;
}

Gf256 vandermonde_product(std::span<const Gf256> generators) {
  Gf256 p(1);
  for (std::size_t i = 0; i < generators.size(); ++i)
    for (std::size_t j = i + 1; j < generators.size(); ++j) p *= generators[i] - generators[j];
  return p;
}

namespace {

Matrix stack(std::span<const CodingVector> vectors) {
  const std::size_t k = vectors.empty() ? 0 : vectors.front().length;
  Matrix m(vectors.size(), k);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].length != k) throw std::invalid_argument("coding vectors differ in length");
    const Symbols row = vectors[i].components();
    for (std::size_t j = 0; j < k; ++j) m.at(i, j) = row[j];
  }
  return m;
}

}  // namespace

bool is_decodable(std::span<const CodingVector> vectors) {
  if (vectors.empty()) return false;
  const Matrix m = stack(vectors);
  if (m.rows() != m.cols()) return false;
  return !determinant(m).is_zero();
}

void CnTopology::validate() const {
  if (per_receiver == 0 || per_receiver > relays) throw std::invalid_argument("topology needs 1 <= k <= n");
  for (const auto& r : receivers) {
    if (r.size() != per_receiver) throw std::invalid_argument("every receiver must connect to exactly k relays");
    auto sorted = r;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::invalid_argument("receiver lists a relay twice");
    if (!sorted.empty() && sorted.back() >= relays) throw std::invalid_argument("receiver references an unknown relay");
  }
}

CnTopology CnTopology::combination(std::size_t n, std::size_t k) {
  CnTopology t{n, k, {}};
  if (k == 0 || k > n) throw std::invalid_argument("topology needs 1 <= k <= n");
  std::vector<std::size_t> pick(k);
  std::iota(pick.begin(), pick.end(), 0);
  for (;;) {
    t.receivers.push_back(pick);
    std::size_t i = k;
    while (i > 0 && pick[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
  return t;
}

CnTopology CnTopology::cyclic(std::size_t n, std::size_t k, std::size_t m) {
  CnTopology t{n, k, {}};
  if (k == 0 || k > n) throw std::invalid_argument("topology needs 1 <= k <= n");
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<std::size_t> relays;
    for (std::size_t i = 0; i < k; ++i) relays.push_back((j + i) % n);
    t.receivers.push_back(relays);
  }
  return t;
}

std::vector<CodingVector> assign_vectors(const CnTopology& topology, Rng* rng) {
  topology.validate();
  if (topology.relays > 255) throw std::invalid_argument("at most 255 relays have distinct nonzero generators");
  std::vector<std::uint8_t> pool(255);
  std::iota(pool.begin(), pool.end(), std::uint8_t{1});
  if (rng != nullptr) {
    for (std::size_t i = 0; i < topology.relays; ++i) std::swap(pool[i], pool[i + rng->index(pool.size() - i)]);
  }
  std::vector<CodingVector> out;
  out.reserve(topology.relays);
  for (std::size_t i = 0; i < topology.relays; ++i) out.push_back({Gf256(pool[i]), topology.per_receiver});
  return out;
}

bool receivers_decodable(const CnTopology& topology, std::span<const CodingVector> vectors) {
  for (const auto& r : topology.receivers) {
    std::vector<CodingVector> chosen;
    for (std::size_t relay : r) chosen.push_back(vectors[relay]);
    if (!is_decodable(chosen)) return false;
  }
  return true;
}

EncodedMessage encode(std::span<const Symbols> batch, const CodingVector& vector, std::size_t relay) {
  if (batch.size() != vector.length) throw std::invalid_argument("batch size differs from coding vector length");
  const std::size_t len = batch.empty() ? 0 : batch.front().size();
  for (const auto& m : batch)
    if (m.size() != len) throw std::invalid_argument("messages in a batch must have equal length");
  const Symbols coeff = vector.components();
  EncodedMessage out{Symbols(len), vector, relay};
  for (std::size_t j = 0; j < batch.size(); ++j) {
    if (coeff[j].is_zero()) continue;
    for (std::size_t s = 0; s < len; ++s) out.payload[s] += coeff[j] * batch[j][s];
  }
  return out;
}

std::vector<Symbols> decode(std::span<const EncodedMessage> encoded) {
  const std::size_t k = encoded.size();
  if (k == 0) throw std::invalid_argument("nothing to decode");
  const std::size_t len = encoded.front().payload.size();
  for (const auto& e : encoded) {
    if (e.vector.length != k) throw std::invalid_argument("coding vector length differs from the number of packets");
    if (e.payload.size() != len) throw std::invalid_argument("encoded payloads differ in length");
  }
  // Augmented system [V | payloads], reduced row by row so dependent rows are identified in order.
  Matrix a(k, k + len);
  for (std::size_t i = 0; i < k; ++i) {
    const Symbols row = encoded[i].vector.components();
    for (std::size_t j = 0; j < k; ++j) a.at(i, j) = row[j];
    for (std::size_t s = 0; s < len; ++s) a.at(i, k + s) = encoded[i].payload[s];
  }
  std::vector<std::size_t> pivot_col(k, k);
  std::vector<std::size_t> dependent;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t p = 0; p < i; ++p) {
      if (pivot_col[p] == k) continue;
      const Gf256 factor = a.at(i, pivot_col[p]);
      if (factor.is_zero()) continue;
      for (std::size_t c = 0; c < k + len; ++c) a.at(i, c) += factor * a.at(p, c);
    }
    std::size_t col = 0;
    while (col < k && a.at(i, col).is_zero()) ++col;
    if (col == k) {
      dependent.push_back(i);
      continue;
    }
    const Gf256 inv = a.at(i, col).inverse();
    for (std::size_t c = 0; c < k + len; ++c) a.at(i, c) *= inv;
    pivot_col[i] = col;
    for (std::size_t p = 0; p < i; ++p) {
      const Gf256 factor = a.at(p, col);
      if (factor.is_zero()) continue;
      for (std::size_t c = 0; c < k + len; ++c) a.at(p, c) += factor * a.at(i, c);
    }
  }
  if (!dependent.empty()) {
    std::string list;
    for (std::size_t d : dependent) list += (list.empty() ? "" : ",") + std::to_string(d);
    throw NotDecodable(fmt::format("coding vectors are linearly dependent (rows {})", list), dependent);
  }
  std::vector<Symbols> out(k, Symbols(len));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t s = 0; s < len; ++s) out[pivot_col[i]][s] = a.at(i, k + s);
  return out;
}

Symbols to_symbols(std::span<const std::uint8_t> bytes) {
  Symbols out;
  out.reserve(bytes.size());
  for (auto b : bytes) out.emplace_back(b);
  return out;
}

std::vector<std::uint8_t> to_bytes(std::span<const Gf256> symbols) {
  std::vector<std::uint8_t> out;
  out.reserve(symbols.size());
  for (auto s : symbols) out.push_back(s.value());
  return out;
}

std::vector<std::uint8_t> BatchHeader::serialize() const {
  if (generators.size() > 255) throw std::invalid_argument("batch size does not fit one byte");
  std::vector<std::uint8_t> out;
  out.push_back(static_cast<std::uint8_t>(generators.size()));
  for (auto g : generators) out.push_back(g.value());
  out.push_back(static_cast<std::uint8_t>(payload_length >> 8));
  out.push_back(static_cast<std::uint8_t>(payload_length & 0xFF));
  return out;
}

BatchHeader BatchHeader::parse(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw std::invalid_argument("empty batch header");
  const std::size_t k = bytes[0];
  if (bytes.size() != k + 3) throw std::invalid_argument("batch header length does not match its k field");
  BatchHeader h;
  for (std::size_t i = 0; i < k; ++i) h.generators.emplace_back(bytes[1 + i]);
  h.payload_length = static_cast<std::uint16_t>((bytes[1 + k] << 8) | bytes[2 + k]);
  return h;
}

}  // namespace escm::coding
