#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "escm/error.hpp"
#include "escm/random.hpp"

namespace escm::coding {

// GF(2^8) with reduction polynomial x^8 + x^4 + x^3 + x + 1.
class Gf256 {
 public:
  constexpr Gf256() = default;
  constexpr explicit Gf256(std::uint8_t v) : value_(v) {}

  constexpr std::uint8_t value() const { return value_; }
  bool is_zero() const { return value_ == 0; }

  Gf256 inverse() const;
  Gf256 pow(unsigned e) const;

  friend Gf256 operator+(Gf256 a, Gf256 b) { return Gf256(static_cast<std::uint8_t>(a.value_ ^ b.value_)); }
  friend Gf256 operator-(Gf256 a, Gf256 b) { return a + b; }
  friend Gf256 operator*(Gf256 a, Gf256 b);
  friend Gf256 operator/(Gf256 a, Gf256 b);
  Gf256& operator+=(Gf256 b) { return *this = *this + b; }
  Gf256& operator*=(Gf256 b) { return *this = *this * b; }
  friend bool operator==(Gf256, Gf256) = default;
  friend auto operator<=>(Gf256, Gf256) = default;

 private:
  std::uint8_t value_ = 0;
};

using Symbols = std::vector<Gf256>;

class NotDecodable : public Error {
 public:
  NotDecodable(const std::string& what, std::vector<std::size_t> dependent)
      : Error(what), dependent_(std::move(dependent)) {}
  // Positions of vectors that reduce to zero against the vectors before them.
  const std::vector<std::size_t>& dependent() const { return dependent_; }

 private:
  std::vector<std::size_t> dependent_;
};

class Matrix {
 public:
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  Gf256& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Gf256 at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<Gf256> data_;
};

struct CodingVector {
  Gf256 generator;
  std::size_t length = 1;

  // (1, a, a^2, ..., a^(k-1))
  Symbols components() const;
  friend bool operator==(const CodingVector&, const CodingVector&) = default;
};

Matrix vandermonde_matrix(std::span<const Gf256> generators);
Gf256 determinant(Matrix m);
std::size_t rank(Matrix m);
// Product over i < j of (a_i - a_j).
Gf256 vandermonde_product(std::span<const Gf256> generators);
bool is_decodable(std::span<const CodingVector> vectors);

struct CnTopology {
  std::size_t relays = 0;        // n
  std::size_t per_receiver = 0;  // k
  std::vector<std::vector<std::size_t>> receivers;  // relay indices per receiver

  std::size_t receiver_count() const { return receivers.size(); }
  void validate() const;

  // Every k-subset of the n relays is a receiver (the full C(n, k) network).
  static CnTopology combination(std::size_t n, std::size_t k);
  // m receivers, receiver j connected to relays j, j+1, ..., j+k-1 mod n.
  static CnTopology cyclic(std::size_t n, std::size_t k, std::size_t m);
};

// Relay index -> vector. Generators 1, 2, 3, ... unless a draw source is given.
std::vector<CodingVector> assign_vectors(const CnTopology& topology, Rng* rng = nullptr);
bool receivers_decodable(const CnTopology& topology, std::span<const CodingVector> vectors);

struct EncodedMessage {
  Symbols payload;
  CodingVector vector;
  std::size_t relay = 0;
};

EncodedMessage encode(std::span<const Symbols> batch, const CodingVector& vector, std::size_t relay = 0);
std::vector<Symbols> decode(std::span<const EncodedMessage> encoded);

Symbols to_symbols(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> to_bytes(std::span<const Gf256> symbols);

struct BatchHeader {
  std::vector<Gf256> generators;
  std::uint16_t payload_length = 0;

  std::vector<std::uint8_t> serialize() const;
  static BatchHeader parse(std::span<const std::uint8_t> bytes);
  friend bool operator==(const BatchHeader&, const BatchHeader&) = default;
};

}  // namespace escm::coding
