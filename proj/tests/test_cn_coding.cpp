#include <doctest.h>

#include <algorithm>
#include <set>

#include "escm/cn_coding.hpp"

using namespace escm;
using namespace escm::coding;

namespace {

// Carry-less multiply with explicit reduction, independent of the log tables.
Gf256 slow_mul(Gf256 a, Gf256 b) {
  unsigned x = a.value();
  unsigned y = b.value();
  unsigned acc = 0;
  while (y != 0) {
    if (y & 1u) acc ^= x;
    x <<= 1;
    if (x & 0x100u) x ^= 0x11Bu;
    y >>= 1;
  }
  return Gf256(static_cast<std::uint8_t>(acc));
}

Gf256 cofactor_det(const Matrix& m) {
  const std::size_t n = m.rows();
  if (n == 1) return m.at(0, 0);
  Gf256 det;
  for (std::size_t c = 0; c < n; ++c) {
    Matrix minor(n - 1, n - 1);
    for (std::size_t r = 1; r < n; ++r) {
      std::size_t cc = 0;
      for (std::size_t k = 0; k < n; ++k)
        if (k != c) minor.at(r - 1, cc++) = m.at(r, k);
    }
    det += m.at(0, c) * cofactor_det(minor);
  }
  return det;
}

std::vector<Symbols> random_batch(std::size_t k, std::size_t len, Rng& rng) {
  std::vector<Symbols> batch(k, Symbols(len));
  for (auto& m : batch)
    for (auto& s : m) s = Gf256(static_cast<std::uint8_t>(rng.bits()));
  return batch;
}

std::vector<Gf256> distinct_generators(std::size_t k, Rng& rng) {
  std::vector<std::uint8_t> pool(256);
  for (std::size_t i = 0; i < 256; ++i) pool[i] = static_cast<std::uint8_t>(i);
  for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.index(256 - i)]);
  std::vector<Gf256> g;
  for (std::size_t i = 0; i < k; ++i) g.emplace_back(pool[i]);
  return g;
}

}  // namespace

TEST_CASE("field axioms") {
  for (unsigned a = 0; a < 256; ++a) {
    const Gf256 x(static_cast<std::uint8_t>(a));
    CHECK(x + Gf256{} == x);
    CHECK(x + x == Gf256{});
    CHECK(x * Gf256(1) == x);
    for (unsigned b = 0; b < 256; ++b) {
      const Gf256 y(static_cast<std::uint8_t>(b));
      REQUIRE(x + y == y + x);
      REQUIRE(x * y == slow_mul(x, y));
      for (unsigned c = 0; c < 256; c += 17) {
        const Gf256 z(static_cast<std::uint8_t>(c));
        REQUIRE((x + y) + z == x + (y + z));
      }
    }
    if (a != 0) CHECK(x * x.inverse() == Gf256(1));
  }
  CHECK_THROWS(Gf256{}.inverse());
  Rng rng(1);
  for (int i = 0; i < 10'000; ++i) {
    const Gf256 a(static_cast<std::uint8_t>(rng.bits()));
    const Gf256 b(static_cast<std::uint8_t>(rng.bits()));
    const Gf256 c(static_cast<std::uint8_t>(rng.bits()));
    REQUIRE((a * b) * c == a * (b * c));
    REQUIRE(a * b == b * a);
    REQUIRE(a * (b + c) == a * b + a * c);
    if (!b.is_zero()) REQUIRE((a / b) * b == a);
  }
  CHECK(Gf256(2).pow(8) == Gf256(0x1B));
  CHECK(Gf256(0).pow(0) == Gf256(1));
}

TEST_CASE("coding vector components") {
  const CodingVector v{Gf256(3), 4};
  const Symbols c = v.components();
  CHECK(c[0] == Gf256(1));
  for (std::size_t j = 0; j < 4; ++j) CHECK(c[j] == Gf256(3).pow(static_cast<unsigned>(j)));
}

TEST_CASE("vandermonde layout") {
  const std::vector<Gf256> one{Gf256(5)};
  CHECK(vandermonde_matrix(one).at(0, 0) == Gf256(1));
  const std::vector<Gf256> two{Gf256(7), Gf256(9)};
  const Matrix m = vandermonde_matrix(two);
  CHECK(m.at(0, 0) == Gf256(1));
  CHECK(m.at(0, 1) == Gf256(7));
  CHECK(m.at(1, 0) == Gf256(1));
  CHECK(m.at(1, 1) == Gf256(9));
  CHECK(determinant(m) == Gf256(9) - Gf256(7));
  const std::vector<Gf256> three{Gf256(1), Gf256(2), Gf256(3)};
  const Gf256 expected = (Gf256(2) - Gf256(1)) * (Gf256(3) - Gf256(2)) * (Gf256(3) - Gf256(1));
  CHECK(determinant(vandermonde_matrix(three)) == expected);
  CHECK(cofactor_det(vandermonde_matrix(three)) == expected);
}

TEST_CASE("determinant agrees with cofactor expansion and the product formula") {
  Rng rng(2);
  for (std::size_t k = 1; k <= 6; ++k) {
    for (int t = 0; t < 200; ++t) {
      std::vector<Gf256> g;
      for (std::size_t i = 0; i < k; ++i) g.emplace_back(static_cast<std::uint8_t>(rng.index(8)));
      const Matrix v = vandermonde_matrix(g);
      REQUIRE(determinant(v) == vandermonde_product(g));
      REQUIRE(determinant(v) == cofactor_det(v));
      Matrix r(k, k);
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) r.at(i, j) = Gf256(static_cast<std::uint8_t>(rng.bits()));
      REQUIRE(determinant(r) == cofactor_det(r));
      REQUIRE((rank(r) == k) == !determinant(r).is_zero());
    }
  }
}

TEST_CASE("distinct generators are always decodable") {
  Rng rng(3);
  for (std::size_t k = 2; k <= 8; ++k) {
    for (int t = 0; t < 1000; ++t) {
      const auto g = distinct_generators(k, rng);
      REQUIRE_FALSE(determinant(vandermonde_matrix(g)).is_zero());
    }
  }
}

TEST_CASE("is_decodable iff generators are distinct, and is permutation invariant") {
  Rng rng(4);
  for (int t = 0; t < 10'000; ++t) {
    const std::size_t k = 2 + rng.index(7);
    std::vector<CodingVector> v;
    std::set<std::uint8_t> seen;
    bool distinct = true;
    for (std::size_t i = 0; i < k; ++i) {
      const auto a = static_cast<std::uint8_t>(rng.index(12));
      distinct = distinct && seen.insert(a).second;
      v.push_back({Gf256(a), k});
    }
    const bool dec = is_decodable(v);
    REQUIRE(dec == distinct);
    Matrix m(k, k);
    for (std::size_t i = 0; i < k; ++i) {
      const Symbols row = v[i].components();
      for (std::size_t j = 0; j < k; ++j) m.at(i, j) = row[j];
    }
    REQUIRE(dec == (rank(m) == k));
    std::reverse(v.begin(), v.end());
    REQUIRE(is_decodable(v) == dec);
  }
}

TEST_CASE("encode edge cases") {
  Rng rng(5);
  const auto batch = random_batch(1, 16, rng);
  CHECK(encode(batch, {Gf256(77), 1}).payload == batch[0]);
  const std::vector<Symbols> zeros(3, Symbols(16));
  CHECK(encode(zeros, {Gf256(9), 3}).payload == Symbols(16));
  CHECK_THROWS_AS(encode(zeros, {Gf256(9), 2}), std::invalid_argument);
  std::vector<Symbols> ragged{Symbols(4), Symbols(5)};
  CHECK_THROWS_AS(encode(ragged, {Gf256(9), 2}), std::invalid_argument);
}

TEST_CASE("decode inverts encode for every batch size") {
  Rng rng(6);
  for (std::size_t k = 2; k <= 8; ++k) {
    for (int t = 0; t < 1000; ++t) {
      const auto batch = random_batch(k, 16, rng);
      const auto g = distinct_generators(k, rng);
      std::vector<EncodedMessage> enc;
      for (std::size_t i = 0; i < k; ++i) enc.push_back(encode(batch, {g[i], k}, i));
      std::reverse(enc.begin(), enc.end());
      REQUIRE(decode(enc) == batch);
    }
  }
}

TEST_CASE("decode reports dependent vectors") {
  Rng rng(7);
  const auto batch = random_batch(3, 16, rng);
  std::vector<EncodedMessage> enc{encode(batch, {Gf256(4), 3}), encode(batch, {Gf256(8), 3}),
                                  encode(batch, {Gf256(4), 3})};
  try {
    decode(enc);
    FAIL("expected NotDecodable");
  } catch (const NotDecodable& e) {
    CHECK(e.dependent() == std::vector<std::size_t>{2});
  }
  const auto pair = random_batch(2, 16, rng);
  std::vector<EncodedMessage> same{encode(pair, {Gf256(30), 2}), encode(pair, {Gf256(30), 2})};
  CHECK_THROWS_AS(decode(same), NotDecodable);
}

TEST_CASE("vector assignment") {
  const auto single = CnTopology::combination(5, 5);
  CHECK(single.receiver_count() == 1);
  const auto v = assign_vectors(single);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i].generator == Gf256(static_cast<std::uint8_t>(i + 1)));
  CHECK(receivers_decodable(single, v));

  const auto c43 = CnTopology::combination(4, 3);
  CHECK(c43.receiver_count() == 4);
  CHECK(receivers_decodable(c43, assign_vectors(c43)));

  Rng rng(8);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.index(20);
    const std::size_t k = 1 + rng.index(n);
    const auto topo = CnTopology::cyclic(n, k, 1 + rng.index(10));
    const auto vec = assign_vectors(topo, &rng);
    std::set<std::uint8_t> gens;
    for (const auto& x : vec) {
      REQUIRE_FALSE(x.generator.is_zero());
      gens.insert(x.generator.value());
    }
    REQUIRE(gens.size() == n);
    REQUIRE(receivers_decodable(topo, vec));
  }
  CnTopology big{256, 2, {}};
  CHECK_THROWS_AS(assign_vectors(big), std::invalid_argument);
  CHECK_THROWS_AS(CnTopology::combination(3, 4), std::invalid_argument);
}

TEST_CASE("batch header wire format") {
  BatchHeader h{{Gf256(1), Gf256(2), Gf256(250)}, 0x0110};
  const auto bytes = h.serialize();
  CHECK(bytes == std::vector<std::uint8_t>{3, 1, 2, 250, 0x01, 0x10});
  CHECK(BatchHeader::parse(bytes) == h);
  CHECK_THROWS_AS(BatchHeader::parse(std::vector<std::uint8_t>{3, 1, 2}), std::invalid_argument);
  const std::vector<std::uint8_t> raw{1, 2, 3};
  CHECK(to_bytes(to_symbols(raw)) == raw);
}
