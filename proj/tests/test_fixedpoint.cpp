#include "pibits/fixedpoint.hpp"

#include <random>

#include "doctest.h"
#include "oracle.hpp"
#include "pibits/errors.hpp"

using namespace pibits;
using namespace pibits::fixedpoint;

namespace {

FixedFraction half(unsigned p) {
  std::vector<Limb> l(p / 64, 0);
  l[0] = Limb{1} << 63;
  return FixedFraction(std::move(l));
}

FixedFraction from_top(Limb top, unsigned p) {
  std::vector<Limb> l(p / 64, 0);
  l[0] = top;
  return FixedFraction(std::move(l));
}

FixedFraction random_fraction(std::mt19937_64& rng, unsigned p) {
  std::vector<Limb> l(p / 64);
  for (auto& w : l) w = rng();
  return FixedFraction(std::move(l));
}

std::string hex_limbs(const FixedFraction& f) { return f.to_record().substr(f.to_record().find(':') + 1); }

}  // namespace

TEST_CASE("add_mod1 wraps and discards the carry") {
  CHECK(add_mod1(half(128), half(128)).is_zero());
  const auto three_quarters = from_top(Limb{3} << 62, 128);
  CHECK(add_mod1(three_quarters, three_quarters) == half(128));

  std::mt19937_64 rng(1);
  const auto x = random_fraction(rng, 192);
  CHECK(add_mod1(x, FixedFraction(192)) == x);
}

TEST_CASE("sub_mod1 borrows through zero") {
  const auto quarter = from_top(Limb{1} << 62, 64);
  const auto three_quarters = from_top(Limb{3} << 62, 64);
  CHECK(sub_mod1(quarter, three_quarters) == half(64));

  std::mt19937_64 rng(2);
  const auto x = random_fraction(rng, 256);
  CHECK(sub_mod1(x, x).is_zero());

  std::vector<Limb> ulp(4, 0);
  ulp.back() = 1;
  const auto all_ones = sub_mod1(FixedFraction(256), FixedFraction(ulp));
  for (auto w : all_ones.limbs()) CHECK(w == ~Limb{0});
}

TEST_CASE("mismatched precision is a contract violation") {
  CHECK_THROWS_AS(add_mod1(FixedFraction(64), FixedFraction(128)), ContractViolation);
  CHECK_THROWS_AS(sub_mod1(FixedFraction(192), FixedFraction(128)), ContractViolation);
  CHECK_THROWS_AS(FixedFraction(100), ContractViolation);
}

TEST_CASE("addition is exact: (a + b) - b == a, and order does not matter") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    const unsigned p = 64 * (1 + static_cast<unsigned>(rng() % 6));
    const auto a = random_fraction(rng, p);
    const auto b = random_fraction(rng, p);
    const auto c = random_fraction(rng, p);
    REQUIRE(sub_mod1(add_mod1(a, b), b) == a);
    REQUIRE(add_mod1(a, b) == add_mod1(b, a));
    REQUIRE(add_mod1(add_mod1(a, b), c) == add_mod1(a, add_mod1(b, c)));
  }
}

TEST_CASE("div_scaled examples") {
  CHECK(div_scaled(1, 1, 1, 128) == half(128));
  // Frozen from schoolbook long division: 1/3 and 4/(4*9) at 64 bits.
  CHECK(hex_limbs(div_scaled(1, 3, 0, 64)) == "5555555555555555");
  CHECK(hex_limbs(div_scaled(4, 9, 2, 64)) == "1c71c71c71c71c72");
  CHECK(to_bits(div_scaled(1, 3, 0, 64), 64) == oracle::long_division_bits(1, 3, 64));
  CHECK(to_bits(div_scaled(1, 9, 0, 64), 64) == oracle::long_division_bits(1, 9, 64));
}

TEST_CASE("div_scaled rejects bad operands") {
  CHECK_THROWS_AS(div_scaled(1, 0, 0, 64), ContractViolation);
  CHECK_THROWS_AS(div_scaled(5, 5, 0, 64), ContractViolation);
  CHECK_THROWS_AS(div_scaled(9, 2, 2, 64), ContractViolation);
  CHECK_THROWS_AS(div_scaled(1, 3, 64, 64), ContractViolation);
  CHECK_NOTHROW(div_scaled(7, 2, 2, 64));
}

TEST_CASE("div_scaled is within half an ulp of the exact rational") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 10000; ++i) {
    const unsigned p = 64 * (1 + static_cast<unsigned>(rng() % 5));
    std::uint64_t modulus = rng() >> (rng() % 64);
    if (modulus == 0) modulus = 1;
    const std::uint64_t numerator = rng() % modulus;
    const unsigned shift = static_cast<unsigned>(rng() % p);
    const auto got = oracle::to_rational(div_scaled(numerator, modulus, shift, p));
    mpq_class exact(oracle::from_u64(numerator), oracle::from_u64(modulus) << shift);
    exact.canonicalize();
    mpq_class err = got - exact;
    if (err < 0) err = -err;
    REQUIRE(err <= oracle::pow2(-static_cast<long>(p) - 1));
  }
}

TEST_CASE("div_scaled with a shift matches the unshifted quotient shifted, to one ulp") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    const unsigned p = 128;
    const std::uint64_t modulus = (rng() >> 1) | 1;
    const std::uint64_t numerator = rng() % modulus;
    const unsigned shift = static_cast<unsigned>(rng() % 100);
    const auto shifted = oracle::to_rational(div_scaled(numerator, modulus, shift, p));
    const mpq_class unshifted = oracle::to_rational(div_scaled(numerator, modulus, 0, p)) *
                           oracle::pow2(-static_cast<long>(shift));
    mpq_class d = shifted - unshifted;
    if (d < 0) d = -d;
    REQUIRE(d <= oracle::pow2(-static_cast<long>(p)));
  }
}

TEST_CASE("ties round to even") {
  // k / (2^63 * 4) at 64 bits is k/2 ulp.
  CHECK(div_scaled(1, 4, 63, 64).limbs()[0] == 0);
  CHECK(div_scaled(3, 4, 63, 64).limbs()[0] == 2);
  CHECK(div_scaled(5, 4, 63, 64).limbs()[0] == 2);
  CHECK(div_scaled(7, 4, 63, 64).limbs()[0] == 4);
}

TEST_CASE("bit rendering") {
  CHECK(to_hex(half(64), 8) == "80");
  CHECK(to_hex(FixedFraction(64), 8) == "00");
  CHECK(to_hex(from_top(Limb{3} << 60, 64), 4) == "3");
  CHECK(to_bits(from_top(Limb{3} << 60, 64), 6) == "001100");
  CHECK(to_hex(from_top(0x243F6A8885A308D3ULL, 64), 64) == "243F6A88 85A308D3");
  CHECK(to_hex(from_top(0xF000000000000000ULL, 64), 3) == "E");
  CHECK_THROWS_AS(to_bits(half(64), 65), ContractViolation);
  CHECK(group_hex("0123456789") == "01234567 89");
}

TEST_CASE("record form round-trips bit for bit") {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto x = random_fraction(rng, 64 * (1 + static_cast<unsigned>(rng() % 8)));
    const auto rec = x.to_record();
    REQUIRE(FixedFraction::from_record(rec) == x);
  }
  CHECK(half(128).to_record() == "p=128:80000000000000000000000000000000");
  CHECK_THROWS_AS(FixedFraction::from_record("p=64:123"), ContractViolation);
  CHECK_THROWS_AS(FixedFraction::from_record("p=64:ABCDEF0123456789"), ContractViolation);
  CHECK_THROWS_AS(FixedFraction::from_record("q=64:0000000000000000"), ContractViolation);
}
