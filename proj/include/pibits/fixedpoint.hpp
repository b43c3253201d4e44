#pragma once

// Exact fixed-point fractions in [0, 1). Every BBP sum is accumulated here,
// modulo 1, so addition and subtraction never round. The only rounding step
// in the whole computation is div_scaled.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pibits::fixedpoint {

using Limb = std::uint64_t;
inline constexpr unsigned kWordBits = 64;

/// Rounds a bit count up to a whole number of words.
constexpr unsigned round_up_precision(unsigned bits) {
  return (bits + kWordBits - 1) / kWordBits * kWordBits;
}

/// A binary fraction 0.b1 b2 ... bp held in p / 64 words, most significant
/// word first. Immutable once built.
class FixedFraction {
 public:
  /// Zero at the given precision (a positive multiple of 64).
  explicit FixedFraction(unsigned precision_bits);
  /// Takes ownership of limbs, most significant first.
  explicit FixedFraction(std::vector<Limb> limbs);

  /// Parses the checkpoint form "p=<bits>:<lowercase hex of all limbs>".
  static FixedFraction from_record(std::string_view text);

  unsigned precision_bits() const { return static_cast<unsigned>(limbs_.size()) * kWordBits; }
  std::span<const Limb> limbs() const { return limbs_; }
  bool is_zero() const;

  /// Bit i after the radix point, 1-based (bit 1 has weight 1/2).
  bool bit(unsigned i) const;

  /// "p=<bits>:<hex>", fixed width, lowercase.
  std::string to_record() const;

  /// Nearest double; for diagnostics only.
  double to_double() const;

  friend bool operator==(const FixedFraction&, const FixedFraction&) = default;

 private:
  std::vector<Limb> limbs_;
};

/// (a + b) mod 1, exact. Throws ContractViolation on precision mismatch.
FixedFraction add_mod1(const FixedFraction& a, const FixedFraction& b);

/// (a - b) mod 1, exact.
FixedFraction sub_mod1(const FixedFraction& a, const FixedFraction& b);

/// numerator / (2^shift_bits * modulus) rounded to nearest (ties to even) at
/// bit precision_bits. The shift is applied first; the long division then
/// produces only the (p - shift) bits that can be nonzero.
///
/// Requires modulus >= 1, numerator / (2^shift * modulus) < 1 and
/// shift_bits < precision_bits.
FixedFraction div_scaled(std::uint64_t numerator, std::uint64_t modulus, unsigned shift_bits,
                         unsigned precision_bits);

/// Leading `count` bits as a '0'/'1' string.
std::string to_bits(const FixedFraction& f, unsigned count);

/// Leading `count` bits as uppercase hex, 8 digits per space-separated
/// block. A trailing partial nibble is padded with zero bits.
std::string to_hex(const FixedFraction& f, unsigned count);

/// Groups a run of hex digits into space-separated blocks of 8.
std::string group_hex(std::string_view digits);

// In-place word kernels shared with the summation loops. Spans are most
// significant word first and must have equal length.
namespace words {

void add(std::span<Limb> acc, std::span<const Limb> x);
void sub(std::span<Limb> acc, std::span<const Limb> x);

/// Writes div_scaled(numerator, modulus, shift) into out, where
/// out.size() * 64 is the precision. No allocation.
void div_scaled(std::span<Limb> out, std::uint64_t numerator, std::uint64_t modulus,
                unsigned shift_bits);

}  // namespace words

}  // namespace pibits::fixedpoint
