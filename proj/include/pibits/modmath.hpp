#pragma once

// Powers of two modulo word-sized odd moduli: the inner loop of every head
// term of a BBP-type sum.

#include <cstdint>

namespace pibits::modmath {

/// base^exponent mod modulus by left-to-right binary exponentiation.
/// Throws ContractViolation when modulus is 0.
std::uint64_t mod_pow(std::uint64_t base, std::uint64_t exponent, std::uint64_t modulus);

/// Precomputed constants for Montgomery reduction with R = 2^64.
class MontgomeryContext {
 public:
  /// modulus must be odd and at least 3.
  explicit MontgomeryContext(std::uint64_t modulus);

  std::uint64_t modulus() const { return modulus_; }
  /// R^2 mod modulus.
  std::uint64_t r_squared() const { return r_squared_; }
  /// -modulus^-1 mod 2^64.
  std::uint64_t neg_inverse() const { return neg_inverse_; }

  /// a * b * R^-1 mod modulus for a, b < modulus.
  std::uint64_t multiply(std::uint64_t a, std::uint64_t b) const;
  std::uint64_t to_montgomery(std::uint64_t a) const { return multiply(a % modulus_, r_squared_); }
  std::uint64_t from_montgomery(std::uint64_t a) const { return multiply(a, 1); }

 private:
  std::uint64_t modulus_;
  std::uint64_t r_mod_;  // R mod modulus, i.e. 1 in Montgomery form
  std::uint64_t r_squared_;
  std::uint64_t neg_inverse_;

  friend std::uint64_t montgomery_pow(const MontgomeryContext& ctx, std::uint64_t exponent);
};

/// 2^exponent mod ctx.modulus(), kept in Montgomery form until the end.
std::uint64_t montgomery_pow(const MontgomeryContext& ctx, std::uint64_t exponent);

/// 2^exponent mod modulus. Odd moduli >= 3 go through Montgomery, which
/// beats a hardware divide per step even for tiny moduli; 1 and even moduli
/// use mod_pow. modulus >= 1.
std::uint64_t pow2_mod(std::uint64_t exponent, std::uint64_t modulus);

}  // namespace pibits::modmath
