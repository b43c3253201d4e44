#include "pibits/modmath.hpp"

#include <bit>
#include <string>

#include "pibits/detail/wide.hpp"
#include "pibits/errors.hpp"

namespace pibits::modmath {

using detail::u128;

std::uint64_t mod_pow(std::uint64_t base, std::uint64_t exponent, std::uint64_t modulus) {
  if (modulus == 0) throw ContractViolation("mod_pow: modulus is zero");
  if (modulus == 1) return 0;
  base %= modulus;
  if (exponent == 0) return 1;

  std::uint64_t result = 1;
  if (modulus <= 0xFFFFFFFFu) {
    for (int i = 63 - std::countl_zero(exponent); i >= 0; --i) {
      result = result * result % modulus;
      if ((exponent >> i) & 1U) result = result * base % modulus;
    }
  } else {
    for (int i = 63 - std::countl_zero(exponent); i >= 0; --i) {
      result = detail::mul_mod(result, result, modulus);
      if ((exponent >> i) & 1U) result = detail::mul_mod(result, base, modulus);
    }
  }
  return result;
}

MontgomeryContext::MontgomeryContext(std::uint64_t modulus) : modulus_(modulus) {
  if (modulus < 3 || (modulus & 1U) == 0) {
    throw ContractViolation("Montgomery modulus must be odd and >= 3, got " +
                            std::to_string(modulus));
  }
  // Newton iteration; each step doubles the number of correct low bits.
  std::uint64_t inv = modulus;  // correct to 3 bits for odd moduli
  for (int i = 0; i < 5; ++i) inv *= 2 - modulus * inv;
  neg_inverse_ = 0 - inv;
  r_mod_ = (0 - modulus) % modulus;
  r_squared_ = detail::mul_mod(r_mod_, r_mod_, modulus);
}

std::uint64_t MontgomeryContext::multiply(std::uint64_t a, std::uint64_t b) const {
  const u128 t = static_cast<u128>(a) * b;
  const std::uint64_t lo = static_cast<std::uint64_t>(t);
  const std::uint64_t m = lo * neg_inverse_;
  const u128 mm = static_cast<u128>(m) * modulus_;
  // lo + low(mm) is 0 mod 2^64; it carries exactly when lo != 0.
  const u128 u = (t >> 64) + (mm >> 64) + (lo != 0);
  return u >= modulus_ ? static_cast<std::uint64_t>(u - modulus_) : static_cast<std::uint64_t>(u);
}

std::uint64_t montgomery_pow(const MontgomeryContext& ctx, std::uint64_t exponent) {
  const std::uint64_t m = ctx.modulus_;
  if (exponent == 0) return 1;
  // 2 in Montgomery form, seeded from the leading exponent bit.
  std::uint64_t x = ctx.r_mod_ >= m - ctx.r_mod_ ? ctx.r_mod_ - (m - ctx.r_mod_) : ctx.r_mod_ * 2;
  for (int i = 62 - std::countl_zero(exponent); i >= 0; --i) {
    x = ctx.multiply(x, x);
    if ((exponent >> i) & 1U) x = x >= m - x ? x - (m - x) : x + x;
  }
  return ctx.from_montgomery(x);
}

std::uint64_t pow2_mod(std::uint64_t exponent, std::uint64_t modulus) {
  if (modulus >= 3 && (modulus & 1U)) {
    return montgomery_pow(MontgomeryContext(modulus), exponent);
  }
  return mod_pow(2, exponent, modulus);
}

}  // namespace pibits::modmath
