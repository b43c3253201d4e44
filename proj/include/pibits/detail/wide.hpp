#pragma once

#include <cstdint>

namespace pibits::detail {

using u128 = unsigned __int128;

inline std::uint64_t mul_hi(std::uint64_t a, std::uint64_t b) {
  return static_cast<std::uint64_t>((static_cast<u128>(a) * b) >> 64);
}

// (hi:lo) / d with hi < d, so the quotient fits one word.
inline std::uint64_t div_wide(std::uint64_t hi, std::uint64_t lo, std::uint64_t d,
                              std::uint64_t& rem) {
#if defined(__x86_64__)
  std::uint64_t q;
  std::uint64_t r;
  asm("divq %4" : "=a"(q), "=d"(r) : "a"(lo), "d"(hi), "rm"(d) : "cc");
  rem = r;
  return q;
#else
  const u128 n = (static_cast<u128>(hi) << 64) | lo;
  rem = static_cast<std::uint64_t>(n % d);
  return static_cast<std::uint64_t>(n / d);
#endif
}

// a * b mod m for a, b < m.
inline std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  const u128 t = static_cast<u128>(a) * b;
  std::uint64_t r;
  div_wide(static_cast<std::uint64_t>(t >> 64), static_cast<std::uint64_t>(t), m, r);
  return r;
}

}  // namespace pibits::detail
