#include "pibits/fixedpoint.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "pibits/detail/wide.hpp"
#include "pibits/errors.hpp"

namespace pibits::fixedpoint {

namespace {

void require_precision(unsigned precision_bits) {
  if (precision_bits == 0 || precision_bits % kWordBits != 0) {
    throw ContractViolation("precision must be a positive multiple of 64 bits, got " +
                            std::to_string(precision_bits));
  }
}

void require_same_precision(const FixedFraction& a, const FixedFraction& b) {
  if (a.precision_bits() != b.precision_bits()) {
    throw ContractViolation("precision mismatch: " + std::to_string(a.precision_bits()) +
                            " vs " + std::to_string(b.precision_bits()));
  }
}

constexpr char kLowerHex[] = "0123456789abcdef";
constexpr char kUpperHex[] = "0123456789ABCDEF";

}  // namespace

FixedFraction::FixedFraction(unsigned precision_bits) {
  require_precision(precision_bits);
  limbs_.assign(precision_bits / kWordBits, 0);
}

FixedFraction::FixedFraction(std::vector<Limb> limbs) : limbs_(std::move(limbs)) {
  if (limbs_.empty()) throw ContractViolation("a fraction needs at least one limb");
}

bool FixedFraction::is_zero() const {
  return std::all_of(limbs_.begin(), limbs_.end(), [](Limb w) { return w == 0; });
}

bool FixedFraction::bit(unsigned i) const {
  if (i == 0 || i > precision_bits()) {
    throw ContractViolation("bit index " + std::to_string(i) + " outside 1.." +
                            std::to_string(precision_bits()));
  }
  const unsigned k = i - 1;
  return (limbs_[k / kWordBits] >> (kWordBits - 1 - k % kWordBits)) & 1U;
}

std::string FixedFraction::to_record() const {
  std::string out = "p=" + std::to_string(precision_bits()) + ":";
  out.reserve(out.size() + limbs_.size() * 16);
  for (Limb w : limbs_) {
    for (int shift = 60; shift >= 0; shift -= 4) out.push_back(kLowerHex[(w >> shift) & 0xF]);
  }
  return out;
}

FixedFraction FixedFraction::from_record(std::string_view text) {
  auto bad = [&](const char* why) {
    return ContractViolation(std::string("malformed fraction record (") + why + "): " +
                             std::string(text.substr(0, 64)));
  };
  if (!text.starts_with("p=")) throw bad("missing p=");
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw bad("missing ':'");
  unsigned bits = 0;
  const auto digits = text.substr(2, colon - 2);
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), bits);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) throw bad("bad precision");
  require_precision(bits);
  const auto hex = text.substr(colon + 1);
  if (hex.size() != bits / 4) throw bad("hex length does not match precision");

  std::vector<Limb> limbs(bits / kWordBits, 0);
  for (std::size_t i = 0; i < hex.size(); ++i) {
    const char c = hex[i];
    Limb v;
    if (c >= '0' && c <= '9') v = static_cast<Limb>(c - '0');
    else if (c >= 'a' && c <= 'f') v = static_cast<Limb>(c - 'a' + 10);
    else throw bad("non-lowercase-hex digit");
    limbs[i / 16] = (limbs[i / 16] << 4) | v;
  }
  return FixedFraction(std::move(limbs));
}

double FixedFraction::to_double() const {
  double v = 0.0;
  double scale = 1.0;
  for (std::size_t i = 0; i < limbs_.size() && i < 2; ++i) {
    scale = std::ldexp(scale, -static_cast<int>(kWordBits));
    v += static_cast<double>(limbs_[i]) * scale;
  }
  return v;
}

namespace words {

void add(std::span<Limb> acc, std::span<const Limb> x) {
  unsigned char carry = 0;
  for (std::size_t i = acc.size(); i-- > 0;) {
    const Limb s = acc[i] + x[i];
    const unsigned char c1 = s < acc[i];
    acc[i] = s + carry;
    carry = c1 | (acc[i] < s);
  }
}

void sub(std::span<Limb> acc, std::span<const Limb> x) {
  unsigned char borrow = 0;
  for (std::size_t i = acc.size(); i-- > 0;) {
    const Limb d = acc[i] - x[i];
    const unsigned char b1 = acc[i] < x[i];
    acc[i] = d - borrow;
    borrow = b1 | (d < borrow);
  }
}

void div_scaled(std::span<Limb> out, std::uint64_t numerator, std::uint64_t modulus,
                unsigned shift_bits) {
  const std::size_t words = out.size();
  const unsigned quotient_bits = static_cast<unsigned>(words) * kWordBits - shift_bits;
  const unsigned full = quotient_bits / kWordBits;
  const unsigned partial = quotient_bits % kWordBits;

  // Dividend numerator * 2^quotient_bits as words [hi, lo, 0 x full].
  const Limb hi = partial == 0 ? 0 : numerator >> (kWordBits - partial);
  const Limb lo = numerator << partial;

  std::fill(out.begin(), out.end(), 0);
  // Quotient digit j of (full + 2) lands at out[words - (full + 2) + j]. The
  // leading digits past the precision are zero because the value is below 1.
  const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(words) - static_cast<std::ptrdiff_t>(full) - 2;
  auto put = [&](std::ptrdiff_t j, Limb q) {
    if (base + j >= 0) out[static_cast<std::size_t>(base + j)] = q;
  };

  Limb rem = hi % modulus;
  put(0, hi / modulus);
  put(1, detail::div_wide(rem, lo, modulus, rem));
  for (unsigned j = 0; j < full; ++j) put(2 + j, detail::div_wide(rem, 0, modulus, rem));

  // Round to nearest at the last bit, ties to even.
  const Limb rest = modulus - rem;
  const bool round_up = rem > rest || (rem == rest && (out[words - 1] & 1U));
  if (round_up) {
    for (std::size_t i = words; i-- > 0;) {
      if (++out[i] != 0) break;
    }
  }
}

}  // namespace words

FixedFraction add_mod1(const FixedFraction& a, const FixedFraction& b) {
  require_same_precision(a, b);
  std::vector<Limb> r(a.limbs().begin(), a.limbs().end());
  words::add(r, b.limbs());
  return FixedFraction(std::move(r));
}

FixedFraction sub_mod1(const FixedFraction& a, const FixedFraction& b) {
  require_same_precision(a, b);
  std::vector<Limb> r(a.limbs().begin(), a.limbs().end());
  words::sub(r, b.limbs());
  return FixedFraction(std::move(r));
}

FixedFraction div_scaled(std::uint64_t numerator, std::uint64_t modulus, unsigned shift_bits,
                         unsigned precision_bits) {
  require_precision(precision_bits);
  if (modulus == 0) throw ContractViolation("div_scaled: modulus is zero");
  if (shift_bits >= precision_bits) {
    throw ContractViolation("div_scaled: shift " + std::to_string(shift_bits) +
                            " not below precision " + std::to_string(precision_bits));
  }
  const bool below_one =
      shift_bits >= kWordBits ||
      static_cast<detail::u128>(numerator) < (static_cast<detail::u128>(modulus) << shift_bits);
  if (!below_one) {
    throw ContractViolation("div_scaled: quotient " + std::to_string(numerator) + "/(2^" +
                            std::to_string(shift_bits) + "*" + std::to_string(modulus) +
                            ") is not below 1");
  }
  std::vector<Limb> r(precision_bits / kWordBits);
  words::div_scaled(r, numerator, modulus, shift_bits);
  return FixedFraction(std::move(r));
}

std::string to_bits(const FixedFraction& f, unsigned count) {
  if (count > f.precision_bits()) {
    throw ContractViolation("requested " + std::to_string(count) + " bits of a " +
                            std::to_string(f.precision_bits()) + "-bit fraction");
  }
  std::string out;
  out.reserve(count);
  for (unsigned i = 1; i <= count; ++i) out.push_back(f.bit(i) ? '1' : '0');
  return out;
}

std::string to_hex(const FixedFraction& f, unsigned count) {
  const std::string bits = to_bits(f, count);
  std::string digits;
  digits.reserve((count + 3) / 4);
  for (std::size_t i = 0; i < bits.size(); i += 4) {
    unsigned v = 0;
    for (std::size_t j = i; j < i + 4; ++j) v = (v << 1) | (j < bits.size() && bits[j] == '1');
    digits.push_back(kUpperHex[v]);
  }
  return group_hex(digits);
}

std::string group_hex(std::string_view digits) {
  std::string out;
  out.reserve(digits.size() + digits.size() / 8);
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && i % 8 == 0) out.push_back(' ');
    out.push_back(digits[i]);
  }
  return out;
}

}  // namespace pibits::fixedpoint
