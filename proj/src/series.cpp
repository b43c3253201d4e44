#include "pibits/series.hpp"

#include <string>

#include "pibits/detail/wide.hpp"
#include "pibits/errors.hpp"
#include "pibits/modmath.hpp"

namespace pibits::series {

using detail::u128;
using fixedpoint::Limb;

const Formula& bbp16() {
  // <2^n pi> = <<sum 2^(n+2-4k)/(8k+1)> - <sum 2^(n-1-4k)/(2k+1)>
  //            - <sum 2^(n-4k)/(8k+5)> - <sum 2^(n-1-4k)/(4k+3)>>
  static const Formula f{"bbp16",
                         {
                             {+1, false, +2, 4, 8, 1},
                             {-1, false, -1, 4, 2, 1},
                             {-1, false, 0, 4, 8, 5},
                             {-1, false, -1, 4, 4, 3},
                         }};
  return f;
}

const Formula& bellard() {
  static const Formula f{"bellard",
                         {
                             {+1, true, +2, 10, 10, 1},
                             {-1, true, 0, 10, 10, 3},
                             {-1, true, -4, 10, 10, 5},
                             {-1, true, -4, 10, 10, 7},
                             {+1, true, -6, 10, 10, 9},
                             {-1, true, -1, 10, 4, 1},
                             {-1, true, -6, 10, 4, 3},
                         }};
  return f;
}

const Formula& formula_by_name(std::string_view name) {
  if (name == "bbp16") return bbp16();
  if (name == "bellard") return bellard();
  throw ContractViolation("unknown formula '" + std::string(name) + "' (expected bbp16 or bellard)");
}

__int128 term_exponent(const SeriesSpec& spec, std::uint64_t n, std::uint64_t k) {
  return static_cast<__int128>(n) + spec.exp_offset -
         static_cast<__int128>(spec.exp_stride) * static_cast<__int128>(k);
}

std::uint64_t head_count(const SeriesSpec& spec, std::uint64_t n) {
  const __int128 top = static_cast<__int128>(n) + spec.exp_offset;
  if (top < 0) return 0;
  return static_cast<std::uint64_t>(top / spec.exp_stride) + 1;
}

FixedFraction head_term(const SeriesSpec& spec, std::uint64_t n, std::uint64_t k, unsigned p) {
  const __int128 e = term_exponent(spec, n, k);
  if (e < 0) {
    throw ContractViolation("head_term: negative exponent at k=" + std::to_string(k) +
                            "; this is a tail term");
  }
  const std::uint64_t m = spec.modulus(k);
  return fixedpoint::div_scaled(modmath::pow2_mod(static_cast<std::uint64_t>(e), m), m, 0, p);
}

namespace {

// 1 / (2^b M) once b reaches the precision: at most one ulp survives rounding.
void tiny_tail_into(std::span<Limb> out, unsigned b, std::uint64_t m) {
  std::fill(out.begin(), out.end(), 0);
  if (b == out.size() * fixedpoint::kWordBits && m == 1) out.back() = 1;
}

}  // namespace

FixedFraction tail_term(const SeriesSpec& spec, std::uint64_t n, std::uint64_t k, unsigned p) {
  const __int128 e = term_exponent(spec, n, k);
  if (e >= 0) {
    throw ContractViolation("tail_term: non-negative exponent at k=" + std::to_string(k) +
                            "; this is a head term");
  }
  const __int128 b = -e;
  const std::uint64_t m = spec.modulus(k);
  if (b >= p) {
    std::vector<Limb> limbs(FixedFraction(p).limbs().size());
    tiny_tail_into(limbs, static_cast<unsigned>(b > p ? p + 1 : p), m);
    return FixedFraction(std::move(limbs));
  }
  return fixedpoint::div_scaled(1, m, static_cast<unsigned>(b), p);
}

std::uint64_t tail_cutoff(const SeriesSpec& spec, std::uint64_t n, unsigned p) {
  for (std::uint64_t k = head_count(spec, n);; ++k) {
    const __int128 b = -term_exponent(spec, n, k);
    if (b >= static_cast<__int128>(p) + 1) return k;
    const auto need = static_cast<unsigned>(static_cast<__int128>(p) + 1 - b);
    const u128 m = static_cast<u128>(spec.mod_stride) * k + spec.mod_offset;
    if (need < 128 && m >= (static_cast<u128>(1) << need)) return k;
  }
}

void term_into(std::span<Limb> out, const SeriesSpec& spec, std::uint64_t n, std::uint64_t k) {
  const __int128 e = term_exponent(spec, n, k);
  const std::uint64_t m = spec.modulus(k);
  if (e >= 0) {
    fixedpoint::words::div_scaled(out, modmath::pow2_mod(static_cast<std::uint64_t>(e), m), m, 0);
    return;
  }
  const __int128 b = -e;
  const auto p = out.size() * fixedpoint::kWordBits;
  if (b >= static_cast<__int128>(p)) {
    tiny_tail_into(out, static_cast<unsigned>(b > static_cast<__int128>(p) ? p + 1 : p), m);
    return;
  }
  fixedpoint::words::div_scaled(out, 1, m, static_cast<unsigned>(b));
}

FixedFraction sum_series_range(const SeriesSpec& spec, std::uint64_t n, KRange range, unsigned p) {
  std::vector<Limb> acc(FixedFraction(p).limbs().size(), 0);
  std::vector<Limb> term(acc.size());
  for (std::uint64_t k = range.begin; k < range.end; ++k) {
    term_into(term, spec, n, k);
    if (spec.alternating && (k & 1U)) {
      fixedpoint::words::sub(acc, term);
    } else {
      fixedpoint::words::add(acc, term);
    }
  }
  return FixedFraction(std::move(acc));
}

void validate(const ExtractionRequest& r) {
  if (r.start_position == 0) throw ContractViolation("start position is 1-based; got 0");
  if (r.precision_bits < fixedpoint::kWordBits || r.precision_bits % fixedpoint::kWordBits != 0) {
    throw ContractViolation("precision must be a multiple of 64 bits and at least 64, got " +
                            std::to_string(r.precision_bits));
  }
  if (r.guard_bits >= r.precision_bits) {
    throw ContractViolation("guard bits (" + std::to_string(r.guard_bits) +
                            ") must be below the precision (" + std::to_string(r.precision_bits) + ")");
  }
  if (r.formula.series.empty()) throw ContractViolation("formula has no series");
  for (const auto& s : r.formula.series) {
    if (s.exp_stride == 0 || s.mod_stride == 0 || s.mod_offset == 0 || (s.mod_offset & 1U) == 0) {
      throw ContractViolation("malformed series in formula " + r.formula.name);
    }
    // The largest modulus sits just below the cutoff.
    const u128 last_k = r.n() / s.exp_stride + (r.precision_bits + 130) / s.exp_stride + 2;
    if (static_cast<u128>(s.mod_stride) * last_k + s.mod_offset >= (static_cast<u128>(1) << 64)) {
      throw ContractViolation("position " + std::to_string(r.start_position) +
                              " needs moduli beyond 64 bits");
    }
  }
}

ExtractionResult make_result(const ExtractionRequest& request, FixedFraction fraction) {
  ExtractionResult result;
  result.start_position = request.start_position;
  result.reported_bits = request.reported_bits();
  result.hex = fixedpoint::to_hex(fraction, result.reported_bits);
  result.fraction = std::move(fraction);
  return result;
}

ExtractionResult extract(const ExtractionRequest& request) {
  validate(request);
  const std::uint64_t n = request.n();
  const unsigned p = request.precision_bits;
  FixedFraction total(p);
  for (const auto& spec : request.formula.series) {
    const auto sum = sum_series_range(spec, n, {0, tail_cutoff(spec, n, p)}, p);
    total = spec.sign > 0 ? fixedpoint::add_mod1(total, sum) : fixedpoint::sub_mod1(total, sum);
  }
  return make_result(request, std::move(total));
}

}  // namespace pibits::series
