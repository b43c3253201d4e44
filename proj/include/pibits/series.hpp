#pragma once

// BBP-type formulas as data, and the head/tail term evaluation that turns
// them into <2^n * pi> at a fixed precision.
//
// One sub-series contributes <sum_k (+-1)^k 2^(n + x - d*k) / (y*k + z)>.
// Terms with a non-negative power of two (head terms) are computed as
// (2^e mod M) / M; terms with a negative power (tail terms) as 1 / (2^b M),
// and the tail stops once a term drops below half an ulp.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pibits/fixedpoint.hpp"

namespace pibits::series {

using fixedpoint::FixedFraction;

struct SeriesSpec {
  int sign = 1;             // fixed leading sign, +1 or -1
  bool alternating = false; // terms carry (-1)^k
  std::int64_t exp_offset = 0;   // x
  std::uint64_t exp_stride = 4;  // d
  std::uint64_t mod_stride = 8;  // y
  std::uint64_t mod_offset = 1;  // z

  std::uint64_t modulus(std::uint64_t k) const { return mod_stride * k + mod_offset; }
};

struct Formula {
  std::string name;
  std::vector<SeriesSpec> series;
};

/// pi = sum 16^-k (4/(8k+1) - 2/(8k+4) - 1/(8k+5) - 1/(8k+6)).
const Formula& bbp16();
/// Bellard's alternating base-2^10 formula, with the 2^-6 folded into the offsets.
const Formula& bellard();
/// "bbp16" or "bellard"; throws ContractViolation otherwise.
const Formula& formula_by_name(std::string_view name);

/// Half-open range of term indices.
struct KRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;

  std::uint64_t size() const { return end > begin ? end - begin : 0; }
  bool empty() const { return end <= begin; }
  friend bool operator==(const KRange&, const KRange&) = default;
};

struct ExtractionRequest {
  std::uint64_t start_position = 1;  // 1-based, counted after the radix point
  unsigned precision_bits = 320;
  unsigned guard_bits = 64;
  Formula formula = bellard();

  /// n such that the first bit of <2^n pi> is bit start_position of pi.
  std::uint64_t n() const { return start_position - 1; }
  unsigned reported_bits() const { return precision_bits - guard_bits; }
};

struct ExtractionResult {
  FixedFraction fraction{fixedpoint::kWordBits};
  std::uint64_t start_position = 1;
  unsigned reported_bits = 0;
  std::string hex;
};

/// Throws ContractViolation unless s >= 1, p is a word multiple >= 64,
/// guard < p, and every modulus the request touches fits in 64 bits.
void validate(const ExtractionRequest& request);

/// Exponent n + x - d*k of term k.
__int128 term_exponent(const SeriesSpec& spec, std::uint64_t n, std::uint64_t k);

/// Number of head terms: k with n + x - d*k >= 0.
std::uint64_t head_count(const SeriesSpec& spec, std::uint64_t n);

/// (2^e mod M) / M with e = n + x - d*k >= 0; sign and alternation not applied.
FixedFraction head_term(const SeriesSpec& spec, std::uint64_t n, std::uint64_t k, unsigned p);

/// 1 / (2^b M) with b = d*k - n - x > 0.
FixedFraction tail_term(const SeriesSpec& spec, std::uint64_t n, std::uint64_t k, unsigned p);

/// Smallest k with 2^(d*k - n - x) * (y*k + z) >= 2^(p+1), i.e. the first
/// tail term at or below half an ulp. Terms [0, cutoff) are evaluated.
std::uint64_t tail_cutoff(const SeriesSpec& spec, std::uint64_t n, unsigned p);

/// Writes term k (head or tail, unsigned) into out; out.size() * 64 is p.
void term_into(std::span<fixedpoint::Limb> out, const SeriesSpec& spec, std::uint64_t n,
               std::uint64_t k);

/// Serial reference: sum over k in range of (+-1)^k * term_k, mod 1. The
/// series' leading sign is not applied.
FixedFraction sum_series_range(const SeriesSpec& spec, std::uint64_t n, KRange range, unsigned p);

/// Single-process extraction: signed mod-1 sum of every sub-series.
ExtractionResult extract(const ExtractionRequest& request);

/// Packs a finished fraction into a result (hex of the reported bits).
ExtractionResult make_result(const ExtractionRequest& request, FixedFraction fraction);

}  // namespace pibits::series
