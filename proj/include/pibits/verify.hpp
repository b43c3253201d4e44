#pragma once

// Result validation: two extractions at offset start positions are trusted
// only where they overlap and agree. Plus a probabilistic model of the
// accumulated rounding error: m roundings, each uniform in [-eps, eps] with
// eps = 2^-(p+1), summed and approximated by N(0, m eps^2 / 3).

#include <cstdint>
#include <optional>
#include <string>

#include "pibits/series.hpp"

namespace pibits::verify {

struct ErrorModel {
  std::uint64_t term_count = 1;
  unsigned precision_bits = 0;

  /// Throws ContractViolation when m == 0.
  static ErrorModel make(std::uint64_t term_count, unsigned precision_bits);

  double ulp_half() const;  // 2^-(p+1)
  double variance() const;  // m eps^2 / 3
  double sigma() const;
};

/// Terms evaluated across every series, head plus tail; one rounding each.
std::uint64_t term_count(const series::Formula& formula, std::uint64_t n, unsigned p);

/// P(|E| < 2^-b) under the normal approximation.
double confidence(const ErrorModel& model, int bound_exponent);

/// Largest b with 2^-b >= sigma, the natural centre of a confidence table.
int natural_bound(const ErrorModel& model);

struct MonteCarloSummary {
  std::uint64_t trials = 0;
  int bound_exponent = 0;
  double within_bound = 0;  // empirical P(|E| < 2^-b)
  double mean = 0;
  double variance = 0;
};

/// Sums m independent uniform roundings per trial. Single-threaded and fully
/// determined by the seed. Requires 1 <= m <= 10^7.
MonteCarloSummary monte_carlo_error(const ErrorModel& model, std::uint64_t trials, std::uint64_t seed,
                                    int bound_exponent);

struct OverlapReport {
  series::ExtractionResult run_a;
  series::ExtractionResult run_b;
  std::uint64_t overlap_begin = 0;  // absolute positions, inclusive
  std::uint64_t overlap_end = 0;
  std::uint64_t verified_bits = 0;  // agreeing prefix of the overlap
  std::string verified_hex;
  std::optional<std::uint64_t> first_disagreement;

  std::uint64_t overlap_bits() const { return overlap_end - overlap_begin + 1; }
  bool agrees() const { return !first_disagreement; }
};

/// Aligns both runs on absolute bit positions and compares the shared range.
/// Throws ContractViolation when the reported ranges are disjoint.
OverlapReport overlap_check(const series::ExtractionResult& a, const series::ExtractionResult& b);

/// Bit at absolute position `pos` of a result; pos must be in its range.
bool bit_at(const series::ExtractionResult& r, std::uint64_t pos);

/// "1,000,001".
std::string with_thousands(std::uint64_t value);

/// Multi-line human-readable summary of an overlap check.
std::string render(const OverlapReport& report);

}  // namespace pibits::verify
