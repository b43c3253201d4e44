#include "pibits/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "pibits/errors.hpp"

namespace pibits::verify {

ErrorModel ErrorModel::make(std::uint64_t term_count, unsigned precision_bits) {
  if (term_count == 0) throw ContractViolation("error model needs at least one term");
  return {term_count, precision_bits};
}

double ErrorModel::ulp_half() const { return std::ldexp(1.0, -static_cast<int>(precision_bits) - 1); }

double ErrorModel::variance() const {
  const double eps = ulp_half();
  return static_cast<double>(term_count) * eps * eps / 3.0;
}

double ErrorModel::sigma() const { return ulp_half() * std::sqrt(static_cast<double>(term_count) / 3.0); }

std::uint64_t term_count(const series::Formula& formula, std::uint64_t n, unsigned p) {
  std::uint64_t total = 0;
  for (const auto& s : formula.series) total += series::tail_cutoff(s, n, p);
  return total;
}

double confidence(const ErrorModel& model, int bound_exponent) {
  if (model.term_count == 0) throw ContractViolation("error model needs at least one term");
  // Work in units of eps so huge p does not underflow.
  const double bound = std::ldexp(1.0, static_cast<int>(model.precision_bits) + 1 - bound_exponent);
  const double sigma = std::sqrt(static_cast<double>(model.term_count) / 3.0);
  return std::erf(bound / (sigma * std::sqrt(2.0)));
}

int natural_bound(const ErrorModel& model) {
  const double log2_sigma =
      0.5 * std::log2(static_cast<double>(model.term_count) / 3.0) - static_cast<double>(model.precision_bits) - 1;
  return static_cast<int>(std::floor(-log2_sigma));
}

MonteCarloSummary monte_carlo_error(const ErrorModel& model, std::uint64_t trials, std::uint64_t seed,
                                    int bound_exponent) {
  if (model.term_count == 0 || model.term_count > 10'000'000) {
    throw ContractViolation("simulated term count must be in [1, 10^7]");
  }
  if (trials == 0) throw ContractViolation("need at least one trial");
  std::mt19937_64 rng(seed);
  // Everything in units of eps: each rounding is uniform in [-1, 1).
  const double bound = std::ldexp(1.0, static_cast<int>(model.precision_bits) + 1 - bound_exponent);
  std::uint64_t inside = 0;
  double mean = 0, m2 = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    double e = 0;
    for (std::uint64_t k = 0; k < model.term_count; ++k) {
      e += std::ldexp(static_cast<double>(rng() >> 11), -52) - 1.0;
    }
    if (std::fabs(e) < bound) ++inside;
    const double delta = e - mean;
    mean += delta / static_cast<double>(t + 1);
    m2 += delta * (e - mean);
  }
  const double eps = model.ulp_half();
  MonteCarloSummary s;
  s.trials = trials;
  s.bound_exponent = bound_exponent;
  s.within_bound = static_cast<double>(inside) / static_cast<double>(trials);
  s.mean = mean * eps;
  s.variance = trials > 1 ? m2 / static_cast<double>(trials - 1) * eps * eps : 0.0;
  return s;
}

bool bit_at(const series::ExtractionResult& r, std::uint64_t pos) {
  if (pos < r.start_position || pos - r.start_position >= r.reported_bits) {
    throw ContractViolation("position " + std::to_string(pos) + " outside result range");
  }
  return r.fraction.bit(static_cast<unsigned>(pos - r.start_position + 1));
}

namespace {

std::string bits_to_hex(const std::string& bits) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  std::string hex;
  for (std::size_t i = 0; i < bits.size(); i += 4) {
    unsigned nibble = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      nibble = nibble << 1 | (i + j < bits.size() && bits[i + j] == '1' ? 1U : 0U);
    }
    hex.push_back(kDigits[nibble]);
  }
  return fixedpoint::group_hex(hex);
}

}  // namespace

OverlapReport overlap_check(const series::ExtractionResult& a, const series::ExtractionResult& b) {
  if (a.reported_bits == 0 || b.reported_bits == 0) throw ContractViolation("empty result in overlap check");
  const std::uint64_t a_end = a.start_position + a.reported_bits - 1;
  const std::uint64_t b_end = b.start_position + b.reported_bits - 1;
  const std::uint64_t lo = std::max(a.start_position, b.start_position);
  const std::uint64_t hi = std::min(a_end, b_end);
  if (lo > hi) {
    throw ContractViolation("runs cover disjoint positions [" + std::to_string(a.start_position) + ", " +
                            std::to_string(a_end) + "] and [" + std::to_string(b.start_position) + ", " +
                            std::to_string(b_end) + "]");
  }
  OverlapReport r;
  r.run_a = a;
  r.run_b = b;
  r.overlap_begin = lo;
  r.overlap_end = hi;
  std::string agreed;
  for (std::uint64_t pos = lo; pos <= hi; ++pos) {
    const bool x = bit_at(a, pos);
    if (x != bit_at(b, pos)) {
      r.first_disagreement = pos;
      break;
    }
    agreed.push_back(x ? '1' : '0');
  }
  r.verified_bits = agreed.size();
  r.verified_hex = bits_to_hex(agreed);
  return r;
}

std::string with_thousands(std::uint64_t value) {
  std::string digits = std::to_string(value);
  for (auto i = static_cast<std::ptrdiff_t>(digits.size()) - 3; i > 0; i -= 3) digits.insert(i, ",");
  return digits;
}

std::string render(const OverlapReport& r) {
  std::ostringstream out;
  const auto range = [](const series::ExtractionResult& x) {
    return with_thousands(x.start_position) + " .. " + with_thousands(x.start_position + x.reported_bits - 1);
  };
  out << "run A          " << range(r.run_a) << "\n"
      << "run B          " << range(r.run_b) << "\n"
      << "overlap        " << with_thousands(r.overlap_begin) << " .. " << with_thousands(r.overlap_end) << " ("
      << r.overlap_bits() << " bits)\n"
      << "verified bits  " << r.verified_bits << " from position " << with_thousands(r.overlap_begin) << "\n"
      << "verified hex   " << r.verified_hex << "\n";
  if (r.first_disagreement) {
    out << "DISAGREEMENT   at position " << with_thousands(*r.first_disagreement) << "\n";
  } else {
    out << "disagreements  none\n";
  }
  return out.str();
}

}  // namespace pibits::verify
