#include "pibits/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <vector>

namespace pibits::kernels {

using fixedpoint::Limb;

series::FixedFraction sum_series_range_omp(const series::SeriesSpec& spec, std::uint64_t n,
                                           series::KRange range, unsigned p, unsigned threads) {
  const std::size_t words = p / fixedpoint::kWordBits;
  const auto len = range.size();
  const auto parts = static_cast<std::uint64_t>(std::max(1U, threads));
  std::vector<Limb> partials(parts * words, 0);

#pragma omp parallel for num_threads(static_cast<int>(parts)) schedule(static, 1)
  for (std::int64_t t = 0; t < static_cast<std::int64_t>(parts); ++t) {
    const auto ut = static_cast<std::uint64_t>(t);
    const std::uint64_t lo = range.begin + len / parts * ut + std::min(ut, len % parts);
    const std::uint64_t hi = lo + len / parts + (ut < len % parts ? 1 : 0);
    std::span<Limb> acc(partials.data() + ut * words, words);
    std::vector<Limb> term(words);
    for (std::uint64_t k = lo; k < hi; ++k) {
      series::term_into(term, spec, n, k);
      if (spec.alternating && (k & 1U)) {
        fixedpoint::words::sub(acc, term);
      } else {
        fixedpoint::words::add(acc, term);
      }
    }
  }

  std::vector<Limb> total(words, 0);
  for (std::uint64_t t = 0; t < parts; ++t) {
    fixedpoint::words::add(total, std::span<const Limb>(partials.data() + t * words, words));
  }
  return series::FixedFraction(std::move(total));
}

}  // namespace pibits::kernels
