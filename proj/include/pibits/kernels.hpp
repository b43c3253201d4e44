#pragma once

// OpenMP summation kernel. series::sum_series_range is the serial reference
// it is tested and benchmarked against; both produce identical limbs because
// mod-1 fixed-point addition is exact and associative.

#include <cstdint>

#include "pibits/series.hpp"

namespace pibits::kernels {

/// Splits range into `threads` near-equal contiguous parts, sums each on its
/// own OpenMP thread, then combines the partial sums.
series::FixedFraction sum_series_range_omp(const series::SeriesSpec& spec, std::uint64_t n,
                                           series::KRange range, unsigned p, unsigned threads);

}  // namespace pibits::kernels
