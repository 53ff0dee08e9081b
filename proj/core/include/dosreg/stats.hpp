#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dosreg/common.hpp"

namespace dosreg {

/// Monte Carlo mean with its standard error. `std_error` is the error of the
/// complex mean, sqrt(se_re^2 + se_im^2); the component errors are kept for
/// comparisons that involve only the real or imaginary part.
struct Estimate {
  cplx mean{0.0, 0.0};
  double std_error = 0.0;
  double std_error_re = 0.0;
  double std_error_im = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;

  double real() const noexcept { return mean.real(); }
  double imag() const noexcept { return mean.imag(); }
};

/// Pairwise (cascade) summation; the result depends only on the order of the
/// input, never on how it was produced.
double pairwise_sum(std::span<const double> values);
cplx pairwise_sum(std::span<const cplx> values);

/// Sample mean and standard error of i.i.d. draws, reduced in index order.
Estimate summarize(std::span<const cplx> values, std::uint64_t seed);
Estimate summarize(std::span<const double> values, std::uint64_t seed);

/// Combined standard error of the difference of two estimates, treated as
/// independent (conservative when they are positively correlated).
double combined_error(const Estimate& a, const Estimate& b);

}  // namespace dosreg
