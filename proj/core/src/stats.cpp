#include "dosreg/stats.hpp"

#include <cmath>

namespace dosreg {
namespace {

template <class T>
T pairwise(std::span<const T> v) {
  constexpr std::size_t kLeaf = 16;
  if (v.size() <= kLeaf) {
    T s{};
    for (const T& x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise(v.first(half)) + pairwise(v.subspan(half));
}

}  // namespace

double pairwise_sum(std::span<const double> values) { return pairwise(values); }
cplx pairwise_sum(std::span<const cplx> values) { return pairwise(values); }

Estimate summarize(std::span<const cplx> values, std::uint64_t seed) {
  Estimate est;
  est.n_samples = values.size();
  est.seed = seed;
  if (values.empty()) return est;
  const double n = static_cast<double>(values.size());
  est.mean = pairwise_sum(values) / n;
  if (values.size() < 2) return est;
  std::vector<double> dre(values.size());
  std::vector<double> dim(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const cplx d = values[i] - est.mean;
    dre[i] = d.real() * d.real();
    dim[i] = d.imag() * d.imag();
  }
  const double var_re = pairwise_sum(std::span<const double>(dre)) / (n - 1.0);
  const double var_im = pairwise_sum(std::span<const double>(dim)) / (n - 1.0);
  est.std_error_re = std::sqrt(var_re / n);
  est.std_error_im = std::sqrt(var_im / n);
  est.std_error = std::sqrt((var_re + var_im) / n);
  return est;
}

Estimate summarize(std::span<const double> values, std::uint64_t seed) {
  std::vector<cplx> c(values.begin(), values.end());
  return summarize(std::span<const cplx>(c), seed);
}

double combined_error(const Estimate& a, const Estimate& b) {
  return std::hypot(a.std_error, b.std_error);
}

}  // namespace dosreg
