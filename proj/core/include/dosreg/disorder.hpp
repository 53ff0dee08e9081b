#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "dosreg/common.hpp"
#include "dosreg/rng.hpp"

namespace dosreg {

/// One draw from the tilted law |rho^(j)| / ||rho^(j)||_1. The product
/// sign * weight turns an expectation under the tilted law into integration
/// against rho^(j).
struct TiltedDraw {
  double value = 0.0;
  double sign = 1.0;
  double weight = 1.0;
};

/// Symmetric polynomial bump rho(x) = c_p x^p (1-x)^p on (0, 1), zero
/// outside, with c_p = 1 / B(p+1, p+1).
///
/// rho is C^{p-1} on the real line, rho^(p-1) is Lipschitz (Hoelder exponent
/// 1), and rho^(p) jumps at 0 and 1. Derivatives are evaluated from the
/// Leibniz expansion of x^p (1-x)^p, which stays accurate near both ends of
/// the support.
class SingleSiteDensity {
 public:
  explicit SingleSiteDensity(int order);

  /// Density with guaranteed continuity order m, i.e. p = m + 1.
  static SingleSiteDensity with_smoothness(int m);

  int order() const noexcept { return p_; }
  int smoothness() const noexcept { return p_ - 1; }
  double hoelder_exponent() const noexcept { return 1.0; }
  double normalization() const noexcept { return c_; }

  /// rho^(j)(x); 0 outside [0, 1]. Rejects j > p.
  double eval(int j, double x) const;
  double operator()(double x) const { return eval(0, x); }

  /// ||rho^(j)||_1, from the roots of rho^(j) and exact integration of
  /// rho^(j-1) between them. Rejects j > p.
  double l1_norm(int j) const;
  /// sup |rho^(j)| over (0, 1). Rejects j > p.
  double sup_norm(int j) const;
  /// D = max over j <= m of ||rho^(j)||_inf.
  double sup_constant() const;
  /// Real roots of rho^(j) strictly inside (0, 1), ascending.
  const std::vector<double>& interior_roots(int j) const;

  /// rho'(x) / rho(x) and rho''(x) / rho(x) for x in (0, 1).
  double score(double x) const;
  double score_curvature(double x) const;

  /// Cumulative distribution function.
  double cdf(double x) const;

  /// Rejection sampling from the uniform envelope sup rho; the loop is capped
  /// at 10^6 proposals (NumericalError beyond).
  double sample(Rng& rng) const;
  /// Rejection sampling from |rho^(j)| / ||rho^(j)||_1, 1 <= j <= m.
  TiltedDraw sample_tilted(int j, Rng& rng) const;

  static constexpr std::size_t kRejectionCap = 1'000'000;

 private:
  void check_order(int j) const;

  int p_;
  double c_;
  std::vector<std::vector<double>> roots_;  // per order 0..p+1
  std::vector<double> l1_;                  // per order 0..p
  std::vector<double> sup_;                 // per order 0..p
};

/// Per-site single-site densities; identical by default.
class DisorderField {
 public:
  explicit DisorderField(SingleSiteDensity density) : densities_{std::move(density)} {}
  explicit DisorderField(std::vector<SingleSiteDensity> per_site);

  const SingleSiteDensity& at(std::size_t site) const {
    return densities_.size() == 1 ? densities_.front() : densities_.at(site);
  }
  bool uniform() const noexcept { return densities_.size() == 1; }
  /// Smallest continuity order m over the sites in the field.
  int smoothness() const;
  /// Smallest polynomial order p over the sites.
  int min_order() const;
  /// Number of explicitly configured sites (0 when uniform).
  std::size_t explicit_sites() const noexcept { return uniform() ? 0 : densities_.size(); }

  /// Draws omega_0..omega_{n_sites-1} in site order from one stream, so the
  /// draw for a volume is a prefix of the draw for any larger volume.
  void draw(Rng& rng, std::span<double> omega) const;

 private:
  std::vector<SingleSiteDensity> densities_;
};

/// CSV table x, rho, rho', ..., rho^(max_order) on n_points uniform points
/// of [0, 1].
void write_derivative_table(std::ostream& out, const SingleSiteDensity& density,
                            int max_order, std::size_t n_points);

}  // namespace dosreg
