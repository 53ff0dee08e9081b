#include "dosreg/disorder.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <iomanip>
#include <iostream>
#include <limits>
#include <ostream>

#include <boost/math/special_functions/beta.hpp>

#include "dosreg/quadrature.hpp"

namespace dosreg {
namespace {

// p! / (p - k)!, zero for k > p.
double falling(int p, int k) {
  if (k > p) return 0.0;
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= static_cast<double>(p - i);
  return r;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

// d^j/dx^j [x^p (1 - x)^p] by the Leibniz rule.
double bump_derivative(int p, int j, double x) {
  double total = 0.0;
  const double y = 1.0 - x;
  for (int i = 0; i <= j; ++i) {
    const int k = j - i;
    if (i > p || k > p) continue;
    const double left = falling(p, i) * std::pow(x, p - i);
    const double right = falling(p, k) * std::pow(y, p - k) * ((k % 2 == 0) ? 1.0 : -1.0);
    total += binomial(j, i) * left * right;
  }
  return total;
}

std::vector<double> find_interior_roots(const std::function<double(double)>& f) {
  constexpr int kCells = 4096;
  std::vector<double> roots;
  double a = 0.0;
  double fa = f(std::ldexp(1.0, -40));
  for (int c = 1; c <= kCells; ++c) {
    const double b = c == kCells ? 1.0 - std::ldexp(1.0, -40) : static_cast<double>(c) / kCells;
    const double fb = f(b);
    if (fb == 0.0 && c < kCells) {
      roots.push_back(b);
      a = b;
      fa = fb;
      continue;
    }
    if (fa != 0.0 && (fa < 0.0) != (fb < 0.0)) {
      double lo = a;
      double hi = b;
      double flo = fa;
      for (int it = 0; it < 200 && hi - lo > 4 * std::numeric_limits<double>::epsilon(); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    a = b;
    fa = fb;
  }
  return roots;
}

}  // namespace

SingleSiteDensity::SingleSiteDensity(int order) : p_(order) {
  require(order >= 1 && order <= 30, "SingleSiteDensity: order p must be in [1, 30]");
  c_ = 1.0 / boost::math::beta(static_cast<double>(p_ + 1), static_cast<double>(p_ + 1));

  roots_.resize(static_cast<std::size_t>(p_ + 2));
  for (int j = 0; j <= p_ + 1; ++j) {
    roots_[static_cast<std::size_t>(j)] =
        find_interior_roots([this, j](double x) { return bump_derivative(p_, j, x); });
  }

  l1_.resize(static_cast<std::size_t>(p_ + 1));
  l1_[0] = 1.0;
  for (int j = 1; j <= p_; ++j) {
    const auto& r = roots_[static_cast<std::size_t>(j)];
    if (r.size() == static_cast<std::size_t>(j)) {
      std::vector<double> cuts{0.0};
      cuts.insert(cuts.end(), r.begin(), r.end());
      cuts.push_back(1.0);
      double total = 0.0;
      for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        total += std::abs(eval(j - 1, cuts[k + 1]) - eval(j - 1, cuts[k]));
      }
      l1_[static_cast<std::size_t>(j)] = total;
    } else {
      std::clog << "warning: SingleSiteDensity(p=" << p_ << "): found " << r.size()
                << " roots of rho^(" << j << "), expected " << j
                << "; falling back to adaptive quadrature\n";
      l1_[static_cast<std::size_t>(j)] = integrate_adaptive(
          [this, j](double x) { return std::abs(eval(j, x)); }, 0.0, 1.0, 1e-13, 30, r);
    }
  }

  sup_.resize(static_cast<std::size_t>(p_ + 1));
  for (int j = 0; j <= p_; ++j) {
    double best = std::max(std::abs(eval(j, 0.0)), std::abs(eval(j, 1.0)));
    for (double x : roots_[static_cast<std::size_t>(j + 1)]) best = std::max(best, std::abs(eval(j, x)));
    sup_[static_cast<std::size_t>(j)] = best;
  }
}

SingleSiteDensity SingleSiteDensity::with_smoothness(int m) {
  require(m >= 0, "SingleSiteDensity: smoothness m must be >= 0");
  return SingleSiteDensity(m + 1);
}

void SingleSiteDensity::check_order(int j) const {
  if (j < 0 || j > p_) {
    throw ValidationError("SingleSiteDensity: derivative order " + std::to_string(j) +
                          " outside [0, p=" + std::to_string(p_) + "]");
  }
}

double SingleSiteDensity::eval(int j, double x) const {
  check_order(j);
  if (!(x >= 0.0 && x <= 1.0)) return 0.0;
  return c_ * bump_derivative(p_, j, x);
}

double SingleSiteDensity::l1_norm(int j) const {
  check_order(j);
  return l1_[static_cast<std::size_t>(j)];
}

double SingleSiteDensity::sup_norm(int j) const {
  check_order(j);
  return sup_[static_cast<std::size_t>(j)];
}

double SingleSiteDensity::sup_constant() const {
  double best = 0.0;
  for (int j = 0; j <= smoothness(); ++j) best = std::max(best, sup_norm(j));
  return best;
}

const std::vector<double>& SingleSiteDensity::interior_roots(int j) const {
  require(j >= 0 && j <= p_ + 1, "SingleSiteDensity: root table order out of range");
  return roots_[static_cast<std::size_t>(j)];
}

double SingleSiteDensity::score(double x) const {
  const double p = p_;
  return p / x - p / (1.0 - x);
}

double SingleSiteDensity::score_curvature(double x) const {
  const double p = p_;
  const double y = 1.0 - x;
  return p * (p - 1.0) / (x * x) - 2.0 * p * p / (x * y) + p * (p - 1.0) / (y * y);
}

double SingleSiteDensity::cdf(double x) const {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return boost::math::ibeta(static_cast<double>(p_ + 1), static_cast<double>(p_ + 1), x);
}

double SingleSiteDensity::sample(Rng& rng) const {
  const double envelope = sup_[0];
  for (std::size_t it = 0; it < kRejectionCap; ++it) {
    const double x = rng.uniform01();
    const double u = rng.uniform01() * envelope;
    if (u < eval(0, x)) return x;
  }
  throw NumericalError("SingleSiteDensity::sample: rejection cap reached");
}

TiltedDraw SingleSiteDensity::sample_tilted(int j, Rng& rng) const {
  if (j < 1 || j > smoothness()) {
    throw ValidationError("sample_tilted: order " + std::to_string(j) + " outside [1, m=" +
                          std::to_string(smoothness()) + "]");
  }
  const double envelope = sup_[static_cast<std::size_t>(j)];
  for (std::size_t it = 0; it < kRejectionCap; ++it) {
    const double x = rng.uniform01();
    const double u = rng.uniform01() * envelope;
    const double v = eval(j, x);
    if (u < std::abs(v)) return {x, v < 0.0 ? -1.0 : 1.0, l1_[static_cast<std::size_t>(j)]};
  }
  throw NumericalError("SingleSiteDensity::sample_tilted: rejection cap reached");
}

// --- DisorderField ----------------------------------------------------------

DisorderField::DisorderField(std::vector<SingleSiteDensity> per_site)
    : densities_(std::move(per_site)) {
  require(!densities_.empty(), "DisorderField: need at least one density");
}

int DisorderField::smoothness() const { return min_order() - 1; }

int DisorderField::min_order() const {
  int best = std::numeric_limits<int>::max();
  for (const auto& d : densities_) best = std::min(best, d.order());
  return best;
}

void DisorderField::draw(Rng& rng, std::span<double> omega) const {
  for (std::size_t n = 0; n < omega.size(); ++n) omega[n] = at(n).sample(rng);
}

void write_derivative_table(std::ostream& out, const SingleSiteDensity& density,
                            int max_order, std::size_t n_points) {
  require(n_points >= 2, "write_derivative_table: need at least two points");
  require(max_order >= 0 && max_order <= density.order(),
          "write_derivative_table: order outside [0, p]");
  out << "x";
  for (int j = 0; j <= max_order; ++j) out << ",rho_d" << j;
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(n_points - 1);
    out << x;
    for (int j = 0; j <= max_order; ++j) out << ',' << density.eval(j, x);
    out << '\n';
  }
}

}  // namespace dosreg
