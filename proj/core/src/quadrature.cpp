#include "dosreg/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dosreg/common.hpp"

namespace dosreg {
namespace {

// Legendre P_n(x) and P_{n-1}(x) by the three-term recurrence.
std::pair<double, double> legendre(std::size_t n, double x) {
  double p0 = 1.0;
  double p1 = x;
  for (std::size_t k = 2; k <= n; ++k) {
    const double kk = static_cast<double>(k);
    const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
    p0 = p1;
    p1 = p2;
  }
  return {p1, p0};
}

QuadratureRule compute_reference_rule(std::size_t n) {
  QuadratureRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  if (n == 1) {
    rule.weights[0] = 2.0;
    return rule;
  }
  const double nd = static_cast<double>(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (nd + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      const auto [pn, pm] = legendre(n, x);
      const double dp = nd * (x * pn - pm) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const auto [pn, pm] = legendre(n, x);
    const double dp = nd * (x * pn - pm) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

const QuadratureRule& reference_rule(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, QuadratureRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_reference_rule(n)).first;
  return it->second;
}

}  // namespace

QuadratureRule gauss_legendre(std::size_t n, double a, double b) {
  require(n >= 1, "gauss_legendre: need at least one node");
  const QuadratureRule& ref = reference_rule(n);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  for (std::size_t i = 0; i < n; ++i) {
    rule.nodes[i] = mid + half * ref.nodes[i];
    rule.weights[i] = half * ref.weights[i];
  }
  return rule;
}

QuadratureRule composite_gauss_legendre(const std::vector<double>& breakpoints,
                                        std::size_t points_per_panel) {
  require(breakpoints.size() >= 2, "composite_gauss_legendre: need two breakpoints");
  QuadratureRule rule;
  for (std::size_t k = 0; k + 1 < breakpoints.size(); ++k) {
    require(breakpoints[k + 1] > breakpoints[k],
            "composite_gauss_legendre: breakpoints must increase");
    const QuadratureRule panel =
        gauss_legendre(points_per_panel, breakpoints[k], breakpoints[k + 1]);
    rule.nodes.insert(rule.nodes.end(), panel.nodes.begin(), panel.nodes.end());
    rule.weights.insert(rule.weights.end(), panel.weights.begin(), panel.weights.end());
  }
  return rule;
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol, unsigned max_depth,
                          const std::vector<double>& breakpoints) {
  if (b <= a) return 0.0;
  std::vector<double> cuts{a};
  for (double c : breakpoints) {
    if (c > a && c < b) cuts.push_back(c);
  }
  cuts.push_back(b);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    if (cuts[k + 1] <= cuts[k]) continue;
    double error = 0.0;
    total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, cuts[k], cuts[k + 1], max_depth, rel_tol, &error);
  }
  return total;
}

}  // namespace dosreg
