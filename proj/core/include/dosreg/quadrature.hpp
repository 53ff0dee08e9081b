#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace dosreg {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const noexcept { return nodes.size(); }
};

/// n-point Gauss-Legendre rule on [a, b]. Nodes are computed by Newton
/// iteration on the Legendre recurrence and cached per n.
QuadratureRule gauss_legendre(std::size_t n, double a = -1.0, double b = 1.0);

/// Composite Gauss-Legendre rule: `points_per_panel` nodes on each panel
/// between consecutive breakpoints (which must be increasing).
QuadratureRule composite_gauss_legendre(const std::vector<double>& breakpoints,
                                        std::size_t points_per_panel);

/// Adaptive Gauss-Kronrod (15-point) integral of a real function on [a, b].
/// Breakpoints inside (a, b) are honoured as panel boundaries.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol = 1e-11, unsigned max_depth = 30,
                          const std::vector<double>& breakpoints = {});

}  // namespace dosreg
