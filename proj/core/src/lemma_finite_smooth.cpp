#include <algorithm>
#include <cmath>

#include "dosreg/lemma_verify.hpp"
#include "dosreg/quadrature.hpp"
#include "dosreg/stats.hpp"

namespace dosreg {
namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

void check_setup(const FiniteSmoothSetup& setup) {
  const auto n = setup.a.rows();
  require(n >= 1 && setup.a.cols() == n, "finite smooth: A must be square");
  require((setup.a - setup.a.adjoint()).cwiseAbs().maxCoeff() <= 1e-12,
          "finite smooth: A must be Hermitian");
  require(!setup.covering.empty() && setup.covering.size() <= 5,
          "finite smooth: need between 1 and 5 perturbation operators");
  MatrixC sum = MatrixC::Zero(n, n);
  for (const auto& t : setup.covering) {
    require(t.rows() == n && t.cols() == n, "finite smooth: T_n has the wrong shape");
    require((t - t.adjoint()).cwiseAbs().maxCoeff() <= 1e-12, "finite smooth: T_n not Hermitian");
    require(Eigen::SelfAdjointEigenSolver<MatrixC>(t, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() >=
                -1e-12,
            "finite smooth: T_n must be positive");
    sum += t;
  }
  const double defect = (sum - MatrixC::Identity(n, n)).cwiseAbs().maxCoeff();
  if (defect > 1e-12) {
    throw ValidationError("finite smooth: the family T_n does not cover (sum T_n != I, defect " +
                          std::to_string(defect) + ")");
  }
  require(setup.ell >= 0 && setup.ell <= setup.density.smoothness(),
          "finite smooth: ell must lie in [0, m]");
  require(setup.eps > 0.0, "finite smooth: eps must be > 0");
  require(setup.nodes_per_axis >= 2, "finite smooth: need at least 2 nodes per axis");
  require(!setup.energies.empty(), "finite smooth: energy grid is empty");
}

struct TensorGrid {
  std::vector<double> eigenvalues;  // node-major, dim per node
  std::vector<double> phi_weights;  // w * Phi
  std::vector<double> d_weights;    // w * D^ell Phi
  std::size_t dim = 0;
};

TensorGrid build_grid(const FiniteSmoothSetup& setup) {
  const std::size_t n_vars = setup.covering.size();
  const QuadratureRule rule = gauss_legendre(setup.nodes_per_axis, 0.0, 1.0);
  const std::size_t q = rule.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < n_vars; ++i) total *= q;

  const int ell = setup.ell;
  // Per-axis tables rho^(k)(x) / k! for k <= ell.
  std::vector<std::vector<double>> taylor(q, std::vector<double>(static_cast<std::size_t>(ell + 1)));
  for (std::size_t i = 0; i < q; ++i) {
    double fact = 1.0;
    for (int k = 0; k <= ell; ++k) {
      if (k > 1) fact *= k;
      taylor[i][static_cast<std::size_t>(k)] = setup.density.eval(k, rule.nodes[i]) / fact;
    }
  }
  double ell_factorial = 1.0;
  for (int k = 2; k <= ell; ++k) ell_factorial *= k;

  TensorGrid grid;
  grid.dim = static_cast<std::size_t>(setup.a.rows());
  grid.eigenvalues.resize(total * grid.dim);
  grid.phi_weights.resize(total);
  grid.d_weights.resize(total);

  std::vector<std::size_t> idx(n_vars, 0);
  Eigen::SelfAdjointEigenSolver<MatrixC> solver;
  for (std::size_t node = 0; node < total; ++node) {
    std::size_t rem = node;
    for (std::size_t v = 0; v < n_vars; ++v) {
      idx[v] = rem % q;
      rem /= q;
    }
    MatrixC m = setup.a;
    double w = 1.0;
    // Coefficients of prod_n sum_k rho^(k)(omega_n) t^k / k!, truncated at t^ell.
    std::vector<double> poly(static_cast<std::size_t>(ell + 1), 0.0);
    poly[0] = 1.0;
    for (std::size_t v = 0; v < n_vars; ++v) {
      m += rule.nodes[idx[v]] * setup.covering[v];
      w *= rule.weights[idx[v]];
      std::vector<double> next(poly.size(), 0.0);
      for (std::size_t a = 0; a < poly.size(); ++a) {
        for (std::size_t b = 0; a + b < poly.size(); ++b) next[a + b] += poly[a] * taylor[idx[v]][b];
      }
      poly = std::move(next);
    }
    solver.compute(m, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("finite smooth: eigensolver failed");
    for (std::size_t k = 0; k < grid.dim; ++k) {
      grid.eigenvalues[node * grid.dim + k] = solver.eigenvalues()(static_cast<Eigen::Index>(k));
    }
    // Phi is the t^0 coefficient and D^ell Phi = ell! [t^ell].
    grid.phi_weights[node] = w * poly[0];
    grid.d_weights[node] = w * ell_factorial * poly[static_cast<std::size_t>(ell)];
  }
  return grid;
}

cplx grid_integral(const TensorGrid& grid, const std::vector<double>& weights, cplx z) {
  std::vector<cplx> terms(weights.size());
  for (std::size_t node = 0; node < weights.size(); ++node) {
    cplx tr{};
    for (std::size_t k = 0; k < grid.dim; ++k) tr += 1.0 / (grid.eigenvalues[node * grid.dim + k] - z);
    terms[node] = weights[node] * tr;
  }
  return pairwise_sum(std::span<const cplx>(terms));
}

// Central difference of order ell with step delta, O(delta^2).
cplx central_difference(const TensorGrid& grid, const std::vector<double>& weights, double energy,
                        double eps, int ell, double delta) {
  cplx acc{};
  for (int i = 0; i <= ell; ++i) {
    const double e = energy + (0.5 * ell - i) * delta;
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    acc += sign * binomial(ell, i) * grid_integral(grid, weights, cplx(e, eps));
  }
  return acc / std::pow(delta, ell);
}

double default_step(int ell) {
  if (ell <= 1) return 1e-3;
  if (ell == 2) return 5e-3;
  return 1e-2;
}

}  // namespace

std::vector<MatrixC> coordinate_covering(std::size_t n) {
  std::vector<MatrixC> out;
  for (std::size_t i = 0; i < n; ++i) {
    MatrixC t = MatrixC::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<FiniteSmoothPoint> finite_smooth_values(const FiniteSmoothSetup& setup) {
  check_setup(setup);
  const TensorGrid grid = build_grid(setup);
  const double delta = setup.fd_step > 0.0 ? setup.fd_step : default_step(setup.ell);
  std::vector<FiniteSmoothPoint> out;
  for (double e : setup.energies) {
    FiniteSmoothPoint pt;
    pt.energy = e;
    if (setup.ell == 0) {
      pt.finite_difference = grid_integral(grid, grid.phi_weights, cplx(e, setup.eps));
    } else {
      // Richardson extrapolation removes the delta^2 term.
      const cplx coarse = central_difference(grid, grid.phi_weights, e, setup.eps, setup.ell, delta);
      const cplx fine =
          central_difference(grid, grid.phi_weights, e, setup.eps, setup.ell, 0.5 * delta);
      pt.finite_difference = (4.0 * fine - coarse) / 3.0;
    }
    pt.convolution_form = grid_integral(grid, grid.d_weights, cplx(e, setup.eps));
    out.push_back(pt);
  }
  return out;
}

VerificationReport verify_finite_smooth(const FiniteSmoothSetup& setup, double rel_tol) {
  VerificationReport report;
  report.operation = "finite_smooth";
  const auto points = finite_smooth_values(setup);
  double scale = 0.0;
  for (const auto& p : points) scale = std::max(scale, std::abs(p.convolution_form));
  const double floor = std::max(1e-6 * scale, 1e-300);
  double worst = 0.0;
  std::size_t worst_index = 0;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    const double rel = std::abs(p.finite_difference - p.convolution_form) /
                       std::max(std::abs(p.convolution_form), floor);
    if (i == 0 || rel > worst) {
      worst = rel;
      worst_index = i;
    }
    rows.push_back({{"E", p.energy},
                    {"fd_re", p.finite_difference.real()},
                    {"fd_im", p.finite_difference.imag()},
                    {"conv_re", p.convolution_form.real()},
                    {"conv_im", p.convolution_form.imag()},
                    {"rel_error", rel}});
  }
  report.add_check("max_relative_discrepancy", worst, rel_tol);
  report.metrics["max_relative_discrepancy"] = worst;
  report.metrics["points"] = rows;
  report.metrics["sites"] = setup.covering.size();
  report.metrics["ell"] = setup.ell;
  report.metrics["eps"] = setup.eps;
  report.tolerances["relative"] = rel_tol;
  report.tolerances["nodes_per_axis"] = setup.nodes_per_axis;
  report.witness = {{"energy", points[worst_index].energy},
                    {"a", matrix_to_json(setup.a)},
                    {"rel_error", worst}};
  return report;
}

}  // namespace dosreg
