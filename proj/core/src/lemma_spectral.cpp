#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "dosreg/lemma_verify.hpp"
#include "dosreg/quadrature.hpp"

namespace dosreg {
namespace {

void check_averaging_setup(const SpectralAveragingSetup& setup) {
  const auto n = setup.a.rows();
  require(n >= 1 && setup.a.cols() == n, "spectral averaging: A must be square");
  require(setup.b.rows() == n && setup.b.cols() == n, "spectral averaging: B has the wrong shape");
  require(setup.phi.size() == n, "spectral averaging: phi has the wrong length");
  require((setup.a - setup.a.adjoint()).cwiseAbs().maxCoeff() <= 1e-12,
          "spectral averaging: A must be Hermitian");
  require((setup.b - setup.b.adjoint()).cwiseAbs().maxCoeff() <= 1e-12,
          "spectral averaging: B must be Hermitian");
  Eigen::SelfAdjointEigenSolver<MatrixC> eig(setup.b);
  const double b_norm = eig.eigenvalues().cwiseAbs().maxCoeff();
  require(eig.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, b_norm),
          "spectral averaging: B must be positive semidefinite");
  // Projector onto Range(B).
  VectorC projected = VectorC::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (eig.eigenvalues()(k) > 1e-12 * std::max(1.0, b_norm)) {
      const VectorC v = eig.eigenvectors().col(k);
      projected += v * v.dot(setup.phi);
    }
  }
  const double off_range = (setup.phi - projected).norm();
  if (off_range > 1e-10 * std::max(1.0, setup.phi.norm())) {
    throw ValidationError("spectral averaging: phi is not in Range(B) (distance " +
                          std::to_string(off_range) + ")");
  }
  require(!setup.energies.empty(), "spectral averaging: energy grid is empty");
  require(!setup.epsilons.empty(), "spectral averaging: epsilon list is empty");
  for (double e : setup.epsilons) require(e > 0.0, "spectral averaging: epsilons must be > 0");
}

}  // namespace

double spectral_average(const SpectralAveragingSetup& setup, cplx z) {
  require(z.imag() > 0.0, "spectral averaging: Im z must be > 0");
  if (setup.phi.squaredNorm() == 0.0) return 0.0;
  const auto n = setup.a.rows();
  auto integrand = [&](double t) {
    const double weight = setup.mu(t);
    if (weight == 0.0) return 0.0;
    const MatrixC m = setup.a + t * setup.b - z * MatrixC::Identity(n, n);
    const VectorC x = m.partialPivLu().solve(setup.phi);
    return weight * setup.phi.dot(x).imag();
  };
  return integrate_adaptive(integrand, 0.0, 1.0, setup.rel_tol);
}

VerificationReport verify_spectral_averaging(const SpectralAveragingSetup& setup) {
  check_averaging_setup(setup);
  VerificationReport report;
  report.operation = "spectral_averaging";
  std::vector<double> sups;
  std::vector<double> argmax;
  for (double eps : setup.epsilons) {
    double best = -std::numeric_limits<double>::infinity();
    double at = setup.energies.front();
    for (double e : setup.energies) {
      const double f = spectral_average(setup, cplx(e, eps));
      if (f > best) {
        best = f;
        at = e;
      }
    }
    sups.push_back(best);
    argmax.push_back(at);
  }
  bool finite = true;
  for (double s : sups) finite = finite && std::isfinite(s);
  report.add_check("sup_finite", finite ? 0.0 : 1.0, 0.0);
  double worst_drift = 0.0;
  std::vector<double> drifts;
  for (std::size_t k = 0; k + 1 < sups.size(); ++k) {
    double drift = 0.0;
    if (sups[k] != 0.0) {
      drift = std::abs(sups[k + 1] / sups[k] - 1.0);
    } else if (sups[k + 1] != 0.0) {
      drift = std::numeric_limits<double>::infinity();
    }
    drifts.push_back(drift);
    worst_drift = std::max(worst_drift, drift);
  }
  report.add_check("sup_relative_drift", worst_drift, setup.stability);
  report.metrics["epsilons"] = setup.epsilons;
  report.metrics["sups"] = sups;
  report.metrics["argmax_energy"] = argmax;
  report.metrics["drifts"] = drifts;
  report.metrics["pi_times_density_sup"] = std::numbers::pi * setup.mu.sup_norm(0);
  report.tolerances["stability"] = setup.stability;
  report.tolerances["rel_tol"] = setup.rel_tol;
  report.witness = {{"a", matrix_to_json(setup.a)}, {"b", matrix_to_json(setup.b)}};
  return report;
}

// --- boundary values of the Borel transform ---------------------------------------

double boundary_derivative(const SingleSiteDensity& rho, int j, double energy, double eps) {
  require(eps > 0.0, "boundary derivative: eps must be > 0");
  require(j >= 0 && j <= rho.order(), "boundary derivative: order outside [0, p]");
  // d^j/dE^j of the Poisson smoothing moves onto the density; x = E + eps tan(t)
  // flattens the Lorentzian so the integrand stays bounded as eps -> 0.
  auto integrand = [&](double t) { return rho.eval(j, energy + eps * std::tan(t)); };
  const double lo = std::atan((0.0 - energy) / eps);
  const double hi = std::atan((1.0 - energy) / eps);
  return integrate_adaptive(integrand, lo, hi, 1e-12, 20);
}

VerificationReport verify_boundary_derivatives(const BoundaryDerivativeSetup& setup) {
  const auto& rho = setup.rho;
  require(setup.max_order >= 0 && setup.max_order <= rho.smoothness(),
          "boundary derivatives: max_order must lie in [0, m]");
  require(rho.order() >= 2, "boundary derivatives: the convergence bound needs p >= 2");
  require(!setup.epsilons.empty(), "boundary derivatives: epsilon list is empty");
  require(!setup.energies.empty(), "boundary derivatives: energy grid is empty");
  for (double e : setup.energies) {
    require(e > 0.0 && e < 1.0, "boundary derivatives: energies must lie inside (0, 1)");
  }
  require(setup.off_support_distance > 0.0, "boundary derivatives: distance must be > 0");

  VerificationReport report;
  report.operation = "boundary_derivatives";
  const double pi = std::numbers::pi;

  // Uniform bound: |d^j Im F| <= pi ||rho^(j)||_inf for every eps.
  nlohmann::json per_order = nlohmann::json::array();
  for (int j = 0; j <= setup.max_order; ++j) {
    const double bound = pi * rho.sup_norm(j);
    std::vector<double> sups;
    for (double eps : setup.epsilons) {
      double best = 0.0;
      for (double e : setup.energies) {
        best = std::max(best, std::abs(boundary_derivative(rho, j, e, eps)));
      }
      sups.push_back(best);
      report.add_check("sup_order_" + std::to_string(j) + "_eps_" + std::to_string(eps), best,
                       bound * (1.0 + 1e-9) + 1e-10);
    }
    per_order.push_back({{"order", j},
                         {"sups", sups},
                         {"bound", bound},
                         {"ratio_last_to_first", sups.front() > 0.0 ? sups.back() / sups.front()
                                                                    : 0.0}});
  }
  report.metrics["uniform_bound"] = per_order;

  // First-order convergence Im F / pi -> rho with the explicit constant
  // (4 / pi) sqrt(||rho''|| ||rho|| / 2).
  const double c = 4.0 / pi * std::sqrt(rho.sup_norm(2) * rho.sup_norm(0) / 2.0);
  nlohmann::json conv = nlohmann::json::array();
  for (double eps : setup.epsilons) {
    double worst = 0.0;
    for (double e : setup.energies) {
      worst = std::max(worst, std::abs(boundary_derivative(rho, 0, e, eps) / pi - rho(e)));
    }
    conv.push_back({{"eps", eps}, {"max_error", worst}, {"error_over_eps", worst / eps}});
    report.add_check("boundary_error_over_eps_" + std::to_string(eps), worst / eps,
                     c + 1e-10 / eps);
  }
  report.metrics["convergence"] = conv;
  report.metrics["convergence_constant"] = c;

  // Off the support: Im F(E + i eps) <= eps / dist^2.
  const double dist = setup.off_support_distance;
  double worst_off = -std::numeric_limits<double>::infinity();
  for (double eps : setup.epsilons) {
    for (double e : {-dist, 1.0 + dist}) {
      worst_off = std::max(worst_off, boundary_derivative(rho, 0, e, eps) - eps / (dist * dist));
    }
  }
  report.add_check("off_support_excess", worst_off, 1e-12);
  report.tolerances["uniform_bound_rel"] = 1e-9;
  report.tolerances["off_support_slack"] = 1e-12;
  report.witness = {{"order", rho.order()}};
  return report;
}

}  // namespace dosreg
