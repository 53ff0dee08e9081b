#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dosreg/disorder.hpp"
#include "dosreg/rng.hpp"
#include "dosreg/spectral.hpp"

namespace dosreg {

/// One machine-checkable inequality: passed iff value <= bound.
struct Check {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool passed = false;
};

struct VerificationReport {
  std::string operation;
  bool passed = true;
  std::vector<Check> checks;
  nlohmann::json metrics = nlohmann::json::object();
  nlohmann::json tolerances = nlohmann::json::object();
  /// Worst instance (or the first violating one), serialized.
  nlohmann::json witness = nlohmann::json::object();

  /// Records value <= bound and folds it into `passed`.
  void add_check(std::string name, double value, double bound);
  nlohmann::json to_json() const;
};

nlohmann::json matrix_to_json(const MatrixC& m);
MatrixC matrix_from_json(const nlohmann::json& j);

/// Deterministic random matrix corpus.
struct Corpus {
  std::size_t dim_min = 2;
  std::size_t dim_max = 6;
  std::size_t instances = 200;
  std::uint64_t seed = 2024;
  bool dissipative = false;
  double delta = 1e-2;

  /// Dimension of instance i, uniform in [dim_min, dim_max].
  std::size_t dimension(std::size_t instance) const;
  /// Stream for instance i (independent of how instances are scheduled).
  Rng stream(std::size_t instance) const;
};

MatrixC random_hermitian(std::size_t dim, Rng& rng);
/// M M* rescaled to unit spectral norm.
MatrixC random_psd(std::size_t dim, Rng& rng);
/// H + i (Q + floor I) with H Hermitian and Q = M M* of unit norm.
MatrixC random_dissipative(std::size_t dim, Rng& rng, double im_floor = 0.0);
double standard_normal(Rng& rng);

// ---------------------------------------------------------------------------
// Finite random perturbations: derivatives of E tr(A^omega - E - i eps)^-1.

struct FiniteSmoothSetup {
  MatrixC a;                      ///< Hermitian N x N
  std::vector<MatrixC> covering;  ///< T_n >= 0 with sum T_n = I
  SingleSiteDensity density{2};
  double eps = 0.2;
  int ell = 1;
  std::vector<double> energies;
  std::size_t nodes_per_axis = 16;
  double fd_step = 0.0;  ///< 0 picks a default per ell
};

/// Coordinate projections e_n e_n^* of C^N.
std::vector<MatrixC> coordinate_covering(std::size_t n);

/// Value pair at one energy: the finite difference of the quadrature of
/// h(E) = E tr(A^omega - E - i eps)^-1 and the convolution form
/// (g * D^ell Phi)(E 1) on the same tensor Gauss grid.
struct FiniteSmoothPoint {
  double energy = 0.0;
  cplx finite_difference;
  cplx convolution_form;
};

std::vector<FiniteSmoothPoint> finite_smooth_values(const FiniteSmoothSetup& setup);

/// Max relative discrepancy between the two derivative routes; fails on a
/// non-covering family T_n or N > 5.
VerificationReport verify_finite_smooth(const FiniteSmoothSetup& setup, double rel_tol);

// ---------------------------------------------------------------------------
// Averaged resolvent differences against the s-th moment.

/// Smooth indicator of (a, b): 1 on [a + w, b - w], 0 outside (a, b), with
/// C-infinity transitions built from exp(-1/x).
double smooth_indicator(double x, double a, double b, double width);

struct BumpPair {
  double support = 1.0;  ///< R; rho_1, rho_2 live in (0, R)
  SingleSiteDensity rho1{3};
  SingleSiteDensity rho2{3};
  double transition = 0.1;

  double rho1_at(double x) const;
  double rho2_at(double x) const;
  /// chi_R(x + 5R/2 + 1), chi_R the smooth indicator of (0, 2R + 1).
  double phi(double x) const;
  /// Support of phi: (-5R/2 - 1, -R/2).
  std::pair<double, double> phi_support() const;
};

struct ResolventAverageSetup {
  Corpus corpus;                 ///< instances used for the ratio sample
  BumpPair pair;
  double s = 0.4;
  std::vector<cplx> z_grid;
  std::vector<double> deltas;    ///< perturbation sizes for the slope fit
  std::size_t slope_instances = 8;
  std::size_t rho_nodes = 16;
  std::size_t phi_panel_nodes = 8;
  double slope_slack = 0.05;
  double ratio_stability = 0.10;
  unsigned workers = 1;
};

/// The two sides of the averaged-resolvent inequality for one operator pair.
struct ResolventAverageSides {
  double lhs = 0.0;
  double rhs = 0.0;
};

ResolventAverageSides resolvent_average_sides(const MatrixC& a, const MatrixC& b,
                                              const MatrixC& f1, const MatrixC& f2, cplx z,
                                              const BumpPair& pair, double s,
                                              std::size_t rho_nodes,
                                              std::size_t phi_panel_nodes);

/// Ratio LHS/RHS over the corpus (the empirical constant is its max), its
/// stability between the first half and the whole corpus, and the log-log
/// slope of LHS against delta for B = A + delta C.
VerificationReport verify_resolvent_average_bound(const ResolventAverageSetup& setup);

// ---------------------------------------------------------------------------
// Semigroup Hoelder bound ||e^{itA} - e^{itB}|| <= 2^{1-s} t^s ||A - B||^s.

struct SemigroupSetup {
  Corpus corpus;
  std::vector<double> s_values{0.3, 0.5, 0.7};
  std::vector<double> t_grid{0.1, 0.3, 1.0, 3.0, 10.0};
  double slack = 1e-10;
  unsigned workers = 1;
};

VerificationReport verify_semigroup_hoelder(const SemigroupSetup& setup);

// ---------------------------------------------------------------------------
// Resolvent average as a time integral of the semigroup.

struct SemigroupIdentitySetup {
  Corpus corpus;
  SingleSiteDensity g{3};
  double g_offset = 1.0;  ///< g supported on (g_offset, g_offset + 1)
  double im_floor = 0.5;  ///< Im A >= im_floor * I
  double t_max = 1e3;
  double tolerance = 1e-6;
  double panel_width = 0.25;
  std::size_t panel_nodes = 16;
  unsigned workers = 1;
};

/// int g(l) (A + l)^-1 dl by Gauss-Legendre on supp g.
MatrixC averaged_resolvent(const MatrixC& a, const SingleSiteDensity& g, double offset);

/// -i int_0^{t_max} e^{itA} ghat(t) dt, ghat(t) = int g(l) e^{itl} dl.
MatrixC semigroup_time_integral(const MatrixC& a, const SingleSiteDensity& g, double offset,
                                double t_max, double panel_width = 0.25,
                                std::size_t panel_nodes = 16);

/// int g(l) e^{itl} dl by Gauss-Legendre with enough nodes for the
/// oscillation at frequency t.
cplx fourier_factor(const SingleSiteDensity& g, double offset, double t);

VerificationReport verify_resolvent_semigroup_identity(const SemigroupIdentitySetup& setup,
                                                       std::span<const MatrixC> extra = {});

// ---------------------------------------------------------------------------
// Spectral averaging: F(z) = int Im <phi, (A + tB - z)^-1 phi> dmu(t).

struct SpectralAveragingSetup {
  MatrixC a;
  MatrixC b;
  VectorC phi;
  SingleSiteDensity mu{3};
  std::vector<double> energies;
  std::vector<double> epsilons{0.1, 0.01};
  double stability = 0.02;  ///< allowed relative drift of the sup between epsilons
  double rel_tol = 1e-9;
};

double spectral_average(const SpectralAveragingSetup& setup, cplx z);

/// sup over the energy grid for each epsilon, with the relative drift of the
/// sup between consecutive epsilons checked against `stability`.
VerificationReport verify_spectral_averaging(const SpectralAveragingSetup& setup);

// ---------------------------------------------------------------------------
// Boundary values of F(z) = int rho(x) / (x - z) dx.

struct BoundaryDerivativeSetup {
  SingleSiteDensity rho{2};
  std::vector<double> epsilons{0.1, 0.01, 0.001};
  std::vector<double> energies;  ///< interior grid inside (0, 1)
  int max_order = 1;
  double off_support_distance = 1.0;
};

/// d^j/dE^j Im F(E + i eps) by adaptive quadrature.
double boundary_derivative(const SingleSiteDensity& rho, int j, double energy, double eps);

VerificationReport verify_boundary_derivatives(const BoundaryDerivativeSetup& setup);

}  // namespace dosreg
