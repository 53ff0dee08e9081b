#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dosreg/disorder.hpp"
#include "dosreg/graph_model.hpp"
#include "dosreg/spectral.hpp"
#include "dosreg/stats.hpp"

namespace dosreg {

/// Sampling controls shared by every estimator. Sample i always uses the
/// stream sample_rng(master_seed, i), so results are bit-identical for any
/// worker count.
struct McConfig {
  std::size_t n_samples = 1000;
  std::uint64_t master_seed = 0;
  unsigned workers = 1;
  /// Pair every disorder draw omega with its reflection 1 - omega in the
  /// derivative estimators (all bump densities are symmetric about 1/2).
  bool antithetic = true;
};

/// Moment exponents used by the presets: moment runs default to 1/3, the
/// telescoping preset requires s < 1/2.
inline constexpr double kDefaultMomentExponent = 1.0 / 3.0;
inline constexpr double kTelescopingExponentBound = 0.5;

/// Fixed epsilon grid on which estimates are reported.
inline constexpr double kEpsilonGrid[] = {0.5, 0.2, 0.1, 0.05};

/// Runs `per_sample(rng, out)` for every sample, writing `width` complex
/// values per sample, and reduces each column in sample order.
std::vector<Estimate> monte_carlo(
    const McConfig& mc, std::size_t width,
    const std::function<void(Rng&, std::span<cplx>)>& per_sample);

/// E ||P_n (h_Lambda - z)^-1 P_k||^s with Lambda the first n_sites sites.
Estimate estimate_fractional_moment(const ModelSpec& model, const DisorderField& disorder,
                                    std::size_t n_sites, const ComplexShift& z,
                                    std::size_t source, std::size_t target, double s,
                                    const McConfig& mc);

/// Same, for several targets sharing the disorder draws of each sample.
std::vector<Estimate> estimate_fractional_moment_profile(
    const ModelSpec& model, const DisorderField& disorder, std::size_t n_sites,
    const ComplexShift& z, std::size_t source, std::span<const std::size_t> targets,
    double s, const McConfig& mc);

/// Fitted exponential decay mean ~ exp(intercept - rate * distance).
struct DecayFit {
  double rate = 0.0;       ///< xi_s = -slope
  double intercept = 0.0;  ///< log C
  double r_squared = 0.0;
  double d_min = 0.0;
  double d_max = 0.0;
  std::size_t n_points = 0;
};

struct DecayPoint {
  double distance = 0.0;
  Estimate estimate;
};

struct DecayWindow {
  double d_min = 0.0;
  double d_max = 1e300;
};

/// Ordinary least squares of log|mean| against distance over the window.
/// Distance 0 and points whose |mean| is within 2 standard errors of 0 are
/// excluded. Throws ValidationError when fewer than 3 points remain, with a
/// distinct message when every mean is exactly zero (exact decoupling).
DecayFit fit_decay(std::span<const DecayPoint> points, DecayWindow window = {});

/// Pastur-Shubin trace tr(P0 E((-inf, E])) and its value divided by tr(P0).
struct IdsEstimate {
  Estimate trace;
  Estimate normalized;
};

IdsEstimate estimate_ids(const ModelSpec& model, const DisorderField& disorder,
                         std::size_t n_sites, double energy, const McConfig& mc);
/// One eigensolve per sample shared across the energy grid.
std::vector<IdsEstimate> estimate_ids_curve(const ModelSpec& model,
                                            const DisorderField& disorder,
                                            std::size_t n_sites,
                                            std::span<const double> energies,
                                            const McConfig& mc);

/// (1/pi) E Im tr(P0 (h_Lambda - E - i eps)^-1).
Estimate estimate_smoothed_dos(const ModelSpec& model, const DisorderField& disorder,
                               std::size_t n_sites, const ComplexShift& z,
                               const McConfig& mc);
std::vector<Estimate> estimate_smoothed_dos_curve(const ModelSpec& model,
                                                  const DisorderField& disorder,
                                                  std::size_t n_sites,
                                                  std::span<const double> energies, double eps,
                                                  const McConfig& mc);

/// E tr(P0 (h_Lambda - z)^-1), the undifferentiated resolvent trace.
Estimate estimate_resolvent_trace(const ModelSpec& model, const DisorderField& disorder,
                                  std::size_t n_sites, const ComplexShift& z,
                                  const McConfig& mc);

/// Score weight D^ell Phi / Phi over the first n_sites coordinates:
/// ell = 1: S1 = sum rho'/rho(omega_n); ell = 2: S1^2 + sum (rho''/rho - (rho'/rho)^2).
double score_weight(const DisorderField& disorder, std::span<const double> omega, int ell);

/// Checks 0 <= ell <= min(m, 2) and the finite-variance order requirements
/// (p >= 2 for ell >= 1, p >= 4 for ell = 2) over the first n_sites sites.
void validate_derivative_order(const DisorderField& disorder, std::size_t n_sites, int ell);

/// d^ell/dE^ell E tr(P0 (h_Lambda - E - i eps)^-1) = E[ tr(P0 G) * S_ell ].
/// ell = 0 reproduces estimate_resolvent_trace exactly.
Estimate estimate_dos_derivative(const ModelSpec& model, const DisorderField& disorder,
                                 std::size_t n_sites, const ComplexShift& z, int ell,
                                 const McConfig& mc);
std::vector<Estimate> estimate_dos_derivative_curve(const ModelSpec& model,
                                                    const DisorderField& disorder,
                                                    std::size_t n_sites,
                                                    std::span<const double> energies,
                                                    double eps, int ell, const McConfig& mc);

/// Same quantity, with the score weights taken over the first weight_sites
/// sites (weight_sites >= n_sites); the extra coordinates do not enter the
/// integrand, so the expectation is unchanged.
Estimate estimate_dos_derivative_weighted(const ModelSpec& model, const DisorderField& disorder,
                                          std::size_t n_sites, std::size_t weight_sites,
                                          const ComplexShift& z, int ell, const McConfig& mc);

/// Multinomial expansion of D^ell: a sum over multi-indices k with |k| = ell
/// of multinomial(ell; k) * prod ||rho^(k_n)||_1 * E_{P_(k)}[prod sign * f],
/// each term sampled from the tilted product law. Exhaustive over
/// multi-indices, so intended for small volumes; ell >= 3 needs
/// `experimental`. Term j uses master seed mix_seed(master_seed, j).
Estimate estimate_dos_derivative_tilted(const ModelSpec& model, const DisorderField& disorder,
                                        std::size_t n_sites, const ComplexShift& z, int ell,
                                        const McConfig& mc, bool experimental = false);

/// T_{K,ell}(E, eps) = d^ell/dE^ell E tr(G_{K+1} - G_K), G_M = P0 (h_{Lambda_M} - z)^-1 P0,
/// where Lambda_M = {x_0..x_M}. Both volumes share the disorder of each
/// sample and the score weight runs over Lambda_{K+1}.
Estimate telescoping_term(const ModelSpec& model, const DisorderField& disorder, std::size_t k,
                          const ComplexShift& z, int ell, const McConfig& mc);

struct TelescopeTerm {
  std::size_t k = 0;
  Estimate estimate;
};

struct TelescopeReport {
  std::vector<TelescopeTerm> terms;
  std::vector<double> magnitudes;     ///< |T_K|
  std::vector<cplx> partial_sums;     ///< sum_{K' <= K} T_K'
  std::vector<double> partial_sum_errors;
  std::optional<DecayFit> fit;        ///< fit of log|T_K| against K
  /// Slope of log|T_K| against K (-rate); nullopt when every term vanishes.
  std::optional<double> slope;
  bool all_terms_zero = false;
  bool summability_supported = false;
  std::string note;
};

/// Fits and summarizes a sequence of telescoping terms. Summability is
/// supported when the fitted slope is negative with r^2 >= 0.9, or trivially
/// when every term is exactly zero.
TelescopeReport diagnose_series(std::span<const TelescopeTerm> terms);

/// T_{K,ell} for K in [k_min, k_max], every volume evaluated on the same
/// samples, followed by diagnose_series.
TelescopeReport telescope_series_diagnostic(const ModelSpec& model,
                                            const DisorderField& disorder, std::size_t k_min,
                                            std::size_t k_max, const ComplexShift& z, int ell,
                                            const McConfig& mc);

}  // namespace dosreg
