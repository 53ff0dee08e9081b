#include <algorithm>
#include <cmath>

#include "dosreg/estimators.hpp"

namespace dosreg {
namespace {

// Per-site score pieces: a_n = rho'/rho, b_n = rho''/rho - a_n^2.
struct ScorePieces {
  std::vector<double> a;
  std::vector<double> b;
};

ScorePieces score_pieces(const DisorderField& disorder, std::span<const double> omega) {
  ScorePieces out{std::vector<double>(omega.size()), std::vector<double>(omega.size())};
  for (std::size_t n = 0; n < omega.size(); ++n) {
    const auto& rho = disorder.at(n);
    out.a[n] = rho.score(omega[n]);
    out.b[n] = rho.score_curvature(omega[n]) - out.a[n] * out.a[n];
  }
  return out;
}

// tr P0 (G_{K+1} - G_K) P0 from the Schur complement of the block added to
// Lambda_K: G_K B S^-1 B* G_K with S = D - z - B* G_K B. No difference of two
// traces is formed, so small increments keep their relative accuracy.
cplx trace_increment(const ModelSpec& model, std::span<const double> omega, std::size_t k,
                     const ComplexShift& z) {
  const std::size_t dim = model.dimension(k + 1);
  const Block added = model.block(k + 1);
  const Block p0 = model.block(0);
  const auto r = static_cast<Eigen::Index>(added.rank);
  MatrixC b = MatrixC::Zero(static_cast<Eigen::Index>(dim), r);
  bool coupled = false;
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t c = 0; c < added.rank; ++c) {
      const cplx amp = model.free.amplitude(i, added.offset + c);
      if (amp == cplx{}) continue;
      b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = amp;
      coupled = true;
    }
  }
  if (!coupled) return {};

  const Hamiltonian h = assemble_operator(model, omega.first(k + 1), k + 1);
  const ResolventSolver solver(h, z);
  MatrixC gb(static_cast<Eigen::Index>(dim), r);
  for (Eigen::Index c = 0; c < r; ++c) gb.col(c) = solver.solve(b.col(c));
  const auto r0 = static_cast<Eigen::Index>(p0.rank);
  MatrixC gp(static_cast<Eigen::Index>(dim), r0);
  for (Eigen::Index c = 0; c < r0; ++c) gp.col(c) = solver.column(p0.offset + static_cast<std::size_t>(c));

  MatrixC schur(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < r; ++j) {
      schur(i, j) = model.free.amplitude(added.offset + static_cast<std::size_t>(i),
                                         added.offset + static_cast<std::size_t>(j));
    }
    schur(i, i) += model.coupling * omega[k + 1] - z.z();
  }
  schur -= b.adjoint() * gb;
  const MatrixC left = gb.middleRows(static_cast<Eigen::Index>(p0.offset), r0);
  const MatrixC right = b.adjoint() * gp;
  return (left * schur.partialPivLu().solve(right)).trace();
}

// Writes T_K for K = k_min..k_max into out[0..], with the score weight of each
// term running over Lambda_{K+1}.
void telescope_sample(const ModelSpec& model, const DisorderField& disorder, std::size_t k_min,
                      std::size_t k_max, const ComplexShift& z, int ell,
                      std::span<const double> omega, std::span<cplx> out) {
  ScorePieces pieces;
  if (ell >= 1) pieces = score_pieces(disorder, omega);
  double s1 = 0.0;
  double correction = 0.0;
  std::size_t summed = 0;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    double weight = 1.0;
    if (ell >= 1) {
      for (; summed < k + 2; ++summed) {
        s1 += pieces.a[summed];
        correction += pieces.b[summed];
      }
      weight = ell == 1 ? s1 : s1 * s1 + correction;
    }
    const std::size_t i = k - k_min;
    out[i] = trace_increment(model, omega, k, z) * weight;
  }
}

std::vector<Estimate> telescope_estimates(const ModelSpec& model, const DisorderField& disorder,
                                          std::size_t k_min, std::size_t k_max,
                                          const ComplexShift& z, int ell, const McConfig& mc,
                                          bool with_partial_sums) {
  require(k_min <= k_max, "telescoping range must be increasing");
  require(k_max + 2 <= model.n_sites(),
          "telescoping range needs " + std::to_string(k_max + 2) + " sites, model has " +
              std::to_string(model.n_sites()));
  validate_derivative_order(disorder, k_max + 2, ell);
  const std::size_t n_terms = k_max - k_min + 1;
  const std::size_t width = with_partial_sums ? 2 * n_terms : n_terms;
  const double scale = std::pow(model.coupling, -ell);
  const bool paired = mc.antithetic && ell >= 1;

  return monte_carlo(mc, width, [&](Rng& rng, std::span<cplx> out) {
    std::vector<double> omega(k_max + 2);
    disorder.draw(rng, omega);
    std::vector<cplx> terms(n_terms);
    telescope_sample(model, disorder, k_min, k_max, z, ell, omega, terms);
    if (paired) {
      std::vector<double> mirror(omega.size());
      std::transform(omega.begin(), omega.end(), mirror.begin(), [](double w) { return 1.0 - w; });
      std::vector<cplx> mirror_terms(n_terms);
      telescope_sample(model, disorder, k_min, k_max, z, ell, mirror, mirror_terms);
      for (std::size_t i = 0; i < n_terms; ++i) terms[i] = 0.5 * (terms[i] + mirror_terms[i]);
    }
    cplx running{};
    for (std::size_t i = 0; i < n_terms; ++i) {
      out[i] = scale * terms[i];
      if (with_partial_sums) {
        running += out[i];
        out[n_terms + i] = running;
      }
    }
  });
}

}  // namespace

Estimate telescoping_term(const ModelSpec& model, const DisorderField& disorder, std::size_t k,
                          const ComplexShift& z, int ell, const McConfig& mc) {
  return telescope_estimates(model, disorder, k, k, z, ell, mc, false).front();
}

TelescopeReport diagnose_series(std::span<const TelescopeTerm> terms) {
  TelescopeReport report;
  report.terms.assign(terms.begin(), terms.end());
  cplx running{};
  double var = 0.0;
  std::vector<DecayPoint> points;
  bool all_zero = !terms.empty();
  for (const auto& t : terms) {
    report.magnitudes.push_back(std::abs(t.estimate.mean));
    running += t.estimate.mean;
    var += t.estimate.std_error * t.estimate.std_error;
    report.partial_sums.push_back(running);
    report.partial_sum_errors.push_back(std::sqrt(var));
    points.push_back({static_cast<double>(t.k), t.estimate});
    if (t.estimate.mean != cplx{}) all_zero = false;
  }
  report.all_terms_zero = all_zero;
  if (all_zero) {
    report.summability_supported = true;
    report.note = "every term is exactly zero (decoupled volumes)";
    return report;
  }
  try {
    const DecayFit fit = fit_decay(points);
    report.fit = fit;
    report.slope = -fit.rate;
    report.summability_supported = fit.rate > 0.0 && fit.r_squared >= 0.9;
    report.note = report.summability_supported ? "exponential decay fitted"
                                               : "fit does not support exponential decay";
  } catch (const ValidationError& e) {
    report.note = e.what();
  }
  return report;
}

TelescopeReport telescope_series_diagnostic(const ModelSpec& model,
                                            const DisorderField& disorder, std::size_t k_min,
                                            std::size_t k_max, const ComplexShift& z, int ell,
                                            const McConfig& mc) {
  const auto estimates = telescope_estimates(model, disorder, k_min, k_max, z, ell, mc, true);
  const std::size_t n_terms = k_max - k_min + 1;
  std::vector<TelescopeTerm> terms;
  for (std::size_t i = 0; i < n_terms; ++i) terms.push_back({k_min + i, estimates[i]});
  TelescopeReport report = diagnose_series(terms);
  // Coupled per-sample partial sums carry tighter errors than the independent bound.
  for (std::size_t i = 0; i < n_terms; ++i) {
    report.partial_sums[i] = estimates[n_terms + i].mean;
    report.partial_sum_errors[i] = estimates[n_terms + i].std_error;
  }
  return report;
}

}  // namespace dosreg
