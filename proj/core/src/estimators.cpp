#include "dosreg/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dosreg/parallel.hpp"

namespace dosreg {
namespace {

void check_mc(const McConfig& mc) { require(mc.n_samples >= 1, "McConfig: n_samples must be >= 1"); }

void check_volume(const ModelSpec& model, std::size_t n_sites) {
  require(n_sites >= 1 && n_sites <= model.n_sites(),
          "volume must contain between 1 and " + std::to_string(model.n_sites()) + " sites");
}

void check_disorder_covers(const DisorderField& disorder, std::size_t n_sites) {
  require(disorder.uniform() || disorder.explicit_sites() >= n_sites,
          "disorder field defines fewer sites than the volume");
}

std::vector<double> draw_omega(const DisorderField& disorder, Rng& rng, std::size_t n) {
  std::vector<double> omega(n);
  disorder.draw(rng, omega);
  return omega;
}

std::vector<double> mirrored(std::span<const double> omega) {
  std::vector<double> out(omega.size());
  std::transform(omega.begin(), omega.end(), out.begin(), [](double w) { return 1.0 - w; });
  return out;
}

cplx trace_at(const ModelSpec& model, std::span<const double> omega, std::size_t n_sites,
              const ComplexShift& z) {
  const Hamiltonian h = assemble_operator(model, omega.first(n_sites), n_sites);
  return ResolventSolver(h, z).block_trace(model.block(0));
}

// Runs f on omega (and on 1 - omega when paired) and writes
// scale * mean of f * score weight into out.
template <class Integrand>
void score_sample(const DisorderField& disorder, Rng& rng, std::size_t weight_sites, int ell,
                  bool antithetic, double scale, std::span<cplx> out, Integrand&& f) {
  const std::vector<double> omega = draw_omega(disorder, rng, weight_sites);
  const bool paired = antithetic && ell >= 1;
  std::vector<cplx> values(out.size());
  f(std::span<const double>(omega), std::span<cplx>(values));
  const double w = score_weight(disorder, omega, ell);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = values[c] * w;
  if (paired) {
    const std::vector<double> mirror = mirrored(omega);
    f(std::span<const double>(mirror), std::span<cplx>(values));
    const double wm = score_weight(disorder, mirror, ell);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = 0.5 * (out[c] + values[c] * wm);
  }
  for (auto& v : out) v *= scale;
}

Estimate scaled(Estimate e, double factor) {
  e.mean *= factor;
  e.std_error *= std::abs(factor);
  e.std_error_re *= std::abs(factor);
  e.std_error_im *= std::abs(factor);
  return e;
}

}  // namespace

std::vector<Estimate> monte_carlo(
    const McConfig& mc, std::size_t width,
    const std::function<void(Rng&, std::span<cplx>)>& per_sample) {
  check_mc(mc);
  require(width >= 1, "monte_carlo: width must be >= 1");
  const std::size_t n = mc.n_samples;
  std::vector<cplx> values(n * width);
  parallel_for(n, mc.workers, [&](std::size_t i) {
    Rng rng = sample_rng(mc.master_seed, i);
    per_sample(rng, std::span<cplx>(values.data() + i * width, width));
  });
  std::vector<Estimate> out;
  out.reserve(width);
  std::vector<cplx> column(n);
  for (std::size_t c = 0; c < width; ++c) {
    for (std::size_t i = 0; i < n; ++i) column[i] = values[i * width + c];
    out.push_back(summarize(std::span<const cplx>(column), mc.master_seed));
  }
  return out;
}

// --- fractional moments ---------------------------------------------------------

std::vector<Estimate> estimate_fractional_moment_profile(
    const ModelSpec& model, const DisorderField& disorder, std::size_t n_sites,
    const ComplexShift& z, std::size_t source, std::span<const std::size_t> targets,
    double s, const McConfig& mc) {
  check_volume(model, n_sites);
  check_disorder_covers(disorder, n_sites);
  require(s > 0.0 && s < 1.0, "fractional moment exponent s must lie in (0, 1)");
  require(source < n_sites, "source site outside the volume");
  require(!targets.empty(), "need at least one target site");
  for (std::size_t t : targets) require(t < n_sites, "target site outside the volume");

  const Block src = model.block(source);
  return monte_carlo(mc, targets.size(), [&](Rng& rng, std::span<cplx> out) {
    const std::vector<double> omega = draw_omega(disorder, rng, n_sites);
    const Hamiltonian h = assemble_operator(model, omega, n_sites);
    const ResolventSolver solver(h, z);
    MatrixC cols(static_cast<Eigen::Index>(h.size()), static_cast<Eigen::Index>(src.rank));
    for (std::size_t c = 0; c < src.rank; ++c) {
      cols.col(static_cast<Eigen::Index>(c)) = solver.column(src.offset + c);
    }
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const Block tgt = model.block(targets[k]);
      const MatrixC block = cols.middleRows(static_cast<Eigen::Index>(tgt.offset),
                                            static_cast<Eigen::Index>(tgt.rank));
      out[k] = std::pow(spectral_norm(block), s);
    }
  });
}

Estimate estimate_fractional_moment(const ModelSpec& model, const DisorderField& disorder,
                                    std::size_t n_sites, const ComplexShift& z,
                                    std::size_t source, std::size_t target, double s,
                                    const McConfig& mc) {
  const std::size_t targets[] = {target};
  return estimate_fractional_moment_profile(model, disorder, n_sites, z, source, targets, s, mc)
      .front();
}

DecayFit fit_decay(std::span<const DecayPoint> points, DecayWindow window) {
  std::vector<double> xs;
  std::vector<double> ys;
  bool any_nonzero = false;
  for (const auto& p : points) {
    const double mag = std::abs(p.estimate.mean);
    if (mag != 0.0) any_nonzero = true;
    if (p.distance <= 0.0 || p.distance < window.d_min || p.distance > window.d_max) continue;
    if (mag == 0.0 || mag <= 2.0 * p.estimate.std_error) continue;
    xs.push_back(p.distance);
    ys.push_back(std::log(mag));
  }
  if (!points.empty() && !any_nonzero) {
    throw ValidationError("fit_decay: every mean is exactly zero (exact decoupling)");
  }
  if (xs.size() < 3) {
    throw ValidationError("fit_decay: need at least 3 usable points, got " +
                          std::to_string(xs.size()));
  }
  const double n = static_cast<double>(xs.size());
  const double mx = pairwise_sum(xs) / n;
  const double my = pairwise_sum(ys) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  require(sxx > 0.0, "fit_decay: all usable points share one distance");
  const double slope = sxy / sxx;
  DecayFit fit;
  fit.rate = -slope;
  fit.intercept = my - slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + slope * xs[i]);
    ss_res += r * r;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  fit.d_min = *std::min_element(xs.begin(), xs.end());
  fit.d_max = *std::max_element(xs.begin(), xs.end());
  fit.n_points = xs.size();
  return fit;
}

// --- IDS and DOS --------------------------------------------------------------

std::vector<IdsEstimate> estimate_ids_curve(const ModelSpec& model,
                                            const DisorderField& disorder,
                                            std::size_t n_sites,
                                            std::span<const double> energies,
                                            const McConfig& mc) {
  check_volume(model, n_sites);
  check_disorder_covers(disorder, n_sites);
  require(!energies.empty(), "energy grid is empty");
  for (double e : energies) require(std::isfinite(e), "energies must be finite");
  const Block p0 = model.block(0);
  const auto traces = monte_carlo(mc, energies.size(), [&](Rng& rng, std::span<cplx> out) {
    const std::vector<double> omega = draw_omega(disorder, rng, n_sites);
    const Eigensystem eig(assemble_hamiltonian(model, omega, n_sites));
    for (std::size_t k = 0; k < energies.size(); ++k) out[k] = eig.projector_trace(p0, energies[k]);
  });
  std::vector<IdsEstimate> out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back({t, scaled(t, 1.0 / static_cast<double>(p0.rank))});
  return out;
}

IdsEstimate estimate_ids(const ModelSpec& model, const DisorderField& disorder,
                         std::size_t n_sites, double energy, const McConfig& mc) {
  const double energies[] = {energy};
  return estimate_ids_curve(model, disorder, n_sites, energies, mc).front();
}

std::vector<Estimate> estimate_smoothed_dos_curve(const ModelSpec& model,
                                                  const DisorderField& disorder,
                                                  std::size_t n_sites,
                                                  std::span<const double> energies, double eps,
                                                  const McConfig& mc) {
  check_volume(model, n_sites);
  check_disorder_covers(disorder, n_sites);
  require(!energies.empty(), "energy grid is empty");
  std::vector<ComplexShift> shifts;
  for (double e : energies) shifts.emplace_back(e, eps);
  return monte_carlo(mc, energies.size(), [&](Rng& rng, std::span<cplx> out) {
    const std::vector<double> omega = draw_omega(disorder, rng, n_sites);
    const Hamiltonian h = assemble_operator(model, omega, n_sites);
    for (std::size_t k = 0; k < shifts.size(); ++k) {
      out[k] = ResolventSolver(h, shifts[k]).block_trace(model.block(0)).imag() / std::numbers::pi;
    }
  });
}

Estimate estimate_smoothed_dos(const ModelSpec& model, const DisorderField& disorder,
                               std::size_t n_sites, const ComplexShift& z, const McConfig& mc) {
  const double energies[] = {z.energy()};
  return estimate_smoothed_dos_curve(model, disorder, n_sites, energies, z.eps(), mc).front();
}

Estimate estimate_resolvent_trace(const ModelSpec& model, const DisorderField& disorder,
                                  std::size_t n_sites, const ComplexShift& z,
                                  const McConfig& mc) {
  check_volume(model, n_sites);
  check_disorder_covers(disorder, n_sites);
  return monte_carlo(mc, 1, [&](Rng& rng, std::span<cplx> out) {
           const std::vector<double> omega = draw_omega(disorder, rng, n_sites);
           out[0] = trace_at(model, omega, n_sites, z);
         })
      .front();
}

// --- DOS derivatives -------------------------------------------------------------

double score_weight(const DisorderField& disorder, std::span<const double> omega, int ell) {
  if (ell == 0) return 1.0;
  double s1 = 0.0;
  double correction = 0.0;
  for (std::size_t n = 0; n < omega.size(); ++n) {
    const auto& rho = disorder.at(n);
    const double a = rho.score(omega[n]);
    s1 += a;
    if (ell == 2) correction += rho.score_curvature(omega[n]) - a * a;
  }
  if (ell == 1) return s1;
  if (ell == 2) return s1 * s1 + correction;
  throw ValidationError("score_weight: order must be 0, 1 or 2");
}

void validate_derivative_order(const DisorderField& disorder, std::size_t n_sites, int ell) {
  require(ell >= 0, "derivative order ell must be >= 0");
  require(ell <= 2, "score estimator supports ell <= 2; higher orders need the tilted path");
  check_disorder_covers(disorder, n_sites);
  const std::size_t checked = disorder.uniform() ? 1 : n_sites;
  for (std::size_t n = 0; n < checked; ++n) {
    const auto& rho = disorder.at(n);
    if (ell > rho.smoothness()) {
      throw ValidationError("derivative order ell=" + std::to_string(ell) +
                            " exceeds density smoothness m=" + std::to_string(rho.smoothness()));
    }
    if (ell >= 1 && rho.order() < 2) {
      throw ValidationError("score estimator needs p >= 2 for ell >= 1 (infinite variance)");
    }
    if (ell == 2 && rho.order() < 4) {
      throw ValidationError("score estimator needs p >= 4 for ell = 2 (infinite variance)");
    }
  }
}

std::vector<Estimate> estimate_dos_derivative_curve(const ModelSpec& model,
                                                    const DisorderField& disorder,
                                                    std::size_t n_sites,
                                                    std::span<const double> energies,
                                                    double eps, int ell, const McConfig& mc) {
  check_volume(model, n_sites);
  validate_derivative_order(disorder, n_sites, ell);
  require(!energies.empty(), "energy grid is empty");
  std::vector<ComplexShift> shifts;
  for (double e : energies) shifts.emplace_back(e, eps);
  // Shifting E by delta equals shifting every omega_n by -delta / lambda.
  const double scale = std::pow(model.coupling, -ell);
  return monte_carlo(mc, energies.size(), [&](Rng& rng, std::span<cplx> out) {
    score_sample(disorder, rng, n_sites, ell, mc.antithetic, scale, out,
                 [&](std::span<const double> omega, std::span<cplx> values) {
                   const Hamiltonian h = assemble_operator(model, omega, n_sites);
                   for (std::size_t k = 0; k < shifts.size(); ++k) {
                     values[k] = ResolventSolver(h, shifts[k]).block_trace(model.block(0));
                   }
                 });
  });
}

Estimate estimate_dos_derivative(const ModelSpec& model, const DisorderField& disorder,
                                 std::size_t n_sites, const ComplexShift& z, int ell,
                                 const McConfig& mc) {
  return estimate_dos_derivative_weighted(model, disorder, n_sites, n_sites, z, ell, mc);
}

Estimate estimate_dos_derivative_weighted(const ModelSpec& model, const DisorderField& disorder,
                                          std::size_t n_sites, std::size_t weight_sites,
                                          const ComplexShift& z, int ell, const McConfig& mc) {
  check_volume(model, n_sites);
  require(weight_sites >= n_sites, "weight volume must contain the integrand volume");
  validate_derivative_order(disorder, weight_sites, ell);
  const double scale = std::pow(model.coupling, -ell);
  return monte_carlo(mc, 1, [&](Rng& rng, std::span<cplx> out) {
           score_sample(disorder, rng, weight_sites, ell, mc.antithetic, scale, out,
                        [&](std::span<const double> omega, std::span<cplx> values) {
                          values[0] = trace_at(model, omega, n_sites, z);
                        });
         })
      .front();
}

Estimate estimate_dos_derivative_tilted(const ModelSpec& model, const DisorderField& disorder,
                                        std::size_t n_sites, const ComplexShift& z, int ell,
                                        const McConfig& mc, bool experimental) {
  check_volume(model, n_sites);
  check_disorder_covers(disorder, n_sites);
  check_mc(mc);
  require(ell >= 0, "derivative order ell must be >= 0");
  require(ell <= 2 || experimental, "tilted estimator: ell >= 3 requires the experimental flag");
  if (ell == 0) return estimate_resolvent_trace(model, disorder, n_sites, z, mc);
  for (std::size_t n = 0; n < (disorder.uniform() ? 1 : n_sites); ++n) {
    require(ell <= disorder.at(n).smoothness(),
            "derivative order ell exceeds density smoothness m");
  }

  // All multi-indices k with |k| = ell over the volume, lexicographic.
  std::vector<std::vector<int>> indices;
  std::vector<int> k(n_sites, 0);
  std::function<void(std::size_t, int)> enumerate = [&](std::size_t site, int left) {
    if (site + 1 == n_sites) {
      k[site] = left;
      indices.push_back(k);
      return;
    }
    for (int v = left; v >= 0; --v) {
      k[site] = v;
      enumerate(site + 1, left - v);
    }
  };
  enumerate(0, ell);
  require(indices.size() <= 4096, "tilted estimator: too many multi-indices for this volume");

  double factorial_ell = 1.0;
  for (int i = 2; i <= ell; ++i) factorial_ell *= i;
  const double scale = std::pow(model.coupling, -ell);

  Estimate total;
  total.seed = mc.master_seed;
  total.n_samples = mc.n_samples;
  double var_re = 0.0;
  double var_im = 0.0;
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const auto& multi = indices[j];
    double coefficient = scale * factorial_ell;
    for (std::size_t n = 0; n < n_sites; ++n) {
      for (int i = 2; i <= multi[n]; ++i) coefficient /= i;
      coefficient *= disorder.at(n).l1_norm(multi[n]);
    }
    McConfig term_mc = mc;
    term_mc.master_seed = mix_seed(mc.master_seed, j);
    const Estimate term = monte_carlo(term_mc, 1, [&](Rng& rng, std::span<cplx> out) {
                            std::vector<double> omega(n_sites);
                            double sign = 1.0;
                            for (std::size_t n = 0; n < n_sites; ++n) {
                              if (multi[n] == 0) {
                                omega[n] = disorder.at(n).sample(rng);
                              } else {
                                const TiltedDraw d = disorder.at(n).sample_tilted(multi[n], rng);
                                omega[n] = d.value;
                                sign *= d.sign;
                              }
                            }
                            out[0] = sign * trace_at(model, omega, n_sites, z);
                          }).front();
    total.mean += coefficient * term.mean;
    var_re += coefficient * coefficient * term.std_error_re * term.std_error_re;
    var_im += coefficient * coefficient * term.std_error_im * term.std_error_im;
  }
  total.std_error_re = std::sqrt(var_re);
  total.std_error_im = std::sqrt(var_im);
  total.std_error = std::sqrt(var_re + var_im);
  return total;
}

}  // namespace dosreg
