#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "dosreg/estimators.hpp"
#include "oracles.hpp"

using namespace dosreg;

namespace {

McConfig mc_of(std::size_t n, std::uint64_t seed, unsigned workers = 1) {
  McConfig mc;
  mc.n_samples = n;
  mc.master_seed = seed;
  mc.workers = workers;
  return mc;
}

bool same(const Estimate& a, const Estimate& b) {
  return a.mean == b.mean && a.std_error == b.std_error && a.n_samples == b.n_samples;
}

}  // namespace

TEST_CASE("pairwise summation and summaries") {
  std::vector<double> ones(1000, 0.1);
  CHECK(pairwise_sum(ones) == doctest::Approx(100.0).epsilon(1e-15));
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  const Estimate e = summarize(xs, 5);
  CHECK(e.real() == 2.5);
  CHECK(e.std_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(e.seed == 5);
  CHECK(e.n_samples == 4);
}

TEST_CASE("fractional moments on a decoupled model") {
  const auto model = make_box_model(1, 3, 0.0, 1.0);
  const DisorderField disorder(SingleSiteDensity(3));
  const ComplexShift z(0.4, 0.1);
  const double s = 1.0 / 3.0;
  const Estimate off = estimate_fractional_moment(model, disorder, 7, z, 0, 2, s, mc_of(500, 1));
  CHECK(off.real() == 0.0);
  CHECK(off.std_error == 0.0);

  const Estimate on = estimate_fractional_moment(model, disorder, 7, z, 0, 0, s, mc_of(20000, 2));
  const double ref = oracle::simpson(
      [&](double x) { return std::pow(std::abs(cplx(x, 0.0) - z.z()), -s) * oracle::bump(3, 0, x); }, 0.0, 1.0,
      1e-12);
  CHECK(std::abs(on.real() - ref) <= 4.0 * on.std_error);
  CHECK(on.real() <= std::pow(z.eps(), -s) + 4.0 * on.std_error);

  CHECK_THROWS_AS(estimate_fractional_moment(model, disorder, 7, z, 0, 0, 1.5, mc_of(10, 1)), ValidationError);
  CHECK_THROWS_AS(estimate_fractional_moment(model, disorder, 7, z, 0, 9, s, mc_of(10, 1)), ValidationError);
}

TEST_CASE("diagonal fractional moment decreases with disorder strength") {
  const DisorderField disorder(SingleSiteDensity(3));
  const ComplexShift z(0.5, 0.1);
  double previous = 1e300;
  for (double lambda : {1.0, 4.0, 16.0}) {
    const auto model = make_box_model(1, 4, 1.0, lambda);
    const Estimate e = estimate_fractional_moment(model, disorder, 9, z, 0, 0, 1.0 / 3.0, mc_of(3000, 7));
    CHECK(e.real() < previous);
    previous = e.real();
  }
}

TEST_CASE("fractional moments decay along a strongly disordered chain") {
  const auto model = make_box_model(1, 20, 1.0, 10.0);
  const DisorderField disorder(SingleSiteDensity(3));
  std::vector<std::size_t> targets;
  for (int d = 1; d <= 15; ++d) targets.push_back(*model.space.site_at_distance(0, d));
  const auto est = estimate_fractional_moment_profile(model, disorder, model.n_sites(), ComplexShift(5.0, 0.1), 0,
                                                      targets, 1.0 / 3.0, mc_of(400, 3));
  for (std::size_t i = 2; i < est.size(); ++i) CHECK(est[i].real() < est[i - 2].real());
}

TEST_CASE("decay fits") {
  std::vector<DecayPoint> pts;
  for (int d = 0; d <= 10; ++d) {
    Estimate e;
    e.mean = std::exp(-2.0 * d);
    pts.push_back({static_cast<double>(d), e});
  }
  const DecayFit exact = fit_decay(pts);
  CHECK(exact.rate == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(exact.r_squared == doctest::Approx(1.0));
  CHECK(exact.d_min == 1.0);

  for (auto& p : pts) p.estimate.mean = 3.0;
  CHECK(fit_decay(pts).rate == doctest::Approx(0.0).scale(1.0));

  Rng rng(12);
  for (auto& p : pts) p.estimate.mean = std::exp(-1.5 * p.distance) * (1.0 + 0.01 * (2.0 * rng.uniform01() - 1.0));
  const DecayFit noisy = fit_decay(pts);
  CHECK(noisy.rate >= 1.4);
  CHECK(noisy.rate <= 1.6);

  for (auto& p : pts) p.estimate.mean = 0.0;
  CHECK_THROWS_WITH_AS(fit_decay(pts), doctest::Contains("decoupling"), ValidationError);
  pts.resize(3);
  pts[1].estimate.mean = 1.0;
  pts[2].estimate.mean = 0.5;
  CHECK_THROWS_AS(fit_decay(pts), ValidationError);
}

TEST_CASE("points indistinguishable from zero are excluded from the fit") {
  std::vector<DecayPoint> pts;
  for (int d = 1; d <= 6; ++d) {
    Estimate e;
    e.mean = std::exp(-1.0 * d);
    e.std_error = d >= 5 ? 1.0 : 1e-6;
    pts.push_back({static_cast<double>(d), e});
  }
  const DecayFit fit = fit_decay(pts);
  CHECK(fit.n_points == 4);
  CHECK(fit.d_max == 4.0);
}

TEST_CASE("integrated density of states") {
  const auto model = make_box_model(1, 2, 0.0, 1.0);
  const DisorderField disorder(SingleSiteDensity(3));
  const std::vector<double> energies{-0.5, 0.2, 0.5, 0.7, 2.0};
  const auto ids = estimate_ids_curve(model, disorder, 1, energies, mc_of(20000, 9));
  const SingleSiteDensity rho(3);
  for (std::size_t i = 0; i < energies.size(); ++i) {
    CHECK(std::abs(ids[i].trace.real() - rho.cdf(energies[i])) <= 4.0 * ids[i].trace.std_error + 1e-15);
  }
  CHECK(ids.back().trace.real() == 1.0);
  CHECK(ids.back().trace.std_error == 0.0);

  const auto chain = make_box_model(1, 4, 1.0, 2.0, 2);
  const std::vector<double> grid{-3.0, -1.0, 0.0, 1.0, 2.0, 3.0, 10.0};
  const auto curve = estimate_ids_curve(chain, disorder, 9, grid, mc_of(300, 4));
  for (std::size_t i = 1; i < curve.size(); ++i) {
    CHECK(curve[i - 1].trace.real() <=
          curve[i].trace.real() + 4.0 * (curve[i - 1].trace.std_error + curve[i].trace.std_error));
  }
  CHECK(curve.back().trace.real() == 2.0);
  CHECK(curve.back().normalized.real() == 1.0);
  const IdsEstimate single = estimate_ids(chain, disorder, 9, 1.0, mc_of(300, 4));
  CHECK(same(single.trace, curve[3].trace));
}

TEST_CASE("smoothed DOS matches the Poisson-smoothed density") {
  const auto model = make_box_model(1, 2, 0.0, 1.0);
  const DisorderField disorder(SingleSiteDensity(3));
  const std::vector<double> energies{-0.2, 0.1, 0.5, 0.9, 1.3};
  for (double eps : {0.2, 0.05}) {
    const auto dos = estimate_smoothed_dos_curve(model, disorder, 1, energies, eps, mc_of(20000, 10));
    for (std::size_t i = 0; i < energies.size(); ++i) {
      const double ref = oracle::poisson_smoothed(3, 1.0, energies[i], eps);
      CHECK(std::abs(dos[i].real() - ref) <= 4.0 * dos[i].std_error);
      CHECK(dos[i].real() > 0.0);
    }
  }
}

TEST_CASE("smoothed DOS integrates to tr(P0)") {
  const auto model = make_box_model(1, 3, 1.0, 1.0, 2);
  const DisorderField disorder(SingleSiteDensity(2));
  std::vector<double> grid;
  const double de = 0.05;
  for (double e = -400.0; e <= 400.0; e += de) grid.push_back(e);
  const auto dos = estimate_smoothed_dos_curve(model, disorder, 7, grid, 0.2, mc_of(5, 1));
  double mass = 0.0;
  for (const auto& e : dos) mass += e.real() * de;
  CHECK(mass == doctest::Approx(2.0).epsilon(2e-3));
}

TEST_CASE("zero-order derivative is the resolvent trace") {
  const auto model = make_box_model(1, 5, 1.0, 2.0);
  const DisorderField disorder(SingleSiteDensity(3));
  const ComplexShift z(0.7, 0.2);
  const auto mc = mc_of(500, 13);
  const Estimate d0 = estimate_dos_derivative(model, disorder, 11, z, 0, mc);
  const Estimate tr = estimate_resolvent_trace(model, disorder, 11, z, mc);
  CHECK(same(d0, tr));
  const Estimate dos = estimate_smoothed_dos(model, disorder, 11, z, mc);
  CHECK(dos.real() == doctest::Approx(tr.imag() / std::numbers::pi).epsilon(1e-14));
}

TEST_CASE("score estimator agrees with the resolvent-square oracle") {
  const auto model = make_box_model(1, 6, 1.0, 2.0);
  const DisorderField disorder(SingleSiteDensity(3));
  const std::size_t n_sites = model.n_sites();
  const auto mc = mc_of(6000, 21);
  for (double e : {0.0, 1.0, 2.5}) {
    const ComplexShift z(e, 0.3);
    const Estimate score = estimate_dos_derivative(model, disorder, n_sites, z, 1, mc);
    const auto oracle_values = monte_carlo(mc, 1, [&](Rng& rng, std::span<cplx> out) {
      std::vector<double> omega(n_sites);
      disorder.draw(rng, omega);
      std::vector<double> mirror(n_sites);
      for (std::size_t i = 0; i < n_sites; ++i) mirror[i] = 1.0 - omega[i];
      const auto h = assemble_hamiltonian(model, omega, n_sites);
      const auto hm = assemble_hamiltonian(model, mirror, n_sites);
      const MatrixC g = oracle::dense_resolvent(h, z.z());
      const MatrixC gm = oracle::dense_resolvent(hm, z.z());
      out[0] = 0.5 * ((g * g)(0, 0) + (gm * gm)(0, 0));
    });
    const Estimate& ref = oracle_values[0];
    CHECK(std::abs(score.mean - ref.mean) <= 4.0 * combined_error(score, ref));
  }
}

TEST_CASE("score estimator reproduces derivatives of the smoothed density") {
  const auto model = make_box_model(1, 2, 0.0, 1.0);
  const DisorderField disorder(SingleSiteDensity(4));
  for (double e : {0.2, 0.5, 0.8}) {
    const ComplexShift z(e, 0.2);
    const Estimate d1 = estimate_dos_derivative(model, disorder, 1, z, 1, mc_of(40000, 5));
    const double ref1 = oracle::poisson_smoothed(4, 1.0, e, 0.2, 1);
    CHECK(std::abs(d1.imag() / std::numbers::pi - ref1) <= 4.0 * d1.std_error_im / std::numbers::pi + 1e-10);
    const Estimate d2 = estimate_dos_derivative(model, disorder, 1, z, 2, mc_of(40000, 6));
    const double ref2 = oracle::poisson_smoothed(4, 1.0, e, 0.2, 2);
    CHECK(std::abs(d2.imag() / std::numbers::pi - ref2) <= 4.0 * d2.std_error_im / std::numbers::pi + 1e-10);
  }
}

TEST_CASE("derivative order validation") {
  const auto model = make_box_model(1, 2, 1.0, 1.0);
  const ComplexShift z(0.5, 0.2);
  CHECK_THROWS_AS(estimate_dos_derivative(model, DisorderField(SingleSiteDensity(1)), 3, z, 1, mc_of(10, 1)),
                  ValidationError);
  CHECK_THROWS_AS(estimate_dos_derivative(model, DisorderField(SingleSiteDensity(3)), 3, z, 2, mc_of(10, 1)),
                  ValidationError);
  CHECK_THROWS_AS(estimate_dos_derivative(model, DisorderField(SingleSiteDensity(5)), 3, z, 3, mc_of(10, 1)),
                  ValidationError);
  CHECK_NOTHROW(estimate_dos_derivative(model, DisorderField(SingleSiteDensity(4)), 3, z, 2, mc_of(10, 1)));
}

TEST_CASE("extra score coordinates leave the expectation unchanged") {
  const auto model = make_box_model(1, 6, 1.0, 2.0);
  const DisorderField disorder(SingleSiteDensity(3));
  const ComplexShift z(1.0, 0.25);
  const auto mc = mc_of(8000, 31);
  const Estimate k = estimate_dos_derivative_weighted(model, disorder, 6, 6, z, 1, mc);
  const Estimate k1 = estimate_dos_derivative_weighted(model, disorder, 6, 7, z, 1, mc);
  CHECK(std::abs(k.mean - k1.mean) <= 4.0 * combined_error(k, k1));
  CHECK(same(k, estimate_dos_derivative(model, disorder, 6, z, 1, mc)));
  CHECK_THROWS_AS(estimate_dos_derivative_weighted(model, disorder, 6, 5, z, 1, mc), ValidationError);
}

TEST_CASE("tilted expansion agrees with the score form") {
  const auto model = make_box_model(1, 2, 1.0, 2.0);
  const DisorderField disorder(SingleSiteDensity(3));
  const ComplexShift z(1.0, 0.3);
  const Estimate score = estimate_dos_derivative(model, disorder, 4, z, 1, mc_of(20000, 41));
  const Estimate tilted = estimate_dos_derivative_tilted(model, disorder, 4, z, 1, mc_of(20000, 42));
  CHECK(std::abs(score.mean - tilted.mean) <= 4.0 * combined_error(score, tilted));
  CHECK_THROWS_AS(estimate_dos_derivative_tilted(model, DisorderField(SingleSiteDensity(5)), 4, z, 3, mc_of(10, 1)),
                  ValidationError);
  CHECK_NOTHROW(
      estimate_dos_derivative_tilted(model, DisorderField(SingleSiteDensity(5)), 4, z, 3, mc_of(10, 1), true));
}

TEST_CASE("estimates are identical for any worker count") {
  const auto model = make_box_model(1, 8, 1.0, 2.0);
  const DisorderField disorder(SingleSiteDensity(3));
  const std::vector<double> energies{0.0, 1.0};
  const auto a = estimate_dos_derivative_curve(model, disorder, 17, energies, 0.2, 1, mc_of(257, 77, 1));
  const auto b = estimate_dos_derivative_curve(model, disorder, 17, energies, 0.2, 1, mc_of(257, 77, 8));
  const auto c = estimate_dos_derivative_curve(model, disorder, 17, energies, 0.2, 1, mc_of(257, 77, 3));
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(same(a[i], b[i]));
    CHECK(same(a[i], c[i]));
  }
  const auto other = estimate_dos_derivative_curve(model, disorder, 17, energies, 0.2, 1, mc_of(257, 78, 1));
  CHECK_FALSE(same(a[0], other[0]));
}

TEST_CASE("telescoping terms vanish when the new site is decoupled") {
  auto model = make_box_model(1, 6, 1.0, 2.0);
  const std::size_t k = 4;
  for (std::size_t n = 0; n <= k; ++n) {
    if (model.space.distance(n, k + 1) == 1) model.free.decouple_sites(model.projections, n, k + 1);
  }
  const DisorderField disorder(SingleSiteDensity(3));
  const Estimate t = telescoping_term(model, disorder, k, ComplexShift(0.5, 0.2), 1, mc_of(200, 3));
  CHECK(t.mean == cplx{});
  CHECK(t.std_error == 0.0);

  auto chain = make_box_model(1, 3, 0.0, 2.0);
  const auto report =
      telescope_series_diagnostic(chain, disorder, 1, 4, ComplexShift(0.5, 0.2), 0, mc_of(50, 3));
  CHECK(report.all_terms_zero);
  CHECK(report.summability_supported);
  CHECK_FALSE(report.fit.has_value());
}

TEST_CASE("series diagnosis recovers an injected decay rate") {
  std::vector<TelescopeTerm> terms;
  for (std::size_t k = 4; k <= 20; ++k) {
    Estimate e;
    e.mean = 3.0 * std::exp(-0.8 * static_cast<double>(k));
    e.std_error = 1e-3 * std::abs(e.mean);
    terms.push_back({k, e});
  }
  const TelescopeReport report = diagnose_series(terms);
  REQUIRE(report.fit.has_value());
  CHECK(report.fit->rate == doctest::Approx(0.8).epsilon(0.05));
  REQUIRE(report.slope.has_value());
  CHECK(*report.slope < 0.0);
  CHECK(report.summability_supported);
  CHECK(report.partial_sums.size() == terms.size());
}

TEST_CASE("telescoping sum reproduces the larger-volume estimate") {
  const auto model = make_box_model(1, 6, 1.0, 4.0);
  const DisorderField disorder(SingleSiteDensity(3));
  const ComplexShift z(2.0, 0.2);
  const auto mc = mc_of(2000, 55);
  const TelescopeReport report = telescope_series_diagnostic(model, disorder, 2, 8, z, 0, mc);
  const Estimate base = estimate_resolvent_trace(model, disorder, 3, z, mc);
  const Estimate direct = estimate_resolvent_trace(model, disorder, 10, z, mc);
  const cplx total = report.partial_sums.back() + base.mean;
  const double err = std::hypot(std::hypot(report.partial_sum_errors.back(), base.std_error), direct.std_error);
  CHECK(std::abs(total - direct.mean) <= 4.0 * err);

  const Estimate single = telescoping_term(model, disorder, 5, z, 0, mc);
  CHECK(std::abs(single.mean - report.terms[3].estimate.mean) <= 1e-12);
}
