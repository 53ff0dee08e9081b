#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "dosreg/graph_model.hpp"
#include "dosreg/lemma_verify.hpp"
#include "dosreg/quadrature.hpp"
#include "dosreg/spectral.hpp"
#include "oracles.hpp"

using namespace dosreg;

namespace {

MatrixC hermitian(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return random_hermitian(n, rng);
}

}  // namespace

TEST_CASE("complex shift requires eps > 0") {
  CHECK_THROWS_AS(ComplexShift(0.0, 0.0), ValidationError);
  CHECK_THROWS_AS(ComplexShift(0.0, -1.0), ValidationError);
  CHECK(ComplexShift(0.5, 0.1).z() == cplx(0.5, 0.1));
}

TEST_CASE("scalar and diagonal resolvents") {
  const ComplexShift z(0.3, 0.1);
  MatrixC one(1, 1);
  one(0, 0) = 2.0;
  const Hamiltonian h1(one);
  const std::vector<std::size_t> cols{0};
  CHECK(std::abs(resolvent_columns(h1, z, cols)(0, 0) - 1.0 / (2.0 - z.z())) < 1e-15);
  CHECK(kernel_block_norm(h1, z, {0, 1}, {0, 1}) == doctest::Approx(1.0 / std::abs(2.0 - z.z())));

  MatrixC diag = MatrixC::Zero(4, 4);
  for (int i = 0; i < 4; ++i) diag(i, i) = 0.5 * i;
  const Hamiltonian h(diag);
  const std::vector<std::size_t> all{0, 1, 2, 3};
  const MatrixC g = resolvent_columns(h, z, all);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const cplx expected = i == j ? 1.0 / (0.5 * i - z.z()) : cplx{};
      CHECK(std::abs(g(i, j) - expected) < 1e-15);
    }
  }
  CHECK(kernel_block_norm(h, z, {0, 1}, {2, 1}) == 0.0);
}

TEST_CASE("random Hermitian resolvent matches dense inverse") {
  const MatrixC a = hermitian(8, 4);
  const ComplexShift z(0.3, 0.1);
  const Hamiltonian h(a);
  const std::vector<std::size_t> all{0, 1, 2, 3, 4, 5, 6, 7};
  const MatrixC g = resolvent_columns(h, z, all);
  const MatrixC ref = oracle::dense_resolvent(a, z.z());
  CHECK((g - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("banded solve matches dense inverse") {
  const auto model = make_box_model(1, 30, 1.0, 2.0, 2);
  std::vector<double> omega(model.n_sites());
  Rng rng(8);
  for (auto& w : omega) w = rng.uniform01();
  const Hamiltonian h = assemble_operator(model, omega, model.n_sites());
  REQUIRE(h.is_banded());
  const ComplexShift z(1.1, 0.05);
  const ResolventSolver solver(h, z);
  const MatrixC ref = oracle::dense_resolvent(h.dense(), z.z());
  for (std::size_t j : {0u, 7u, 60u, 121u}) {
    CHECK((solver.column(j) - ref.col(static_cast<Eigen::Index>(j))).cwiseAbs().maxCoeff() < 1e-12);
  }
  const Block p0 = model.block(0);
  const MatrixC sq = ref * ref;
  CHECK(std::abs(solver.block_trace(p0) - ref.block(0, 0, 2, 2).trace()) < 1e-12);
  CHECK(std::abs(solver.block_trace_squared(p0) - sq.block(0, 0, 2, 2).trace()) < 1e-11);
}

TEST_CASE("resolvent norm bound, symmetry and Herglotz property") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const MatrixC a = hermitian(2 + seed % 6, seed);
    MatrixC real_sym = a.real().cast<cplx>();
    const ComplexShift z(-0.7 + 0.1 * static_cast<double>(seed), 0.02 + 0.01 * static_cast<double>(seed));
    const Hamiltonian h(a);
    const Hamiltonian hs(real_sym);
    const ResolventSolver solver(h, z);
    const Block b{0, 1};
    CHECK(kernel_block_norm(h, z, {0, 2}, {0, 2}) <= 1.0 / z.eps() + 1e-12);
    CHECK(solver.block_trace(b).imag() > 0.0);
    std::vector<std::size_t> all(static_cast<std::size_t>(a.rows()));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const MatrixC g = resolvent_columns(hs, z, all);
    CHECK((g - g.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("first-derivative identity against central differences") {
  const MatrixC a = hermitian(6, 31);
  const Hamiltonian h(a);
  const Block p0{0, 2};
  const double step = 1e-4;
  for (double e : {-1.0, 0.0, 0.8}) {
    const double eps = 0.3;
    const cplx plus = ResolventSolver(h, ComplexShift(e + step, eps)).block_trace(p0);
    const cplx minus = ResolventSolver(h, ComplexShift(e - step, eps)).block_trace(p0);
    const cplx fd = (plus - minus) / (2 * step);
    const cplx exact = ResolventSolver(h, ComplexShift(e, eps)).block_trace_squared(p0);
    CHECK(std::abs(fd - exact) <= 1e-6 * std::abs(exact));
  }
}

TEST_CASE("smoothed density has total mass tr(P0)") {
  const MatrixC a = hermitian(5, 12);
  const Hamiltonian h(a);
  const Block p0{0, 3};
  const double eps = 0.05;
  const double mass = integrate_adaptive(
      [&](double e) { return ResolventSolver(h, ComplexShift(e, eps)).block_trace(p0).imag() / std::numbers::pi; },
      -2000.0, 2000.0, 1e-9, 40, {-10.0, -3.0, 0.0, 3.0, 10.0});
  CHECK(mass == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("spectral projector traces") {
  MatrixC d = MatrixC::Zero(2, 2);
  d(1, 1) = 1.0;
  const Hamiltonian h(d);
  CHECK(spectral_projector_trace(h, {0, 1}, 0.5) == doctest::Approx(1.0));
  CHECK(spectral_projector_trace(h, {0, 1}, 0.0) == doctest::Approx(1.0));
  CHECK(spectral_projector_trace(h, {1, 1}, 0.5) == doctest::Approx(0.0));

  const MatrixC a = hermitian(7, 2);
  const Eigensystem es(a);
  CHECK(es.projector_trace({1, 3}, es.eigenvalues()(0) - 1.0) == 0.0);
  CHECK(es.projector_trace({1, 3}, es.eigenvalues()(6) + 1.0) == 3.0);
  double previous = 0.0;
  for (double e = -5.0; e <= 5.0; e += 0.25) {
    const double v = es.projector_trace({1, 3}, e);
    CHECK(v >= previous - 1e-14);
    previous = v;
  }
}

TEST_CASE("matrix exponentials") {
  MatrixC iid = MatrixC::Identity(3, 3) * cplx(0.0, 1.0);
  CHECK((dissipative_exp(iid, 1.0) - MatrixC::Identity(3, 3) * std::exp(-1.0)).cwiseAbs().maxCoeff() < 1e-14);
  Rng rng(21);
  const MatrixC a = random_dissipative(6, rng);
  CHECK((dissipative_exp(a, 0.0) - MatrixC::Identity(6, 6)).cwiseAbs().maxCoeff() == 0.0);
  for (double t : {0.1, 1.0, 7.5}) {
    const MatrixC u = dissipative_exp(a, t);
    const MatrixC ref = oracle::taylor_expm(cplx(0.0, t) * a);
    CHECK((u - ref).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
    CHECK(oracle::power_norm(u) <= 1.0 + 1e-9);
  }
  const MatrixC m = hermitian(5, 77) * cplx(0.3, 0.8);
  const MatrixC ref = oracle::taylor_expm(m);
  CHECK((pade_expm(m) - ref).cwiseAbs().maxCoeff() < 1e-10 * ref.cwiseAbs().maxCoeff());
  CHECK_THROWS_AS(dissipative_exp(-iid, 1.0), ValidationError);
  CHECK_THROWS_AS(dissipative_exp(a, -1.0), ValidationError);
}

TEST_CASE("spectral norm and imaginary part") {
  const MatrixC a = hermitian(6, 9) + cplx(0.0, 1.0) * hermitian(6, 10);
  CHECK(spectral_norm(a) == doctest::Approx(oracle::power_norm(a, 3000)).epsilon(1e-6));
  Rng rng(3);
  CHECK(min_imaginary_eigenvalue(random_dissipative(4, rng, 0.5)) >= 0.5 - 1e-12);
}
