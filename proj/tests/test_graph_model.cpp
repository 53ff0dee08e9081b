#include <doctest.h>

#include <algorithm>
#include <complex>
#include <span>
#include <vector>

#include "dosreg/graph_model.hpp"
#include "dosreg/rng.hpp"
#include "oracles.hpp"

using namespace dosreg;

namespace {

int first_coordinate(const SiteSpace& space, std::size_t n) { return space.coordinates(n)[0]; }

}  // namespace

TEST_CASE("one-dimensional box enumerates 0, 1, -1, 2, -2") {
  const auto space = SiteSpace::box(1, 2);
  REQUIRE(space.size() == 5);
  std::vector<int> xs;
  for (std::size_t n = 0; n < space.size(); ++n) xs.push_back(first_coordinate(space, n));
  CHECK(xs == std::vector<int>{0, 1, -1, 2, -2});
  for (std::size_t n = 1; n < space.size(); ++n) CHECK(space.distance_to_prefix(n, n) == 1);
  CHECK(space.growth_exponent() == doctest::Approx(1.0));
}

TEST_CASE("two-dimensional box: every new site touches the previous hull") {
  const auto space = SiteSpace::box(2, 3);
  REQUIRE(space.size() == 49);
  CHECK(space.growth_exponent() == doctest::Approx(0.5));
  for (std::size_t n = 1; n < space.size(); ++n) {
    int best = 1 << 20;
    for (std::size_t k = 0; k < n; ++k) {
      best = std::min(best, oracle::linf(space.coordinates(n), space.coordinates(k)));
    }
    CHECK(best == 1);
    CHECK(space.distance_to_prefix(n, n) == best);
  }
  CHECK(space.enumeration_is_connected());
}

TEST_CASE("shells are enumerated in order of l-infinity norm") {
  const auto space = SiteSpace::box(3, 2);
  int previous = 0;
  for (std::size_t n = 0; n < space.size(); ++n) {
    const std::vector<int> origin(3, 0);
    const int r = oracle::linf(space.coordinates(n), origin);
    CHECK(r >= previous);
    previous = r;
    CHECK(space.index_of(space.coordinates(n)) == n);
  }
  CHECK(space.growth_constant() > 0.0);
}

TEST_CASE("box rejects bad shapes") {
  CHECK_THROWS_AS(SiteSpace::box(0, 2), ValidationError);
  CHECK_THROWS_AS(SiteSpace::box(1, -1), ValidationError);
}

TEST_CASE("graph spaces are flagged experimental") {
  const auto tree = SiteSpace::bethe_tree(2, 3);
  CHECK(tree.experimental());
  CHECK(tree.size() == 15);
  CHECK(tree.enumeration_is_connected());
  const std::vector<std::pair<std::size_t, std::size_t>> edges{{0, 1}, {1, 2}, {2, 3}};
  const auto path = SiteSpace::from_edges(4, edges);
  CHECK(path.distance(0, 3) == 3);
  const std::vector<std::pair<std::size_t, std::size_t>> split{{0, 1}, {2, 3}};
  CHECK_THROWS_AS(SiteSpace::from_edges(4, split), ValidationError);
}

TEST_CASE("two-site assembly gives [[a, 1], [1, b]]") {
  const auto model = make_box_model(1, 1, 1.0, 1.0);
  const std::vector<double> omega{0.3, 0.7, 0.5};
  const MatrixC h = assemble_hamiltonian(model, std::span(omega).first(2), 2);
  REQUIRE(h.rows() == 2);
  CHECK(h(0, 0).real() == doctest::Approx(0.3));
  CHECK(h(1, 1).real() == doctest::Approx(0.7));
  CHECK(h(0, 1) == cplx(1.0, 0.0));
  CHECK(h(1, 0) == cplx(1.0, 0.0));
  const auto [lo, hi] = restriction_spectrum_bounds(model, std::vector<double>{0.0, 0.0}, 2);
  CHECK(lo == doctest::Approx(-1.0));
  CHECK(hi == doctest::Approx(1.0));
}

TEST_CASE("assembly validates its inputs") {
  const auto model = make_box_model(1, 2, 1.0, 1.0);
  const std::vector<double> short_omega{0.1, 0.2};
  CHECK_THROWS_AS(assemble_hamiltonian(model, short_omega, 3), ValidationError);
  const std::vector<double> omega(5, 0.5);
  CHECK_THROWS_AS(assemble_hamiltonian(model, omega, 6), ValidationError);
  CHECK_THROWS_AS(make_box_model(1, 2, 1.0, 0.0), ValidationError);
}

TEST_CASE("full volume equals the unrestricted operator") {
  const auto model = make_box_model(2, 2, 1.0, 1.5, 2);
  std::vector<double> omega(model.n_sites());
  for (std::size_t i = 0; i < omega.size(); ++i) omega[i] = 0.05 * static_cast<double>(i % 17);
  const MatrixC h = assemble_hamiltonian(model, omega, model.n_sites());
  MatrixC expected = model.free.dense();
  for (std::size_t n = 0; n < model.n_sites(); ++n) {
    const Block b = model.block(n);
    for (std::size_t r = 0; r < b.rank; ++r) {
      const auto i = static_cast<Eigen::Index>(b.offset + r);
      expected(i, i) += 1.5 * omega[n];
    }
  }
  CHECK((h - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Peierls phases keep the operator exactly Hermitian") {
  const auto model = make_box_model(2, 1, 1.0, 1.0, 1, 0.7);
  std::vector<double> omega(model.n_sites(), 0.25);
  const MatrixC h = assemble_hamiltonian(model, omega, model.n_sites());
  bool complex_entry = false;
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
      CHECK(h(i, j) == std::conj(h(j, i)));
      complex_entry = complex_entry || h(i, j).imag() != 0.0;
    }
  }
  CHECK(complex_entry);
}

TEST_CASE("restriction is the leading principal block of a larger volume") {
  const auto model = make_box_model(2, 2, 1.0, 2.0);
  std::vector<double> omega(model.n_sites());
  for (std::size_t i = 0; i < omega.size(); ++i) omega[i] = 0.03 * static_cast<double>(i);
  const MatrixC big = assemble_hamiltonian(model, std::span(omega).first(20), 20);
  for (std::size_t n : {1u, 5u, 13u}) {
    const MatrixC small = assemble_hamiltonian(model, std::span(omega).first(n), n);
    const auto d = static_cast<Eigen::Index>(model.dimension(n));
    CHECK((big.topLeftCorner(d, d) - small).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("spectra lie in the envelope and the free chain spectrum in [-2, 2]") {
  const auto model = make_box_model(1, 50, 1.0, 3.0);
  const std::vector<double> zero(model.n_sites(), 0.0);
  const auto [lo, hi] = restriction_spectrum_bounds(model, zero, model.n_sites());
  CHECK(lo >= -2.0 - 1e-6);
  CHECK(hi <= 2.0 + 1e-6);

  dosreg::Rng rng(5);
  std::vector<double> omega(model.n_sites());
  for (auto& w : omega) w = rng.uniform01();
  const auto [elo, ehi] = spectrum_envelope(model);
  for (std::size_t n : {3u, 40u, 101u}) {
    const auto [a, b] = restriction_spectrum_bounds(model, std::span(omega).first(n), n);
    CHECK(a >= elo - 1e-12);
    CHECK(b <= ehi + 1e-12);
  }
}

TEST_CASE("decoupled diagonal model has bounds lambda * min/max omega") {
  const auto model = make_box_model(1, 3, 0.0, 2.0);
  const std::vector<double> omega{0.4, 0.1, 0.9, 0.5, 0.3, 0.2, 0.6};
  const auto [lo, hi] = restriction_spectrum_bounds(model, omega, 7);
  CHECK(lo == doctest::Approx(0.2));
  CHECK(hi == doctest::Approx(1.8));
}

TEST_CASE("free operator norm bound dominates the power-iteration norm") {
  const auto model = make_box_model(2, 3, 1.0, 1.0, 1, 0.3);
  const MatrixC h0 = model.free.dense();
  CHECK(oracle::power_norm(h0) <= model.free.norm_bound() + 1e-10);
  CHECK(model.free.range(model.space, model.projections) == 1);
}

TEST_CASE("band storage matches dense assembly") {
  const auto model = make_box_model(1, 20, 1.0, 2.0, 2);
  std::vector<double> omega(model.n_sites());
  for (std::size_t i = 0; i < omega.size(); ++i) omega[i] = 0.02 * static_cast<double>(i);
  const std::span<const double> prefix = std::span(omega).first(30);
  const Hamiltonian h = assemble_operator(model, prefix, 30);
  CHECK(h.is_banded());
  CHECK((h.dense() - assemble_hamiltonian(model, prefix, 30)).cwiseAbs().maxCoeff() == 0.0);

  const auto plane = make_box_model(2, 4, 1.0, 2.0);
  std::vector<double> w(plane.n_sites(), 0.5);
  CHECK_FALSE(assemble_operator(plane, w, plane.n_sites()).is_banded());
}

TEST_CASE("projection family partitions coordinates") {
  const auto family = ProjectionFamily::from_ranks({1, 3, 2});
  CHECK(family.dimension(3) == 6);
  CHECK(family.block(1).offset == 1);
  CHECK(family.block(2).offset == 4);
  CHECK(family.site_of_coordinate(3) == 1);
  CHECK(family.max_rank() == 3);
  CHECK_THROWS_AS(ProjectionFamily::from_ranks({1, 0}), ValidationError);
}
