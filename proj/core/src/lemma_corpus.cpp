#include <cmath>
#include <numbers>

#include "dosreg/lemma_verify.hpp"

namespace dosreg {

void VerificationReport::add_check(std::string name, double value, double bound) {
  const bool ok = value <= bound;  // NaN fails
  checks.push_back({std::move(name), value, bound, ok});
  passed = passed && ok;
}

nlohmann::json VerificationReport::to_json() const {
  nlohmann::json out;
  out["operation"] = operation;
  out["passed"] = passed;
  out["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    out["checks"].push_back(
        {{"name", c.name}, {"value", c.value}, {"bound", c.bound}, {"passed", c.passed}});
  }
  out["metrics"] = metrics;
  out["tolerances"] = tolerances;
  out["witness"] = witness;
  return out;
}

nlohmann::json matrix_to_json(const MatrixC& m) {
  nlohmann::json re = nlohmann::json::array();
  nlohmann::json im = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      re.push_back(m(i, j).real());
      im.push_back(m(i, j).imag());
    }
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"re", re}, {"im", im}};
}

MatrixC matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  require(static_cast<Eigen::Index>(re.size()) == rows * cols &&
              static_cast<Eigen::Index>(im.size()) == rows * cols,
          "matrix_from_json: entry count does not match shape");
  MatrixC m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < cols; ++k) {
      const auto idx = static_cast<std::size_t>(i * cols + k);
      m(i, k) = cplx(re[idx].get<double>(), im[idx].get<double>());
    }
  }
  return m;
}

std::size_t Corpus::dimension(std::size_t instance) const {
  require(dim_min >= 1 && dim_min <= dim_max, "Corpus: need 1 <= dim_min <= dim_max");
  const std::uint64_t h = mix_seed(seed ^ 0x5bd1e9955bd1e995ULL, instance);
  return dim_min + static_cast<std::size_t>(h % (dim_max - dim_min + 1));
}

Rng Corpus::stream(std::size_t instance) const { return sample_rng(seed, instance); }

double standard_normal(Rng& rng) {
  // Box-Muller; 1 - u keeps the logarithm finite.
  const double u = 1.0 - rng.uniform01();
  const double v = rng.uniform01();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

namespace {

MatrixC gaussian_matrix(std::size_t dim, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(dim);
  MatrixC m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double re = standard_normal(rng);
      m(i, j) = cplx(re, standard_normal(rng));
    }
  }
  return m;
}

MatrixC hermitian_part(const MatrixC& m) {
  MatrixC h = 0.5 * (m + m.adjoint());
  for (Eigen::Index i = 0; i < h.rows(); ++i) h(i, i) = h(i, i).real();
  return h;
}

}  // namespace

MatrixC random_hermitian(std::size_t dim, Rng& rng) {
  return hermitian_part(gaussian_matrix(dim, rng));
}

MatrixC random_psd(std::size_t dim, Rng& rng) {
  const MatrixC m = gaussian_matrix(dim, rng);
  MatrixC q = hermitian_part(m * m.adjoint());
  const double norm = Eigen::SelfAdjointEigenSolver<MatrixC>(q, Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .maxCoeff();
  if (norm > 0.0) q /= norm;
  return q;
}

MatrixC random_dissipative(std::size_t dim, Rng& rng, double im_floor) {
  require(im_floor >= 0.0, "random_dissipative: floor must be >= 0");
  const MatrixC h = random_hermitian(dim, rng);
  MatrixC q = random_psd(dim, rng);
  q.diagonal().array() += im_floor;
  return h + cplx(0.0, 1.0) * q;
}

double smooth_indicator(double x, double a, double b, double width) {
  require(width > 0.0 && 2.0 * width <= b - a, "smooth_indicator: transition too wide");
  auto psi = [](double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; };
  auto step = [&](double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return psi(u) / (psi(u) + psi(1.0 - u));
  };
  return step((x - a) / width) * step((b - x) / width);
}

double BumpPair::rho1_at(double x) const { return rho1(x / support) / support; }
double BumpPair::rho2_at(double x) const { return rho2(x / support) / support; }

double BumpPair::phi(double x) const {
  return smooth_indicator(x + 2.5 * support + 1.0, 0.0, 2.0 * support + 1.0, transition);
}

std::pair<double, double> BumpPair::phi_support() const {
  return {-2.5 * support - 1.0, -0.5 * support};
}

}  // namespace dosreg
