#include <algorithm>
#include <cmath>

#include "dosreg/lemma_verify.hpp"
#include "dosreg/parallel.hpp"
#include "dosreg/quadrature.hpp"

namespace dosreg {
namespace {

MatrixC psd_sqrt(const MatrixC& f) {
  Eigen::SelfAdjointEigenSolver<MatrixC> eig(f);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().adjoint();
}

double operator_norm(const MatrixC& m) {
  const MatrixC gram = m.adjoint() * m;
  const double top =
      Eigen::SelfAdjointEigenSolver<MatrixC>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  return std::sqrt(std::max(top, 0.0));
}

// F^1/2 (R_A - R_B) F^1/2 at (x1, x2), with R_A - R_B = R_A (B - A) R_B.
MatrixC sandwiched_difference(const MatrixC& a, const MatrixC& diff, const MatrixC& f1,
                              const MatrixC& f2, const MatrixC& root, cplx z, double x1,
                              double x2) {
  const auto n = a.rows();
  const MatrixC shift = x1 * f1 + x2 * f2 - z * MatrixC::Identity(n, n);
  const Eigen::PartialPivLU<MatrixC> lu_a(a + shift);
  const Eigen::PartialPivLU<MatrixC> lu_b(a + diff + shift);
  const MatrixC right = lu_b.solve(root);                     // R_B F^1/2
  const MatrixC left = lu_a.solve(MatrixC(diff * right));     // R_A (B - A) R_B F^1/2
  return root * left;
}

QuadratureRule phi_rule(const BumpPair& pair, std::size_t nodes) {
  const auto [lo, hi] = pair.phi_support();
  const double w = pair.transition;
  std::vector<double> cuts{lo, lo + w};
  const double inner = (hi - w) - (lo + w);
  const int panels = std::max(1, static_cast<int>(std::ceil(inner)));
  for (int k = 1; k < panels; ++k) cuts.push_back(lo + w + inner * k / panels);
  cuts.push_back(hi - w);
  cuts.push_back(hi);
  return composite_gauss_legendre(cuts, nodes);
}

double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

struct AverageInstance {
  MatrixC a, c, f1, f2;
  cplx z;
};

AverageInstance make_instance(const Corpus& corpus, std::size_t i, std::span<const cplx> z_grid) {
  Rng rng = corpus.stream(i);
  const std::size_t dim = corpus.dimension(i);
  AverageInstance inst;
  inst.a = random_hermitian(dim, rng);
  inst.c = random_hermitian(dim, rng);
  inst.c /= operator_norm(inst.c);
  inst.f1 = random_psd(dim, rng);
  inst.f2 = random_psd(dim, rng);
  inst.z = z_grid[i % z_grid.size()];
  return inst;
}

}  // namespace

ResolventAverageSides resolvent_average_sides(const MatrixC& a, const MatrixC& b,
                                              const MatrixC& f1, const MatrixC& f2, cplx z,
                                              const BumpPair& pair, double s,
                                              std::size_t rho_nodes,
                                              std::size_t phi_panel_nodes) {
  require(z.imag() > 0.0, "resolvent average: Im z must be > 0");
  require(s > 0.0 && s < 1.0, "resolvent average: s must lie in (0, 1)");
  const MatrixC root = psd_sqrt(f1 + f2);
  const MatrixC diff = b - a;
  ResolventAverageSides out;
  if (diff.cwiseAbs().maxCoeff() == 0.0) return out;

  const QuadratureRule rho = gauss_legendre(rho_nodes, 0.0, pair.support);
  MatrixC acc = MatrixC::Zero(a.rows(), a.cols());
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const double wi = rho.weights[i] * pair.rho1_at(rho.nodes[i]);
    for (std::size_t j = 0; j < rho.size(); ++j) {
      const double w = wi * rho.weights[j] * pair.rho2_at(rho.nodes[j]);
      acc += w * sandwiched_difference(a, diff, f1, f2, root, z, rho.nodes[i], rho.nodes[j]);
    }
  }
  out.lhs = operator_norm(acc);

  const QuadratureRule phi = phi_rule(pair, phi_panel_nodes);
  std::vector<double> phi_w(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) phi_w[i] = phi.weights[i] * pair.phi(phi.nodes[i]);
  double rhs = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    if (phi_w[i] == 0.0) continue;
    for (std::size_t j = 0; j < phi.size(); ++j) {
      if (phi_w[j] == 0.0) continue;
      const MatrixC m = sandwiched_difference(a, diff, f1, f2, root, z, phi.nodes[i], phi.nodes[j]);
      rhs += phi_w[i] * phi_w[j] * std::pow(operator_norm(m), s);
    }
  }
  out.rhs = rhs;
  return out;
}

VerificationReport verify_resolvent_average_bound(const ResolventAverageSetup& setup) {
  require(setup.s > 0.0 && setup.s < 1.0, "resolvent average: s must lie in (0, 1) (tau = 1)");
  require(setup.corpus.instances >= 1, "resolvent average: corpus is empty");
  std::vector<cplx> z_grid = setup.z_grid;
  if (z_grid.empty()) z_grid = {{-0.5, 0.1}, {0.3, 0.05}, {1.2, 0.2}};
  for (cplx z : z_grid) require(z.imag() > 0.0, "resolvent average: Im z must be > 0");
  std::vector<double> deltas = setup.deltas;
  if (deltas.empty()) deltas = {1e-1, 1e-2, 1e-3, 1e-4};
  require(deltas.size() >= 2, "resolvent average: need at least two perturbation sizes");

  VerificationReport report;
  report.operation = "resolvent_average_bound";

  // Ratios on the corpus and on its doubling.
  const std::size_t base = setup.corpus.instances;
  const std::size_t total = 2 * base;
  std::vector<ResolventAverageSides> sides(total);
  parallel_for(total, setup.workers, [&](std::size_t i) {
    const AverageInstance inst = make_instance(setup.corpus, i, z_grid);
    const MatrixC b = inst.a + setup.corpus.delta * inst.c;
    sides[i] = resolvent_average_sides(inst.a, b, inst.f1, inst.f2, inst.z, setup.pair, setup.s,
                                       setup.rho_nodes, setup.phi_panel_nodes);
  });
  double max_base = 0.0;
  double max_all = 0.0;
  std::size_t arg_max = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const double ratio = sides[i].rhs > 0.0 ? sides[i].lhs / sides[i].rhs : 0.0;
    if (i < base) max_base = std::max(max_base, ratio);
    if (ratio > max_all) {
      max_all = ratio;
      arg_max = i;
    }
  }
  const double drift = max_base > 0.0 ? std::abs(max_all / max_base - 1.0) : 0.0;
  report.add_check("max_ratio_finite", std::isfinite(max_all) ? 0.0 : 1.0, 0.0);
  report.add_check("max_ratio_drift_on_doubling", drift, setup.ratio_stability);
  report.metrics["max_ratio"] = max_base;
  report.metrics["max_ratio_doubled"] = max_all;
  report.metrics["ratio_drift"] = drift;
  report.metrics["instances"] = base;

  // Hoelder rate of LHS in delta.
  Corpus slope_corpus = setup.corpus;
  slope_corpus.seed = mix_seed(setup.corpus.seed, 0x51u);
  std::vector<double> slopes(setup.slope_instances);
  parallel_for(setup.slope_instances, setup.workers, [&](std::size_t i) {
    const AverageInstance inst = make_instance(slope_corpus, i, z_grid);
    std::vector<double> x;
    std::vector<double> y;
    for (double d : deltas) {
      const auto lr = resolvent_average_sides(inst.a, inst.a + d * inst.c, inst.f1, inst.f2,
                                              inst.z, setup.pair, setup.s, setup.rho_nodes,
                                              setup.phi_panel_nodes);
      x.push_back(std::log(d));
      y.push_back(std::log(lr.lhs));
    }
    slopes[i] = ols_slope(x, y);
  });
  double min_slope = slopes.empty() ? setup.s : slopes.front();
  for (double sl : slopes) min_slope = std::min(min_slope, sl);
  report.add_check("hoelder_slope_shortfall", (setup.s - setup.slope_slack) - min_slope, 0.0);
  report.metrics["min_slope"] = min_slope;
  report.metrics["slopes"] = slopes;
  report.tolerances["s"] = setup.s;
  report.tolerances["slope_slack"] = setup.slope_slack;
  report.tolerances["ratio_stability"] = setup.ratio_stability;
  report.tolerances["delta"] = setup.corpus.delta;

  const AverageInstance worst = make_instance(setup.corpus, arg_max, z_grid);
  report.witness = {{"instance", arg_max},
                    {"lhs", sides[arg_max].lhs},
                    {"rhs", sides[arg_max].rhs},
                    {"z", {worst.z.real(), worst.z.imag()}},
                    {"a", matrix_to_json(worst.a)},
                    {"c", matrix_to_json(worst.c)},
                    {"f1", matrix_to_json(worst.f1)},
                    {"f2", matrix_to_json(worst.f2)}};
  return report;
}

}  // namespace dosreg
