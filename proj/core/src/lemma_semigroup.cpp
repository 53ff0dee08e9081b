#include <algorithm>
#include <cmath>
#include <map>

#include "dosreg/lemma_verify.hpp"
#include "dosreg/parallel.hpp"
#include "dosreg/quadrature.hpp"

namespace dosreg {
namespace {

constexpr cplx kI{0.0, 1.0};

double operator_norm(const MatrixC& m) {
  if (m.size() == 0) return 0.0;
  const MatrixC gram = m.adjoint() * m;
  const double top =
      Eigen::SelfAdjointEigenSolver<MatrixC>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  return std::sqrt(std::max(top, 0.0));
}

void require_strictly_dissipative(const MatrixC& a) {
  require(a.rows() == a.cols() && a.rows() >= 1, "semigroup identity: A must be square");
  const double floor = min_imaginary_eigenvalue(a);
  if (!(floor > 0.0)) {
    throw ValidationError("semigroup identity: Im A must be positive definite (min eigenvalue " +
                          std::to_string(floor) + ")");
  }
}

std::size_t fourier_nodes(double t) {
  // Enough nodes to resolve the oscillation, bucketed so rules are reused.
  const std::size_t n = 24 + static_cast<std::size_t>(std::ceil(std::abs(t) / 1.5));
  return (n + 15) / 16 * 16;
}

// fourier_factor with the weighted density values cached per rule size.
class FourierTable {
 public:
  FourierTable(const SingleSiteDensity& g, double offset) : g_(g), offset_(offset) {}

  cplx operator()(double t) {
    const std::size_t n = fourier_nodes(t);
    auto it = rules_.find(n);
    if (it == rules_.end()) {
      QuadratureRule rule = gauss_legendre(n, 0.0, 1.0);
      for (std::size_t i = 0; i < rule.size(); ++i) rule.weights[i] *= g_(rule.nodes[i]);
      it = rules_.emplace(n, std::move(rule)).first;
    }
    const QuadratureRule& rule = it->second;
    cplx acc{};
    for (std::size_t i = 0; i < rule.size(); ++i) acc += rule.weights[i] * std::exp(kI * (t * rule.nodes[i]));
    return std::exp(kI * (t * offset_)) * acc;
  }

 private:
  const SingleSiteDensity& g_;
  double offset_;
  std::map<std::size_t, QuadratureRule> rules_;
};

// Time nodes, weights and Fourier factors on panels of [0, t_max].
struct TimeGrid {
  double panel_width = 0.0;
  std::size_t full_panels = 0;
  QuadratureRule local;          // nodes on [0, panel_width]
  std::vector<cplx> factors;     // full_panels * local.size()
  QuadratureRule tail;           // last partial panel, absolute times
  std::vector<cplx> tail_factors;
};

TimeGrid build_time_grid(const SingleSiteDensity& g, double offset, double t_max,
                         double panel_width, std::size_t panel_nodes) {
  require(t_max > 0.0, "semigroup identity: t_max must be > 0");
  require(panel_width > 0.0 && panel_nodes >= 2, "semigroup identity: bad panel rule");
  FourierTable ghat(g, offset);
  TimeGrid grid;
  grid.panel_width = panel_width;
  grid.full_panels = static_cast<std::size_t>(std::floor(t_max / panel_width));
  grid.local = gauss_legendre(panel_nodes, 0.0, panel_width);
  grid.factors.resize(grid.full_panels * grid.local.size());
  for (std::size_t k = 0; k < grid.full_panels; ++k) {
    for (std::size_t j = 0; j < grid.local.size(); ++j) {
      grid.factors[k * grid.local.size() + j] =
          ghat(static_cast<double>(k) * panel_width + grid.local.nodes[j]);
    }
  }
  const double t_done = static_cast<double>(grid.full_panels) * panel_width;
  if (t_max - t_done > 1e-12 * t_max) {
    grid.tail = gauss_legendre(panel_nodes, t_done, t_max);
    for (double t : grid.tail.nodes) grid.tail_factors.push_back(ghat(t));
  }
  return grid;
}

MatrixC time_integral_on_grid(const MatrixC& a, const TimeGrid& grid) {
  const auto n = a.rows();
  std::vector<MatrixC> local_exp;
  for (double tau : grid.local.nodes) local_exp.push_back(dissipative_exp(a, tau));
  const MatrixC step = dissipative_exp(a, grid.panel_width);
  MatrixC u = MatrixC::Identity(n, n);
  MatrixC acc = MatrixC::Zero(n, n);
  const std::size_t q = grid.local.size();
  bool vanished = false;
  for (std::size_t k = 0; k < grid.full_panels; ++k) {
    MatrixC panel = MatrixC::Zero(n, n);
    for (std::size_t j = 0; j < q; ++j) {
      panel += (grid.local.weights[j] * grid.factors[k * q + j]) * local_exp[j];
    }
    acc += u * panel;
    u = u * step;
    // ||e^{itA}|| decays like exp(-t * min Im A); nothing left to add.
    if (u.norm() < 1e-250) {
      vanished = true;
      break;
    }
  }
  if (!vanished && !grid.tail_factors.empty()) {
    for (std::size_t j = 0; j < grid.tail.size(); ++j) {
      acc += (grid.tail.weights[j] * grid.tail_factors[j]) * dissipative_exp(a, grid.tail.nodes[j]);
    }
  }
  return -kI * acc;
}

}  // namespace

// --- Hoelder bound for contraction semigroups -------------------------------------

VerificationReport verify_semigroup_hoelder(const SemigroupSetup& setup) {
  for (double s : setup.s_values) require(s > 0.0 && s < 1.0, "semigroup: s must lie in (0, 1)");
  for (double t : setup.t_grid) require(t >= 0.0, "semigroup: t must be >= 0");
  const std::size_t n = setup.corpus.instances;
  require(n >= 1, "semigroup: corpus is empty");

  struct Outcome {
    double worst_excess = -1e300;
    double worst_s = 0.0;
    double worst_t = 0.0;
    std::size_t violations = 0;
  };
  std::vector<Outcome> outcomes(n);
  auto make_pair = [&](std::size_t i) {
    Rng rng = setup.corpus.stream(i);
    const std::size_t dim = setup.corpus.dimension(i);
    MatrixC a = random_dissipative(dim, rng);
    MatrixC b;
    if (i % 2 == 0) {
      // Nearby pair: B = A + delta C with C Hermitian keeps B dissipative.
      const double delta = std::pow(10.0, -4.0 * rng.uniform01());
      b = a + delta * random_hermitian(dim, rng);
    } else {
      b = random_dissipative(dim, rng);
    }
    return std::pair{std::move(a), std::move(b)};
  };

  parallel_for(n, setup.workers, [&](std::size_t i) {
    const auto [a, b] = make_pair(i);
    const double gap = operator_norm(a - b);
    Outcome out;
    for (double t : setup.t_grid) {
      const double lhs = operator_norm(dissipative_exp(a, t) - dissipative_exp(b, t));
      for (double s : setup.s_values) {
        const double rhs = std::pow(2.0, 1.0 - s) * std::pow(t, s) * std::pow(gap, s);
        const double excess = lhs - rhs;
        if (excess > setup.slack) ++out.violations;
        if (excess > out.worst_excess) {
          out.worst_excess = excess;
          out.worst_s = s;
          out.worst_t = t;
        }
      }
    }
    outcomes[i] = out;
  });

  std::size_t violations = 0;
  std::size_t worst = 0;
  for (std::size_t i = 0; i < n; ++i) {
    violations += outcomes[i].violations;
    if (outcomes[i].worst_excess > outcomes[worst].worst_excess) worst = i;
  }
  VerificationReport report;
  report.operation = "semigroup_hoelder";
  report.add_check("violations", static_cast<double>(violations), 0.0);
  report.add_check("max_excess", outcomes[worst].worst_excess, setup.slack);
  report.metrics["pairs"] = n;
  report.metrics["comparisons"] = n * setup.s_values.size() * setup.t_grid.size();
  report.metrics["max_excess"] = outcomes[worst].worst_excess;
  report.tolerances["slack"] = setup.slack;
  report.tolerances["s_values"] = setup.s_values;
  report.tolerances["t_grid"] = setup.t_grid;
  const auto [a, b] = make_pair(worst);
  report.witness = {{"instance", worst},
                    {"s", outcomes[worst].worst_s},
                    {"t", outcomes[worst].worst_t},
                    {"excess", outcomes[worst].worst_excess},
                    {"a", matrix_to_json(a)},
                    {"b", matrix_to_json(b)}};
  return report;
}

// --- resolvent average as a semigroup time integral --------------------------------

cplx fourier_factor(const SingleSiteDensity& g, double offset, double t) {
  const QuadratureRule rule = gauss_legendre(fourier_nodes(t), 0.0, 1.0);
  cplx acc{};
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double x = rule.nodes[i];
    acc += rule.weights[i] * g(x) * std::exp(kI * (t * x));
  }
  return std::exp(kI * (t * offset)) * acc;
}

MatrixC averaged_resolvent(const MatrixC& a, const SingleSiteDensity& g, double offset) {
  require(a.rows() == a.cols() && a.rows() >= 1, "averaged_resolvent: A must be square");
  const auto n = a.rows();
  std::vector<double> cuts;
  for (int k = 0; k <= 8; ++k) cuts.push_back(offset + k / 8.0);
  const QuadratureRule rule = composite_gauss_legendre(cuts, 16);
  MatrixC acc = MatrixC::Zero(n, n);
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double lambda = rule.nodes[i];
    const MatrixC shifted = a + lambda * MatrixC::Identity(n, n);
    const Eigen::PartialPivLU<MatrixC> lu(shifted);
    const MatrixC inv = lu.inverse();
    const double residual = (shifted * inv - MatrixC::Identity(n, n)).norm();
    if (!(residual <= 1e-8)) {
      throw NumericalError("averaged_resolvent: (A + lambda) is numerically singular on supp g");
    }
    acc += (rule.weights[i] * g(lambda - offset)) * inv;
  }
  return acc;
}

MatrixC semigroup_time_integral(const MatrixC& a, const SingleSiteDensity& g, double offset,
                                double t_max, double panel_width, std::size_t panel_nodes) {
  require_strictly_dissipative(a);
  return time_integral_on_grid(a, build_time_grid(g, offset, t_max, panel_width, panel_nodes));
}

VerificationReport verify_resolvent_semigroup_identity(const SemigroupIdentitySetup& setup,
                                                       std::span<const MatrixC> extra) {
  require(setup.im_floor > 0.0, "semigroup identity: im_floor must be > 0");
  for (const auto& m : extra) require_strictly_dissipative(m);
  const TimeGrid grid =
      build_time_grid(setup.g, setup.g_offset, setup.t_max, setup.panel_width, setup.panel_nodes);

  const std::size_t n_corpus = setup.corpus.instances;
  const std::size_t total = n_corpus + extra.size();
  auto instance = [&](std::size_t i) {
    if (i >= n_corpus) return extra[i - n_corpus];
    Rng rng = setup.corpus.stream(i);
    return random_dissipative(setup.corpus.dimension(i), rng, setup.im_floor);
  };
  std::vector<double> discrepancy(total);
  parallel_for(total, setup.workers, [&](std::size_t i) {
    const MatrixC a = instance(i);
    const MatrixC lhs = averaged_resolvent(a, setup.g, setup.g_offset);
    const MatrixC rhs = time_integral_on_grid(a, grid);
    discrepancy[i] = operator_norm(lhs - rhs);
  });

  VerificationReport report;
  report.operation = "resolvent_semigroup_identity";
  std::size_t worst = 0;
  for (std::size_t i = 0; i < total; ++i) {
    if (!(discrepancy[i] <= discrepancy[worst])) worst = i;
  }
  const double max_disc = total ? discrepancy[worst] : 0.0;
  report.add_check("max_operator_norm_discrepancy", max_disc, setup.tolerance);
  report.metrics["instances"] = total;
  report.metrics["max_discrepancy"] = max_disc;
  report.tolerances["t_max"] = setup.t_max;
  report.tolerances["tolerance"] = setup.tolerance;
  if (total) {
    report.witness = {{"instance", worst},
                      {"discrepancy", max_disc},
                      {"a", matrix_to_json(instance(worst))}};
  }
  return report;
}

}  // namespace dosreg
