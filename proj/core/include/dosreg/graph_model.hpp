#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dosreg/common.hpp"
#include "dosreg/spectral.hpp"

namespace dosreg {

/// Finite site space with a metric and an enumeration n -> x_n.
///
/// Sites are addressed by their enumeration index. The enumeration satisfies
/// d(Lambda_N, x_{N+1}) = 1 for every N, where Lambda_N = {x_0, ..., x_N};
/// this is checked when the space is built.
class SiteSpace {
 public:
  enum class Kind { lattice, graph };

  /// Box {-L..L}^d with the l-infinity metric, enumerated shell by shell
  /// (by l-infinity norm) and, inside a shell, lexicographically in the
  /// zig-zag coordinate code 0, 1, -1, 2, -2, ... Declares alpha = 1/d.
  static SiteSpace box(int dimension, int half_width);

  /// Connected graph with the graph metric, enumerated breadth-first from
  /// `root`. Experimental: no growth exponent is claimed.
  static SiteSpace from_edges(std::size_t n_sites,
                              std::span<const std::pair<std::size_t, std::size_t>> edges,
                              std::size_t root = 0);

  /// Rooted tree in which every vertex has `branching` children, `depth`
  /// generations deep. Experimental.
  static SiteSpace bethe_tree(int branching, int depth);

  Kind kind() const noexcept { return kind_; }
  bool experimental() const noexcept { return kind_ == Kind::graph; }
  std::size_t size() const noexcept { return n_sites_; }
  int dimension() const noexcept { return dimension_; }
  int half_width() const noexcept { return half_width_; }
  /// alpha in the growth condition d(x_0, G \ Lambda_N) >= r_G N^alpha.
  double growth_exponent() const noexcept { return growth_exponent_; }

  int distance(std::size_t a, std::size_t b) const;
  /// d(Lambda_N, x) with Lambda_N the first `prefix_len` sites.
  int distance_to_prefix(std::size_t prefix_len, std::size_t site) const;

  /// Lattice coordinates of site n (lattice spaces only).
  std::span<const int> coordinates(std::size_t n) const;
  std::optional<std::size_t> index_of(std::span<const int> coords) const;

  /// Graph neighbours (distance 1) of site n.
  std::vector<std::size_t> neighbours(std::size_t n) const;

  /// Smallest site at exactly `dist` from `from`, if any.
  std::optional<std::size_t> site_at_distance(std::size_t from, int dist) const;

  /// min over 1 <= N < size-1 of d(x_0, G \ Lambda_N) / N^alpha, the
  /// empirical r_G over the built range. Lattice spaces only.
  double growth_constant() const;

  /// Re-checks d(Lambda_N, x_{N+1}) == 1 for every N.
  bool enumeration_is_connected() const;

 private:
  SiteSpace() = default;

  Kind kind_ = Kind::lattice;
  std::size_t n_sites_ = 0;
  int dimension_ = 0;
  int half_width_ = 0;
  double growth_exponent_ = 0.0;
  std::vector<int> coords_;           // lattice: n_sites x dimension
  std::vector<std::size_t> lookup_;   // lattice: box position -> index
  std::vector<int> distances_;        // graph: n_sites x n_sites
  std::vector<std::vector<std::size_t>> adjacency_;  // graph
};

/// Orthogonal projections P_n onto contiguous coordinate blocks, one per
/// site, in enumeration order. The blocks partition the coordinates, so
/// sum_n P_n is the identity on every prefix volume.
class ProjectionFamily {
 public:
  static ProjectionFamily uniform(std::size_t n_sites, std::size_t rank);
  static ProjectionFamily from_ranks(std::vector<std::size_t> ranks);

  std::size_t n_sites() const noexcept { return ranks_.size(); }
  std::size_t rank(std::size_t site) const { return ranks_.at(site); }
  std::size_t max_rank() const noexcept { return max_rank_; }
  Block block(std::size_t site) const { return {offsets_.at(site), ranks_.at(site)}; }
  /// Number of coordinates in the first `n_sites` blocks.
  std::size_t dimension(std::size_t n_sites) const { return offsets_.at(n_sites); }
  std::size_t site_of_coordinate(std::size_t coord) const;

 private:
  std::vector<std::size_t> ranks_;
  std::vector<std::size_t> offsets_;  // size n_sites + 1
  std::size_t max_rank_ = 0;
};

/// The free operator h_0 at coordinate level: real diagonal plus Hermitian
/// off-diagonal hopping (amplitude(j, i) = conj(amplitude(i, j))).
class FreeOperatorSpec {
 public:
  explicit FreeOperatorSpec(std::size_t dimension);

  /// Nearest-neighbour hopping of strength t on a lattice or graph, diagonal
  /// in the orbital index. For d >= 2 lattices, bonds along axis 1 carry the
  /// Landau-gauge Peierls phase exp(i * flux * x_0).
  static FreeOperatorSpec nearest_neighbour(const SiteSpace& space,
                                            const ProjectionFamily& projections,
                                            double t, double flux = 0.0);

  std::size_t dimension() const noexcept { return diagonal_.size(); }

  void set_diagonal(std::size_t i, double value);
  /// Sets <i|h0|j> = amplitude and <j|h0|i> = conj(amplitude), i != j.
  void set_hopping(std::size_t i, std::size_t j, cplx amplitude);
  void remove_hopping(std::size_t i, std::size_t j);
  /// Removes all hopping between the coordinates of two sites.
  void decouple_sites(const ProjectionFamily& projections, std::size_t a, std::size_t b);

  double diagonal(std::size_t i) const { return diagonal_.at(i); }
  cplx amplitude(std::size_t i, std::size_t j) const;

  /// Upper-triangle entries (i < j) with their amplitudes.
  const std::map<std::pair<std::size_t, std::size_t>, cplx>& hopping() const noexcept {
    return hopping_;
  }

  /// Max absolute row sum of h_0; bounds ||h_0||.
  double norm_bound() const;
  /// Largest site distance spanned by a hopping entry.
  int range(const SiteSpace& space, const ProjectionFamily& projections) const;
  /// Largest |i - j| over entries with both coordinates below `dimension`.
  std::size_t bandwidth(std::size_t dimension) const;

  MatrixC dense() const;

 private:
  std::vector<double> diagonal_;
  std::map<std::pair<std::size_t, std::size_t>, cplx> hopping_;
};

/// h^omega = h_0 + lambda * sum_n omega_n P_n on a site space.
struct ModelSpec {
  SiteSpace space;
  ProjectionFamily projections;
  FreeOperatorSpec free;
  double coupling = 1.0;

  /// Throws ValidationError if any component invariant fails.
  void validate() const;

  std::size_t n_sites() const noexcept { return space.size(); }
  std::size_t dimension(std::size_t n_sites) const { return projections.dimension(n_sites); }
  Block block(std::size_t site) const { return projections.block(site); }
};

/// Box model: nearest-neighbour hopping t (with optional flux), uniform
/// rank, coupling lambda.
ModelSpec make_box_model(int dimension, int half_width, double hopping, double coupling,
                         std::size_t rank = 1, double flux = 0.0);

/// P_Lambda (h_0 + lambda sum omega_n P_n) P_Lambda on the first n_sites
/// sites, as a dense Hermitian matrix.
MatrixC assemble_hamiltonian(const ModelSpec& model, std::span<const double> omega,
                             std::size_t n_sites);

/// Same operator in band storage when h_0 has bandwidth <= max_band on the
/// full space and the full dimension exceeds 4 * bandwidth; dense otherwise.
/// The storage decision depends only on the model, not on n_sites.
Hamiltonian assemble_operator(const ModelSpec& model, std::span<const double> omega,
                              std::size_t n_sites, std::size_t max_band = 16);

/// Eigenvalue range of h^omega restricted to the first n_sites sites.
std::pair<double, double> restriction_spectrum_bounds(const ModelSpec& model,
                                                      std::span<const double> omega,
                                                      std::size_t n_sites);

/// [-||h0||, ||h0|| + lambda * support_max]: contains every restriction's
/// spectrum when the disorder lives in [0, support_max].
std::pair<double, double> spectrum_envelope(const ModelSpec& model, double support_max = 1.0);

}  // namespace dosreg
