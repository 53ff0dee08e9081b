#include "dosreg/graph_model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <sstream>

namespace dosreg {
namespace {

int zigzag(int c) { return c > 0 ? 2 * c - 1 : -2 * c; }

int linf_norm(std::span<const int> c) {
  int best = 0;
  for (int v : c) best = std::max(best, std::abs(v));
  return best;
}

}  // namespace

// --- SiteSpace --------------------------------------------------------------

SiteSpace SiteSpace::box(int dimension, int half_width) {
  require(dimension >= 1, "build_box_enumeration: dimension must be >= 1");
  require(half_width >= 0, "build_box_enumeration: half-width must be >= 0");
  const std::size_t side = static_cast<std::size_t>(2 * half_width + 1);
  std::size_t count = 1;
  for (int k = 0; k < dimension; ++k) {
    if (count > std::numeric_limits<std::size_t>::max() / side) {
      throw ValidationError("build_box_enumeration: box too large");
    }
    count *= side;
  }
  const auto d = static_cast<std::size_t>(dimension);

  std::vector<std::vector<int>> points(count, std::vector<int>(d));
  for (std::size_t lin = 0; lin < count; ++lin) {
    std::size_t rest = lin;
    for (std::size_t a = 0; a < d; ++a) {
      points[lin][a] = static_cast<int>(rest % side) - half_width;
      rest /= side;
    }
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const int nx = linf_norm(points[x]);
    const int ny = linf_norm(points[y]);
    if (nx != ny) return nx < ny;
    for (std::size_t a = 0; a < d; ++a) {
      const int zx = zigzag(points[x][a]);
      const int zy = zigzag(points[y][a]);
      if (zx != zy) return zx < zy;
    }
    return false;
  });

  SiteSpace space;
  space.kind_ = Kind::lattice;
  space.n_sites_ = count;
  space.dimension_ = dimension;
  space.half_width_ = half_width;
  space.growth_exponent_ = 1.0 / static_cast<double>(dimension);
  space.coords_.resize(count * d);
  space.lookup_.resize(count);
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t lin = order[n];
    std::copy(points[lin].begin(), points[lin].end(),
              space.coords_.begin() + static_cast<std::ptrdiff_t>(n * d));
    space.lookup_[lin] = n;
  }
  if (!space.enumeration_is_connected()) {
    throw NumericalError("build_box_enumeration: enumeration leaves the previous hull");
  }
  return space;
}

SiteSpace SiteSpace::from_edges(std::size_t n_sites,
                                std::span<const std::pair<std::size_t, std::size_t>> edges,
                                std::size_t root) {
  require(n_sites >= 1, "SiteSpace::from_edges: need at least one site");
  require(root < n_sites, "SiteSpace::from_edges: root out of range");
  std::vector<std::vector<std::size_t>> adj(n_sites);
  for (const auto& [a, b] : edges) {
    require(a < n_sites && b < n_sites && a != b, "SiteSpace::from_edges: bad edge");
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  // Breadth-first enumeration from the root.
  std::vector<std::size_t> order;
  std::vector<std::size_t> relabel(n_sites, n_sites);
  std::deque<std::size_t> queue{root};
  relabel[root] = 0;
  order.push_back(root);
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    std::vector<std::size_t> next = adj[v];
    std::sort(next.begin(), next.end());
    for (std::size_t w : next) {
      if (relabel[w] != n_sites) continue;
      relabel[w] = order.size();
      order.push_back(w);
      queue.push_back(w);
    }
  }
  require(order.size() == n_sites, "SiteSpace::from_edges: graph must be connected");

  SiteSpace space;
  space.kind_ = Kind::graph;
  space.n_sites_ = n_sites;
  space.adjacency_.assign(n_sites, {});
  for (std::size_t v = 0; v < n_sites; ++v) {
    for (std::size_t w : adj[v]) space.adjacency_[relabel[v]].push_back(relabel[w]);
  }
  for (auto& nb : space.adjacency_) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  space.distances_.assign(n_sites * n_sites, -1);
  for (std::size_t s = 0; s < n_sites; ++s) {
    std::deque<std::size_t> q{s};
    space.distances_[s * n_sites + s] = 0;
    while (!q.empty()) {
      const std::size_t v = q.front();
      q.pop_front();
      for (std::size_t w : space.adjacency_[v]) {
        int& d = space.distances_[s * n_sites + w];
        if (d >= 0) continue;
        d = space.distances_[s * n_sites + v] + 1;
        q.push_back(w);
      }
    }
  }
  if (!space.enumeration_is_connected()) {
    throw NumericalError("SiteSpace::from_edges: enumeration leaves the previous hull");
  }
  return space;
}

SiteSpace SiteSpace::bethe_tree(int branching, int depth) {
  require(branching >= 1 && depth >= 0, "bethe_tree: need branching >= 1 and depth >= 0");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::size_t> frontier{0};
  std::size_t next = 1;
  for (int g = 0; g < depth; ++g) {
    std::vector<std::size_t> children;
    for (std::size_t parent : frontier) {
      for (int c = 0; c < branching; ++c) {
        edges.emplace_back(parent, next);
        children.push_back(next++);
      }
    }
    frontier = std::move(children);
  }
  return from_edges(next, edges, 0);
}

int SiteSpace::distance(std::size_t a, std::size_t b) const {
  require(a < n_sites_ && b < n_sites_, "SiteSpace::distance: site out of range");
  if (kind_ == Kind::graph) return distances_[a * n_sites_ + b];
  const auto d = static_cast<std::size_t>(dimension_);
  int best = 0;
  for (std::size_t k = 0; k < d; ++k) {
    best = std::max(best, std::abs(coords_[a * d + k] - coords_[b * d + k]));
  }
  return best;
}

int SiteSpace::distance_to_prefix(std::size_t prefix_len, std::size_t site) const {
  require(prefix_len >= 1 && prefix_len <= n_sites_, "distance_to_prefix: bad prefix");
  int best = std::numeric_limits<int>::max();
  for (std::size_t k = 0; k < prefix_len; ++k) best = std::min(best, distance(k, site));
  return best;
}

std::span<const int> SiteSpace::coordinates(std::size_t n) const {
  require(kind_ == Kind::lattice, "SiteSpace::coordinates: not a lattice");
  require(n < n_sites_, "SiteSpace::coordinates: site out of range");
  const auto d = static_cast<std::size_t>(dimension_);
  return std::span<const int>(coords_).subspan(n * d, d);
}

std::optional<std::size_t> SiteSpace::index_of(std::span<const int> coords) const {
  if (kind_ != Kind::lattice || coords.size() != static_cast<std::size_t>(dimension_)) {
    return std::nullopt;
  }
  const std::size_t side = static_cast<std::size_t>(2 * half_width_ + 1);
  std::size_t lin = 0;
  std::size_t stride = 1;
  for (int c : coords) {
    if (std::abs(c) > half_width_) return std::nullopt;
    lin += static_cast<std::size_t>(c + half_width_) * stride;
    stride *= side;
  }
  return lookup_[lin];
}

std::vector<std::size_t> SiteSpace::neighbours(std::size_t n) const {
  require(n < n_sites_, "SiteSpace::neighbours: site out of range");
  if (kind_ == Kind::graph) return adjacency_[n];
  // All l-infinity neighbours: offsets in {-1, 0, 1}^d except 0.
  const auto d = static_cast<std::size_t>(dimension_);
  std::vector<std::size_t> out;
  std::vector<int> base(coordinates(n).begin(), coordinates(n).end());
  std::vector<int> probe(d);
  std::size_t combos = 1;
  for (std::size_t k = 0; k < d; ++k) combos *= 3;
  for (std::size_t code = 0; code < combos; ++code) {
    std::size_t rest = code;
    bool zero = true;
    for (std::size_t k = 0; k < d; ++k) {
      const int off = static_cast<int>(rest % 3) - 1;
      rest /= 3;
      zero = zero && off == 0;
      probe[k] = base[k] + off;
    }
    if (zero) continue;
    if (auto idx = index_of(probe)) out.push_back(*idx);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::size_t> SiteSpace::site_at_distance(std::size_t from, int dist) const {
  for (std::size_t k = 0; k < n_sites_; ++k) {
    if (distance(from, k) == dist) return k;
  }
  return std::nullopt;
}

double SiteSpace::growth_constant() const {
  require(kind_ == Kind::lattice, "growth_constant: only declared for lattices");
  double best = std::numeric_limits<double>::infinity();
  // Shell order makes d(x_0, G \ Lambda_N) the norm of x_{N+1}.
  for (std::size_t n = 1; n + 1 < n_sites_; ++n) {
    const double dist = linf_norm(coordinates(n + 1));
    best = std::min(best, dist / std::pow(static_cast<double>(n), growth_exponent_));
  }
  return best;
}

bool SiteSpace::enumeration_is_connected() const {
  for (std::size_t n = 1; n < n_sites_; ++n) {
    const auto nb = neighbours(n);
    if (nb.empty() || nb.front() >= n) return false;
  }
  return true;
}

// --- ProjectionFamily -------------------------------------------------------

ProjectionFamily ProjectionFamily::uniform(std::size_t n_sites, std::size_t rank) {
  return from_ranks(std::vector<std::size_t>(n_sites, rank));
}

ProjectionFamily ProjectionFamily::from_ranks(std::vector<std::size_t> ranks) {
  ProjectionFamily fam;
  fam.offsets_.assign(ranks.size() + 1, 0);
  for (std::size_t n = 0; n < ranks.size(); ++n) {
    require(ranks[n] >= 1, "ProjectionFamily: every rank must be >= 1");
    fam.offsets_[n + 1] = fam.offsets_[n] + ranks[n];
    fam.max_rank_ = std::max(fam.max_rank_, ranks[n]);
  }
  fam.ranks_ = std::move(ranks);
  return fam;
}

std::size_t ProjectionFamily::site_of_coordinate(std::size_t coord) const {
  require(coord < offsets_.back(), "ProjectionFamily: coordinate out of range");
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), coord);
  return static_cast<std::size_t>(it - offsets_.begin()) - 1;
}

// --- FreeOperatorSpec -------------------------------------------------------

FreeOperatorSpec::FreeOperatorSpec(std::size_t dimension) : diagonal_(dimension, 0.0) {}

FreeOperatorSpec FreeOperatorSpec::nearest_neighbour(const SiteSpace& space,
                                                     const ProjectionFamily& projections,
                                                     double t, double flux) {
  require(projections.n_sites() == space.size(),
          "nearest_neighbour: projection family does not match the site space");
  FreeOperatorSpec spec(projections.dimension(space.size()));
  auto link = [&](std::size_t a, std::size_t b, cplx amp) {
    const std::size_t r = std::min(projections.rank(a), projections.rank(b));
    for (std::size_t o = 0; o < r; ++o) {
      spec.set_hopping(projections.block(a).offset + o, projections.block(b).offset + o, amp);
    }
  };
  if (space.kind() == SiteSpace::Kind::graph) {
    for (std::size_t a = 0; a < space.size(); ++a) {
      for (std::size_t b : space.neighbours(a)) {
        if (a < b) link(a, b, t);
      }
    }
    return spec;
  }
  const auto d = static_cast<std::size_t>(space.dimension());
  std::vector<int> probe(d);
  for (std::size_t a = 0; a < space.size(); ++a) {
    const auto x = space.coordinates(a);
    for (std::size_t axis = 0; axis < d; ++axis) {
      std::copy(x.begin(), x.end(), probe.begin());
      probe[axis] += 1;
      const auto b = space.index_of(probe);
      if (!b) continue;
      cplx amp = t;
      if (d >= 2 && axis == 1 && flux != 0.0) {
        amp *= std::polar(1.0, flux * static_cast<double>(x[0]));
      }
      link(a, *b, amp);
    }
  }
  return spec;
}

void FreeOperatorSpec::set_diagonal(std::size_t i, double value) {
  require(i < diagonal_.size(), "FreeOperatorSpec: coordinate out of range");
  require(std::isfinite(value), "FreeOperatorSpec: diagonal must be finite");
  diagonal_[i] = value;
}

void FreeOperatorSpec::set_hopping(std::size_t i, std::size_t j, cplx amplitude) {
  require(i < diagonal_.size() && j < diagonal_.size(), "FreeOperatorSpec: coordinate out of range");
  require(i != j, "FreeOperatorSpec: use set_diagonal for i == j");
  require(std::isfinite(amplitude.real()) && std::isfinite(amplitude.imag()),
          "FreeOperatorSpec: amplitude must be finite");
  if (i < j) {
    hopping_[{i, j}] = amplitude;
  } else {
    hopping_[{j, i}] = std::conj(amplitude);
  }
}

void FreeOperatorSpec::remove_hopping(std::size_t i, std::size_t j) {
  hopping_.erase({std::min(i, j), std::max(i, j)});
}

void FreeOperatorSpec::decouple_sites(const ProjectionFamily& projections, std::size_t a,
                                      std::size_t b) {
  const Block ba = projections.block(a);
  const Block bb = projections.block(b);
  for (std::size_t i = ba.offset; i < ba.offset + ba.rank; ++i) {
    for (std::size_t j = bb.offset; j < bb.offset + bb.rank; ++j) remove_hopping(i, j);
  }
}

cplx FreeOperatorSpec::amplitude(std::size_t i, std::size_t j) const {
  if (i == j) return diagonal_.at(i);
  const auto it = hopping_.find({std::min(i, j), std::max(i, j)});
  if (it == hopping_.end()) return {};
  return i < j ? it->second : std::conj(it->second);
}

double FreeOperatorSpec::norm_bound() const {
  std::vector<double> rows(diagonal_.size());
  for (std::size_t i = 0; i < diagonal_.size(); ++i) rows[i] = std::abs(diagonal_[i]);
  for (const auto& [ij, amp] : hopping_) {
    rows[ij.first] += std::abs(amp);
    rows[ij.second] += std::abs(amp);
  }
  return rows.empty() ? 0.0 : *std::max_element(rows.begin(), rows.end());
}

int FreeOperatorSpec::range(const SiteSpace& space, const ProjectionFamily& projections) const {
  int best = 0;
  for (const auto& [ij, amp] : hopping_) {
    if (amp == cplx{}) continue;
    best = std::max(best, space.distance(projections.site_of_coordinate(ij.first),
                                         projections.site_of_coordinate(ij.second)));
  }
  return best;
}

std::size_t FreeOperatorSpec::bandwidth(std::size_t dimension) const {
  std::size_t best = 0;
  for (const auto& [ij, amp] : hopping_) {
    if (ij.second < dimension) best = std::max(best, ij.second - ij.first);
  }
  return best;
}

MatrixC FreeOperatorSpec::dense() const {
  const auto n = static_cast<Eigen::Index>(diagonal_.size());
  MatrixC m = MatrixC::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) m(i, i) = diagonal_[static_cast<std::size_t>(i)];
  for (const auto& [ij, amp] : hopping_) {
    const auto i = static_cast<Eigen::Index>(ij.first);
    const auto j = static_cast<Eigen::Index>(ij.second);
    m(i, j) = amp;
    m(j, i) = std::conj(amp);
  }
  return m;
}

// --- ModelSpec --------------------------------------------------------------

void ModelSpec::validate() const {
  require(coupling > 0.0 && std::isfinite(coupling), "ModelSpec: coupling must be > 0");
  require(projections.n_sites() == space.size(),
          "ModelSpec: one projection per site is required");
  require(free.dimension() == projections.dimension(space.size()),
          "ModelSpec: free operator dimension does not match the projections");
  require(std::isfinite(free.norm_bound()), "ModelSpec: free operator must be bounded");
}

ModelSpec make_box_model(int dimension, int half_width, double hopping, double coupling,
                         std::size_t rank, double flux) {
  SiteSpace space = SiteSpace::box(dimension, half_width);
  ProjectionFamily proj = ProjectionFamily::uniform(space.size(), rank);
  FreeOperatorSpec free = FreeOperatorSpec::nearest_neighbour(space, proj, hopping, flux);
  ModelSpec model{std::move(space), std::move(proj), std::move(free), coupling};
  model.validate();
  return model;
}

namespace {

void check_assembly_inputs(const ModelSpec& model, std::span<const double> omega,
                           std::size_t n_sites) {
  if (n_sites == 0 || n_sites > model.n_sites()) {
    std::ostringstream msg;
    msg << "assemble_hamiltonian: volume of " << n_sites << " sites outside [1, "
        << model.n_sites() << "]";
    throw ValidationError(msg.str());
  }
  if (omega.size() != n_sites) {
    std::ostringstream msg;
    msg << "assemble_hamiltonian: expected " << n_sites << " disorder values, got "
        << omega.size();
    throw ValidationError(msg.str());
  }
}

}  // namespace

MatrixC assemble_hamiltonian(const ModelSpec& model, std::span<const double> omega,
                             std::size_t n_sites) {
  check_assembly_inputs(model, omega, n_sites);
  const std::size_t dim = model.dimension(n_sites);
  const auto n = static_cast<Eigen::Index>(dim);
  MatrixC h = MatrixC::Zero(n, n);
  for (std::size_t site = 0; site < n_sites; ++site) {
    const Block b = model.block(site);
    for (std::size_t o = 0; o < b.rank; ++o) {
      const auto i = static_cast<Eigen::Index>(b.offset + o);
      h(i, i) = model.free.diagonal(b.offset + o) + model.coupling * omega[site];
    }
  }
  for (const auto& [ij, amp] : model.free.hopping()) {
    if (ij.second >= dim) continue;
    const auto i = static_cast<Eigen::Index>(ij.first);
    const auto j = static_cast<Eigen::Index>(ij.second);
    h(i, j) = amp;
    h(j, i) = std::conj(amp);
  }
  return h;
}

Hamiltonian assemble_operator(const ModelSpec& model, std::span<const double> omega,
                              std::size_t n_sites, std::size_t max_band) {
  check_assembly_inputs(model, omega, n_sites);
  const std::size_t full_dim = model.dimension(model.n_sites());
  const std::size_t full_bw = model.free.bandwidth(full_dim);
  const bool banded = full_bw <= max_band && full_dim > 4 * full_bw;
  if (!banded) return Hamiltonian(assemble_hamiltonian(model, omega, n_sites));

  const std::size_t dim = model.dimension(n_sites);
  BandedMatrix band(dim, full_bw);
  for (std::size_t site = 0; site < n_sites; ++site) {
    const Block b = model.block(site);
    for (std::size_t o = 0; o < b.rank; ++o) {
      band.at(b.offset + o, b.offset + o) =
          model.free.diagonal(b.offset + o) + model.coupling * omega[site];
    }
  }
  for (const auto& [ij, amp] : model.free.hopping()) {
    if (ij.second >= dim) continue;
    band.at(ij.first, ij.second) = amp;
    band.at(ij.second, ij.first) = std::conj(amp);
  }
  return Hamiltonian(std::move(band));
}

std::pair<double, double> restriction_spectrum_bounds(const ModelSpec& model,
                                                      std::span<const double> omega,
                                                      std::size_t n_sites) {
  const MatrixC h = assemble_hamiltonian(model, omega, n_sites);
  Eigen::SelfAdjointEigenSolver<MatrixC> solver(h, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("restriction_spectrum_bounds: eigensolver failed");
  }
  const auto& ev = solver.eigenvalues();
  return {ev(0), ev(ev.size() - 1)};
}

std::pair<double, double> spectrum_envelope(const ModelSpec& model, double support_max) {
  const double norm = model.free.norm_bound();
  return {-norm, norm + model.coupling * support_max};
}

}  // namespace dosreg
