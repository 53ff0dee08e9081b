#include "dosreg/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dosreg {

ComplexShift::ComplexShift(double energy, double eps) : energy_(energy), eps_(eps) {
  require(std::isfinite(energy), "ComplexShift: energy must be finite");
  require(eps > 0.0 && std::isfinite(eps), "ComplexShift: eps must be > 0");
}

// --- BandedMatrix -----------------------------------------------------------

BandedMatrix::BandedMatrix(std::size_t n, std::size_t bandwidth)
    : n_(n), bw_(bandwidth), data_(n * (2 * bandwidth + 1)) {}

MatrixC BandedMatrix::dense() const {
  MatrixC m = MatrixC::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t lo = i > bw_ ? i - bw_ : 0;
    const std::size_t hi = std::min(n_ - 1, i + bw_);
    for (std::size_t j = lo; j <= hi; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = at(i, j);
    }
  }
  return m;
}

VectorC BandedMatrix::multiply(const VectorC& x) const {
  VectorC y = VectorC::Zero(static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t lo = i > bw_ ? i - bw_ : 0;
    const std::size_t hi = std::min(n_ - 1, i + bw_);
    cplx acc{};
    for (std::size_t j = lo; j <= hi; ++j) acc += at(i, j) * x[static_cast<Eigen::Index>(j)];
    y[static_cast<Eigen::Index>(i)] = acc;
  }
  return y;
}

// --- Hamiltonian ------------------------------------------------------------

Hamiltonian::Hamiltonian(MatrixC dense) : storage_(std::move(dense)) {
  const auto& m = std::get<MatrixC>(storage_);
  require(m.rows() == m.cols(), "Hamiltonian: matrix must be square");
  norm_bound_ = m.rows() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

Hamiltonian::Hamiltonian(BandedMatrix banded) : storage_(std::move(banded)) {
  const auto& b = std::get<BandedMatrix>(storage_);
  double best = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const std::size_t lo = i > b.bandwidth() ? i - b.bandwidth() : 0;
    const std::size_t hi = std::min(b.size() - 1, i + b.bandwidth());
    double row = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) row += std::abs(b.at(i, j));
    best = std::max(best, row);
  }
  norm_bound_ = best;
}

std::size_t Hamiltonian::size() const noexcept {
  if (const auto* d = std::get_if<MatrixC>(&storage_)) return static_cast<std::size_t>(d->rows());
  return std::get<BandedMatrix>(storage_).size();
}

MatrixC Hamiltonian::dense() const {
  if (const auto* d = std::get_if<MatrixC>(&storage_)) return *d;
  return std::get<BandedMatrix>(storage_).dense();
}

VectorC Hamiltonian::multiply(const VectorC& x) const {
  if (const auto* d = std::get_if<MatrixC>(&storage_)) return (*d) * x;
  return std::get<BandedMatrix>(storage_).multiply(x);
}

// --- ResolventSolver --------------------------------------------------------

ResolventSolver::ResolventSolver(const Hamiltonian& h, const ComplexShift& z)
    : h_(&h), shift_(z), n_(h.size()), residual_scale_(1e-10 * (h.norm_bound() + std::abs(z.z()))) {
  const cplx zz = z.z();
  if (const auto* dense = h.dense_storage()) {
    MatrixC shifted = *dense;
    shifted.diagonal().array() -= zz;
    dense_lu_.emplace(shifted);
    return;
  }
  const BandedMatrix& band = *h.banded_storage();
  band_lu_ = band;
  const std::size_t bw = band.bandwidth();
  for (std::size_t i = 0; i < n_; ++i) band_lu_.at(i, i) -= zz;
  for (std::size_t k = 0; k < n_; ++k) {
    const cplx pivot = band_lu_.at(k, k);
    if (std::abs(pivot) < 0.5 * z.eps()) {
      std::ostringstream msg;
      msg << "ResolventSolver: pivot " << std::abs(pivot) << " below eps/2 at row " << k;
      throw NumericalError(msg.str());
    }
    const std::size_t last = std::min(n_ - 1, k + bw);
    for (std::size_t i = k + 1; i <= last; ++i) {
      const cplx l = band_lu_.at(i, k) / pivot;
      band_lu_.at(i, k) = l;
      if (l == cplx{}) continue;
      for (std::size_t j = k + 1; j <= last; ++j) band_lu_.at(i, j) -= l * band_lu_.at(k, j);
    }
  }
}

VectorC ResolventSolver::solve_unchecked(const VectorC& rhs) const {
  if (dense_lu_) return dense_lu_->solve(rhs);
  const std::size_t bw = band_lu_.bandwidth();
  VectorC x = rhs;
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t lo = i > bw ? i - bw : 0;
    cplx acc = x[static_cast<Eigen::Index>(i)];
    for (std::size_t j = lo; j < i; ++j) acc -= band_lu_.at(i, j) * x[static_cast<Eigen::Index>(j)];
    x[static_cast<Eigen::Index>(i)] = acc;
  }
  for (std::size_t ii = n_; ii-- > 0;) {
    const std::size_t hi = std::min(n_ - 1, ii + bw);
    cplx acc = x[static_cast<Eigen::Index>(ii)];
    for (std::size_t j = ii + 1; j <= hi; ++j) acc -= band_lu_.at(ii, j) * x[static_cast<Eigen::Index>(j)];
    x[static_cast<Eigen::Index>(ii)] = acc / band_lu_.at(ii, ii);
  }
  return x;
}

void ResolventSolver::check_residual(const VectorC& x, const VectorC& rhs) const {
  VectorC r = h_->multiply(x) - shift_.z() * x - rhs;
  const double res = r.norm();
  const double bound = residual_scale_ * std::max(1.0, rhs.norm());
  if (!(res <= bound)) {
    std::ostringstream msg;
    msg << "ResolventSolver: residual " << res << " exceeds " << bound;
    if (dense_lu_) msg << " (reciprocal condition estimate " << dense_lu_->rcond() << ")";
    throw NumericalError(msg.str());
  }
}

VectorC ResolventSolver::solve(const VectorC& rhs) const {
  require(static_cast<std::size_t>(rhs.size()) == n_, "ResolventSolver: rhs size mismatch");
  VectorC x = solve_unchecked(rhs);
  check_residual(x, rhs);
  return x;
}

VectorC ResolventSolver::column(std::size_t j) const {
  require(j < n_, "ResolventSolver: column index out of range");
  VectorC e = VectorC::Zero(static_cast<Eigen::Index>(n_));
  e[static_cast<Eigen::Index>(j)] = 1.0;
  return solve(e);
}

cplx ResolventSolver::block_trace(const Block& block) const {
  require(block.offset + block.rank <= n_, "ResolventSolver: block out of range");
  cplx tr{};
  for (std::size_t j = block.offset; j < block.offset + block.rank; ++j) {
    tr += column(j)[static_cast<Eigen::Index>(j)];
  }
  return tr;
}

cplx ResolventSolver::block_trace_squared(const Block& block) const {
  require(block.offset + block.rank <= n_, "ResolventSolver: block out of range");
  cplx tr{};
  for (std::size_t j = block.offset; j < block.offset + block.rank; ++j) {
    tr += solve(column(j))[static_cast<Eigen::Index>(j)];
  }
  return tr;
}

MatrixC ResolventSolver::kernel_block(const Block& target, const Block& source) const {
  require(target.offset + target.rank <= n_ && source.offset + source.rank <= n_,
          "ResolventSolver: block out of range");
  MatrixC out(static_cast<Eigen::Index>(target.rank), static_cast<Eigen::Index>(source.rank));
  for (std::size_t c = 0; c < source.rank; ++c) {
    const VectorC col = column(source.offset + c);
    out.col(static_cast<Eigen::Index>(c)) =
        col.segment(static_cast<Eigen::Index>(target.offset), static_cast<Eigen::Index>(target.rank));
  }
  return out;
}

// --- Eigensystem ------------------------------------------------------------

Eigensystem::Eigensystem(const Hamiltonian& h) { decompose(h.dense()); }
Eigensystem::Eigensystem(const MatrixC& h) { decompose(h); }

void Eigensystem::decompose(const MatrixC& h) {
  require(h.rows() == h.cols(), "Eigensystem: matrix must be square");
  Eigen::SelfAdjointEigenSolver<MatrixC> solver(h);
  if (solver.info() != Eigen::Success) throw NumericalError("Eigensystem: eigensolver failed");
  values_ = solver.eigenvalues();
  vectors_ = solver.eigenvectors();
}

double Eigensystem::projector_trace(const Block& block, double energy) const {
  require(block.offset + block.rank <= static_cast<std::size_t>(values_.size()),
          "projector_trace: block out of range");
  if (values_.size() == 0 || energy < values_[0]) return 0.0;
  if (energy >= values_[values_.size() - 1]) return static_cast<double>(block.rank);
  double tr = 0.0;
  // Eigenvalues are ascending.
  for (Eigen::Index k = 0; k < values_.size() && values_[k] <= energy; ++k) {
    tr += vectors_.col(k)
              .segment(static_cast<Eigen::Index>(block.offset), static_cast<Eigen::Index>(block.rank))
              .squaredNorm();
  }
  return tr;
}

// --- free functions ---------------------------------------------------------

MatrixC resolvent_columns(const Hamiltonian& h, const ComplexShift& z,
                          std::span<const std::size_t> cols) {
  ResolventSolver solver(h, z);
  MatrixC out(static_cast<Eigen::Index>(h.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = solver.column(cols[c]);
  return out;
}

double spectral_norm(const MatrixC& m) {
  if (m.size() == 0) return 0.0;
  if (m.size() == 1) return std::abs(m(0, 0));
  Eigen::JacobiSVD<MatrixC> svd(m);
  return svd.singularValues()(0);
}

double kernel_block_norm(const Hamiltonian& h, const ComplexShift& z, const Block& target,
                         const Block& source) {
  ResolventSolver solver(h, z);
  return spectral_norm(solver.kernel_block(target, source));
}

double spectral_projector_trace(const Hamiltonian& h, const Block& p0, double energy) {
  return Eigensystem(h).projector_trace(p0, energy);
}

double min_imaginary_eigenvalue(const MatrixC& a) {
  require(a.rows() == a.cols(), "min_imaginary_eigenvalue: matrix must be square");
  if (a.size() == 0) return 0.0;
  const MatrixC im = (a - a.adjoint()) / cplx(0.0, 2.0);
  Eigen::SelfAdjointEigenSolver<MatrixC> solver(im, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

}  // namespace dosreg
