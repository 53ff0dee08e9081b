#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "dosreg/common.hpp"

namespace dosreg {

using MatrixC = Eigen::MatrixXcd;
using VectorC = Eigen::VectorXcd;

/// z = E + i*eps with eps strictly positive.
class ComplexShift {
 public:
  ComplexShift(double energy, double eps);

  double energy() const noexcept { return energy_; }
  double eps() const noexcept { return eps_; }
  cplx z() const noexcept { return {energy_, eps_}; }

 private:
  double energy_;
  double eps_;
};

/// Contiguous group of coordinates carried by one projection P_n.
struct Block {
  std::size_t offset = 0;
  std::size_t rank = 1;
};

/// Square complex matrix in band storage: entries with |i - j| <= bandwidth.
class BandedMatrix {
 public:
  BandedMatrix() = default;
  BandedMatrix(std::size_t n, std::size_t bandwidth);

  std::size_t size() const noexcept { return n_; }
  std::size_t bandwidth() const noexcept { return bw_; }

  bool in_band(std::size_t i, std::size_t j) const noexcept {
    return (i > j ? i - j : j - i) <= bw_;
  }
  cplx& at(std::size_t i, std::size_t j) noexcept { return data_[index(i, j)]; }
  cplx at(std::size_t i, std::size_t j) const noexcept { return data_[index(i, j)]; }
  cplx get(std::size_t i, std::size_t j) const noexcept {
    return in_band(i, j) ? data_[index(i, j)] : cplx{};
  }

  MatrixC dense() const;
  VectorC multiply(const VectorC& x) const;

 private:
  std::size_t index(std::size_t i, std::size_t j) const noexcept {
    return i * (2 * bw_ + 1) + (j + bw_ - i);
  }

  std::size_t n_ = 0;
  std::size_t bw_ = 0;
  std::vector<cplx> data_;
};

/// A finite-volume Hermitian operator in dense or band storage. Band storage
/// is the sparse path; dense() converts on demand.
class Hamiltonian {
 public:
  explicit Hamiltonian(MatrixC dense);
  explicit Hamiltonian(BandedMatrix banded);

  std::size_t size() const noexcept;
  bool is_banded() const noexcept { return std::holds_alternative<BandedMatrix>(storage_); }
  const MatrixC* dense_storage() const noexcept { return std::get_if<MatrixC>(&storage_); }
  const BandedMatrix* banded_storage() const noexcept {
    return std::get_if<BandedMatrix>(&storage_);
  }

  MatrixC dense() const;
  VectorC multiply(const VectorC& x) const;
  /// Max absolute row sum, an upper bound on the operator norm.
  double norm_bound() const noexcept { return norm_bound_; }

 private:
  std::variant<MatrixC, BandedMatrix> storage_;
  double norm_bound_ = 0.0;
};

/// Factorization of (h - z) reused for every requested column. Band storage
/// is factored without pivoting: for Hermitian h and Im z > 0 every Schur
/// complement keeps an imaginary part <= -eps, so pivots are bounded below.
class ResolventSolver {
 public:
  ResolventSolver(const Hamiltonian& h, const ComplexShift& z);

  std::size_t size() const noexcept { return n_; }
  const ComplexShift& shift() const noexcept { return shift_; }

  /// Solves (h - z) x = rhs and checks the residual.
  VectorC solve(const VectorC& rhs) const;
  VectorC column(std::size_t j) const;

  /// tr(P (h-z)^-1 P) for the block P.
  cplx block_trace(const Block& block) const;
  /// tr(P (h-z)^-2 P) for the block P.
  cplx block_trace_squared(const Block& block) const;
  /// P_target (h-z)^-1 P_source as a rank(target) x rank(source) matrix.
  MatrixC kernel_block(const Block& target, const Block& source) const;

 private:
  VectorC solve_unchecked(const VectorC& rhs) const;
  void check_residual(const VectorC& x, const VectorC& rhs) const;

  const Hamiltonian* h_;
  ComplexShift shift_;
  std::size_t n_;
  double residual_scale_;
  std::optional<Eigen::PartialPivLU<MatrixC>> dense_lu_;
  BandedMatrix band_lu_;
};

/// Full Hermitian eigendecomposition (dense), for spectral projector traces.
class Eigensystem {
 public:
  explicit Eigensystem(const Hamiltonian& h);
  explicit Eigensystem(const MatrixC& h);

  const Eigen::VectorXd& eigenvalues() const noexcept { return values_; }
  const MatrixC& eigenvectors() const noexcept { return vectors_; }

  /// tr(P E_h((-inf, energy])) = sum over eigenvalues <= energy of |P psi|^2.
  double projector_trace(const Block& block, double energy) const;

 private:
  void decompose(const MatrixC& h);

  Eigen::VectorXd values_;
  MatrixC vectors_;
};

/// Columns cols of (h - z)^-1 (one factorization).
MatrixC resolvent_columns(const Hamiltonian& h, const ComplexShift& z,
                          std::span<const std::size_t> cols);

/// Spectral norm of P_target (h - z)^-1 P_source.
double kernel_block_norm(const Hamiltonian& h, const ComplexShift& z, const Block& target,
                         const Block& source);

/// tr(P0 E_h((-inf, energy])); ties at the energy are counted.
double spectral_projector_trace(const Hamiltonian& h, const Block& p0, double energy);

/// Largest singular value.
double spectral_norm(const MatrixC& m);

/// Smallest eigenvalue of the Hermitian part Im(A) = (A - A*)/(2i).
double min_imaginary_eigenvalue(const MatrixC& a);

/// e^{M} by scaling and squaring with diagonal Pade approximants of degree
/// 3, 5, 7, 9 or 13 (degree picked from the 1-norm).
MatrixC pade_expm(const MatrixC& m);

/// e^{itA} for a matrix with positive semidefinite imaginary part, which makes
/// t -> e^{itA} a contraction semigroup. Rejects t < 0 and inputs whose
/// imaginary part has an eigenvalue below -1e-12 (scaled by max(1, |A|)).
MatrixC dissipative_exp(const MatrixC& a, double t);

}  // namespace dosreg
