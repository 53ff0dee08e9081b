#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace dosreg {

using cplx = std::complex<double>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input rejected before any numerical work started (bad ranges, sizes,
/// malformed configs). The CLI maps this to exit status 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine could not deliver its contract (solver residual,
/// rejection cap, quadrature non-convergence). The CLI maps this to exit 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace dosreg
