#include <array>
#include <cmath>
#include <sstream>

#include "dosreg/spectral.hpp"

namespace dosreg {
namespace {

// Backward-error thresholds on ||M||_1 for the degree 3, 5, 7, 9, 13
// diagonal Pade approximants (Higham 2005).
constexpr std::array<double, 5> kTheta = {1.495585217958292e-2, 2.539398330063230e-1,
                                          9.504178996162932e-1, 2.097847961257068e0,
                                          5.371920351148152e0};

constexpr std::array<double, 4> kB3 = {120.0, 60.0, 12.0, 1.0};
constexpr std::array<double, 6> kB5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
constexpr std::array<double, 8> kB7 = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                       25200.0,    1512.0,    56.0,      1.0};
constexpr std::array<double, 10> kB9 = {17643225600.0, 8821612800.0, 2075673600.0,
                                        302702400.0,   30270240.0,   2162160.0,
                                        110880.0,      3960.0,       90.0,
                                        1.0};
constexpr std::array<double, 14> kB13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};

double one_norm(const MatrixC& m) { return m.cwiseAbs().colwise().sum().maxCoeff(); }

template <std::size_t N>
MatrixC pade_low(const MatrixC& m, const std::array<double, N>& b) {
  const auto n = m.rows();
  const MatrixC id = MatrixC::Identity(n, n);
  const MatrixC m2 = m * m;
  MatrixC u_even = b[1] * id;
  MatrixC v = b[0] * id;
  MatrixC power = id;
  for (std::size_t k = 2; k < N; k += 2) {
    power = power * m2;
    v += b[k] * power;
    if (k + 1 < N) u_even += b[k + 1] * power;
  }
  const MatrixC u = m * u_even;
  return (v - u).partialPivLu().solve(v + u);
}

MatrixC pade13(const MatrixC& m) {
  const auto n = m.rows();
  const auto& b = kB13;
  const MatrixC id = MatrixC::Identity(n, n);
  const MatrixC m2 = m * m;
  const MatrixC m4 = m2 * m2;
  const MatrixC m6 = m4 * m2;
  const MatrixC u_inner = m6 * (b[13] * m6 + b[11] * m4 + b[9] * m2) + b[7] * m6 + b[5] * m4 +
                          b[3] * m2 + b[1] * id;
  const MatrixC u = m * u_inner;
  const MatrixC v = m6 * (b[12] * m6 + b[10] * m4 + b[8] * m2) + b[6] * m6 + b[4] * m4 +
                    b[2] * m2 + b[0] * id;
  return (v - u).partialPivLu().solve(v + u);
}

}  // namespace

MatrixC pade_expm(const MatrixC& m) {
  require(m.rows() == m.cols(), "pade_expm: matrix must be square");
  if (m.size() == 0) return m;
  const double norm = one_norm(m);
  if (!std::isfinite(norm)) throw NumericalError("pade_expm: non-finite input");
  if (norm <= kTheta[0]) return pade_low(m, kB3);
  if (norm <= kTheta[1]) return pade_low(m, kB5);
  if (norm <= kTheta[2]) return pade_low(m, kB7);
  if (norm <= kTheta[3]) return pade_low(m, kB9);
  int squarings = 0;
  if (norm > kTheta[4]) squarings = static_cast<int>(std::ceil(std::log2(norm / kTheta[4])));
  MatrixC r = pade13(m / std::ldexp(1.0, squarings));
  for (int k = 0; k < squarings; ++k) r = r * r;
  return r;
}

MatrixC dissipative_exp(const MatrixC& a, double t) {
  require(a.rows() == a.cols(), "dissipative_exp: matrix must be square");
  require(t >= 0.0 && std::isfinite(t), "dissipative_exp: t must be finite and >= 0");
  const auto n = a.rows();
  if (n == 0) return a;
  const double scale = std::max(1.0, one_norm(a));
  const double min_im = min_imaginary_eigenvalue(a);
  if (min_im < -1e-12 * scale) {
    std::ostringstream msg;
    msg << "dissipative_exp: imaginary part has eigenvalue " << min_im
        << " < 0; e^{itA} is not a contraction";
    throw ValidationError(msg.str());
  }
  if (t == 0.0) return MatrixC::Identity(n, n);
  return pade_expm(cplx(0.0, t) * a);
}

}  // namespace dosreg
