// Basic matrix types and helpers shared by the whole library.
//
// Everything works on dense complex matrices of small dimension. Sizes are
// dynamic but bounded by kMaxDim, so Eigen keeps all storage on the stack
// and products stay in the coefficient-based (allocation-free) path.
#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qsme {

inline constexpr int kMaxDim = 8;

using Complex = std::complex<double>;
using Mat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic,
                          Eigen::RowMajor, kMaxDim, kMaxDim>;

/// Error type for all structured failures (bad input, dimension mismatch,
/// state blow-up during integration).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double fro_norm(const Mat& m) { return m.norm(); }

inline bool all_finite(const Mat& m) { return m.allFinite(); }

/// ||M - M^+||_F, zero for exactly Hermitian input.
inline double hermiticity_defect(const Mat& m) {
  return (m - m.adjoint()).norm();
}

inline Mat hermitize(const Mat& m) { return 0.5 * (m + Mat(m.adjoint())); }

/// tr(a b) without forming the product.
inline Complex trace_prod(const Mat& a, const Mat& b) {
  return a.cwiseProduct(b.transpose()).sum();
}

inline double re_trace_prod(const Mat& a, const Mat& b) {
  return trace_prod(a, b).real();
}

inline void require_square(const Mat& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 1)
    throw Error(std::string(what) + ": matrix must be square and nonempty");
  if (m.rows() > kMaxDim)
    throw Error(std::string(what) + ": dimension exceeds supported maximum " +
                std::to_string(kMaxDim));
}

inline void require_same_dim(const Mat& a, const Mat& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(std::string(what) + ": dimension mismatch (" +
                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                " vs " + std::to_string(b.rows()) + "x" +
                std::to_string(b.cols()) + ")");
}

// Qubit operators used throughout tests and the detection presets.
inline Mat pauli_x() {
  Mat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

inline Mat pauli_y() {
  Mat m(2, 2);
  m << 0, Complex(0, -1), Complex(0, 1), 0;
  return m;
}

inline Mat pauli_z() {
  Mat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

/// Lowering operator, maps the excited basis state e_2 onto the ground
/// state e_1.
inline Mat sigma_minus() {
  Mat m(2, 2);
  m << 0, 1, 0, 0;
  return m;
}

inline Mat sigma_plus() { return sigma_minus().adjoint(); }

inline Mat identity(int dim) { return Mat::Identity(dim, dim); }

inline Mat zero(int dim) { return Mat::Zero(dim, dim); }

}  // namespace qsme
