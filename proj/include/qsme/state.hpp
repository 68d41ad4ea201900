// Density matrices: validation against the state-set invariants and the
// projection used to renormalize states after discrete integration steps.
#pragma once

#include <string>

#include "qsme/types.hpp"

namespace qsme {

// Tolerances for state validation. Hermiticity/trace allow for double
// precision accumulation over ~1e5 integration steps; the positivity slack
// absorbs eigenvalue round-off.
inline constexpr double kStateHermTol = 1e-10;
inline constexpr double kStateTraceTol = 1e-10;
inline constexpr double kStateEigSlack = 1e-9;

struct DensityMatrix {
  Mat rho;

  DensityMatrix() = default;
  explicit DensityMatrix(Mat m) : rho(std::move(m)) {}

  int dim() const { return static_cast<int>(rho.rows()); }

  /// Throws Error if the matrix violates the state invariants
  /// (Hermitian, trace one, positive semidefinite up to slack).
  void validate() const {
    require_square(rho, "DensityMatrix");
    if (!all_finite(rho)) throw Error("DensityMatrix: non-finite entries");
    const double herm = hermiticity_defect(rho);
    if (herm > kStateHermTol)
      throw Error("DensityMatrix: not Hermitian, defect " +
                  std::to_string(herm));
    const double tr_err = std::abs(rho.trace() - Complex(1.0));
    if (tr_err > kStateTraceTol)
      throw Error("DensityMatrix: trace deviates from one by " +
                  std::to_string(tr_err));
    Eigen::SelfAdjointEigenSolver<Mat> es(hermitize(rho),
                                          Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < -kStateEigSlack)
      throw Error("DensityMatrix: negative eigenvalue " +
                  std::to_string(min_eig));
  }

  bool is_valid() const {
    try {
      validate();
    } catch (const Error&) {
      return false;
    }
    return true;
  }
};

/// Ground state |e_1><e_1|.
inline DensityMatrix ground_state(int dim) {
  Mat m = zero(dim);
  m(0, 0) = 1.0;
  return DensityMatrix(m);
}

inline DensityMatrix excited_state_qubit() {
  Mat m = zero(2);
  m(1, 1) = 1.0;
  return DensityMatrix(m);
}

inline DensityMatrix maximally_mixed(int dim) {
  return DensityMatrix(Mat(identity(dim) / double(dim)));
}

/// Projects a matrix back onto the state set: Hermitize, clip negative
/// eigenvalues to zero, renormalize the trace to one. Idempotent on valid
/// states. Throws Error when the trace after clipping is not positive,
/// which signals integration blow-up.
inline DensityMatrix project_to_state(const Mat& m) {
  require_square(m, "project_to_state");
  if (!all_finite(m)) throw Error("project_to_state: non-finite entries");
  const double tr_re = m.trace().real();
  if (std::abs(tr_re - 1.0) > 0.5)
    throw Error("project_to_state: trace " + std::to_string(tr_re) +
                " too far from one");

  Mat h = hermitize(m);
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  const auto& eigs = es.eigenvalues();
  if (eigs.minCoeff() >= 0.0) {
    // No clipping needed; rescale in place so exact inputs pass through
    // unchanged.
    const double tr = h.trace().real();
    if (tr <= 0.0) throw Error("project_to_state: nonpositive trace");
    if (tr != 1.0) h /= tr;
    return DensityMatrix(std::move(h));
  }

  Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1> clipped =
      eigs.cwiseMax(0.0);
  const double total = clipped.sum();
  if (total <= 0.0)
    throw Error("project_to_state: state collapsed, trace " +
                std::to_string(total) + " after clipping");
  clipped /= total;
  Mat out = es.eigenvectors() * clipped.asDiagonal() *
            es.eigenvectors().adjoint();
  return DensityMatrix(std::move(out));
}

}  // namespace qsme
