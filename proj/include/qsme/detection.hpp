// Physical models of balanced photodetection on a driven two-level atom.
//
// Homodyne: two counting channels with operators -+ sqrt(gamma0/2) sigma_-
// e^{-i theta} + I/eps; the offset I/eps is the strongly excited local
// oscillator, eps = sqrt(2)/(sqrt(gamma0) |beta|). The admissibility
// condition holds exactly because the two base operators cancel, so the
// eps -> 0 limit is the diffusive unraveling driven by the same bases.
//
// Heterodyne: the local oscillator is detuned by Delta, which turns the
// diffusive coefficient into h(s, Delta, rho) built from C(s) = C e^{i Delta s}.
// For Delta -> infinity the oscillation averages into two independent
// Brownian channels driving h_+ and i h_-.
#pragma once

#include <cmath>
#include <string>

#include "qsme/lindblad.hpp"
#include "qsme/operator_set.hpp"
#include "qsme/simulate.hpp"
#include "qsme/state.hpp"
#include "qsme/types.hpp"

namespace qsme {

struct HomodyneParams {
  double gamma0 = 1.0;   // spontaneous emission rate
  double theta = 0.0;    // local oscillator phase
  double epsilon = 0.1;  // sqrt(2) / (sqrt(gamma0) |beta|)
  Mat hamiltonian;       // defaults to (rabi/2) sigma_x via make()

  static HomodyneParams make(double gamma0, double theta, double epsilon,
                             double rabi) {
    HomodyneParams p;
    p.gamma0 = gamma0;
    p.theta = theta;
    p.epsilon = epsilon;
    p.hamiltonian = 0.5 * rabi * pauli_x();
    return p;
  }

  void validate() const {
    if (!(gamma0 > 0.0)) throw Error("HomodyneParams: gamma0 must be positive");
    if (!(epsilon > 0.0))
      throw Error("HomodyneParams: epsilon must be positive");
    require_square(hamiltonian, "HomodyneParams.H");
  }

  Mat lowering() const {
    return Mat(std::exp(Complex(0, -theta)) * sigma_minus());
  }
};

struct HeterodyneParams {
  double gamma0 = 1.0;
  double theta = 0.0;
  double delta = 20.0;  // local oscillator detuning
  Mat hamiltonian;

  static HeterodyneParams make(double gamma0, double theta, double delta,
                               double rabi) {
    HeterodyneParams p;
    p.gamma0 = gamma0;
    p.theta = theta;
    p.delta = delta;
    p.hamiltonian = 0.5 * rabi * pauli_x();
    return p;
  }

  void validate() const {
    if (!(gamma0 > 0.0))
      throw Error("HeterodyneParams: gamma0 must be positive");
    if (!(delta > 0.0)) throw Error("HeterodyneParams: delta must be positive");
    require_square(hamiltonian, "HeterodyneParams.H");
  }

  Mat lowering() const {
    return Mat(std::exp(Complex(0, -theta)) * sigma_minus());
  }
};

/// Counting model of homodyne detection: scaled channels with bases
/// A_1 = -sqrt(gamma0/2) sigma_- e^{-i theta}, A_2 = +sqrt(gamma0/2)
/// sigma_- e^{-i theta}. condition_residual of the result is exactly zero.
inline OperatorSet build_homodyne_jump(const HomodyneParams& p) {
  p.validate();
  OperatorSet ops;
  ops.hamiltonian = p.hamiltonian;
  const Mat a = Mat(std::sqrt(p.gamma0 / 2.0) * p.lowering());
  ops.scaled_jump_ops.push_back({"D1", Mat(-a)});
  ops.scaled_jump_ops.push_back({"D2", a});
  ops.epsilon = p.epsilon;
  return ops;
}

/// Diffusive limit of the homodyne model. combined=false keeps the two
/// Brownian channels driven by A_1 and A_2; combined=true merges them into
/// the single channel sqrt(gamma0) sigma_- e^{-i theta} (the difference of
/// the two noises is again a standard Brownian motion). Both share the same
/// Lindblad generator.
inline OperatorSet build_homodyne_limit(const HomodyneParams& p,
                                        bool combined = false) {
  p.validate();
  OperatorSet ops;
  ops.hamiltonian = p.hamiltonian;
  if (combined) {
    ops.diffusive_ops.push_back(Mat(std::sqrt(p.gamma0) * p.lowering()));
  } else {
    const Mat a = Mat(std::sqrt(p.gamma0 / 2.0) * p.lowering());
    ops.diffusive_ops.push_back(Mat(-a));
    ops.diffusive_ops.push_back(a);
  }
  return ops;
}

/// h_+(rho) = sqrt(gamma0/2) (C rho + rho C^+ - tr[rho (C + C^+)] rho).
inline Mat heterodyne_h_plus(const HeterodyneParams& p, const Mat& rho) {
  return diffusive_drift(Mat(std::sqrt(p.gamma0 / 2.0) * p.lowering()), rho);
}

/// i h_-(rho) = sqrt(gamma0/2) i (C rho - rho C^+ - tr[rho (C - C^+)] rho),
/// Hermitian because i C is the drift operator of this channel.
inline Mat heterodyne_ih_minus(const HeterodyneParams& p, const Mat& rho) {
  return diffusive_drift(
      Mat(Complex(0, 1) * std::sqrt(p.gamma0 / 2.0) * p.lowering()), rho);
}

/// Time-dependent diffusive coefficient h(s, Delta, rho) =
/// sqrt(gamma0) (C(s) rho + rho C(s)^+ - tr[rho (C(s) + C(s)^+)] rho) with
/// C(s) = C e^{i Delta s}. Satisfies
///   h(s, Delta, rho) = sqrt(2) (h_+ cos(Delta s) + i h_- sin(Delta s))
/// identically.
inline Mat heterodyne_coefficient(const HeterodyneParams& p, double s,
                                  const DensityMatrix& rho) {
  p.validate();
  const Mat cs = Mat(std::sqrt(p.gamma0) * std::exp(Complex(0, p.delta * s)) *
                     p.lowering());
  return diffusive_drift(cs, rho.rho);
}

/// Finite-detuning heterodyne model: one Brownian channel with operator
/// sqrt(gamma0) C modulated by e^{i Delta s}. Use with simulate_diffusive
/// and the returned config modulation.
inline OperatorSet build_heterodyne(const HeterodyneParams& p) {
  p.validate();
  OperatorSet ops;
  ops.hamiltonian = p.hamiltonian;
  ops.diffusive_ops.push_back(Mat(std::sqrt(p.gamma0) * p.lowering()));
  return ops;
}

inline Modulation heterodyne_modulation(const HeterodyneParams& p) {
  return Modulation{p.delta};
}

/// Large-detuning limit: two independent Brownian channels with operators
/// sqrt(gamma0/2) C and i sqrt(gamma0/2) C, whose drift fields are h_+ and
/// i h_-. Together they reproduce the same Lindblad generator as the
/// finite-Delta model.
inline OperatorSet build_heterodyne_limit(const HeterodyneParams& p) {
  p.validate();
  OperatorSet ops;
  ops.hamiltonian = p.hamiltonian;
  const Mat a = Mat(std::sqrt(p.gamma0 / 2.0) * p.lowering());
  ops.diffusive_ops.push_back(a);
  ops.diffusive_ops.push_back(Mat(Complex(0, 1) * a));
  return ops;
}

}  // namespace qsme
