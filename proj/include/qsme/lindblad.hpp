// Superoperators of the master-equation family: the Lindblad generator of
// the averaged dynamics, the normalized jump map of a counting channel, and
// the drift vector field driven by each Brownian noise.
#pragma once

#include "qsme/operator_set.hpp"
#include "qsme/state.hpp"
#include "qsme/types.hpp"

namespace qsme {

/// Below this intensity a jump channel is treated as switched off: the jump
/// map returns its input flagged degenerate instead of dividing by a
/// vanishing trace.
inline constexpr double kDegenerateIntensity = 1e-14;

/// Selects how the scaled jump channels enter the Lindblad generator:
/// through their base operators A_j or through the full D_j = A_j + I/eps.
/// When the admissibility condition holds the two agree identically.
enum class ScaledAs { base_a, scaled_d_eps };

namespace detail {

// K rho K^+ - 1/2 {K^+K, rho}
inline void add_dissipator(Mat& out, const Mat& k, const Mat& rho) {
  Mat kk = k.adjoint() * k;
  out += k * rho * k.adjoint();
  out -= 0.5 * (kk * rho + rho * kk);
}

}  // namespace detail

/// Applies the Lindblad generator
///   L(rho) = -i[H, rho] + sum_K (K rho K^+ - 1/2 {K^+K, rho})
/// with K running over the diffusive operators C_i and all jump channels.
/// Scaled channels contribute A_j (base_a) or A_j + I/eps (scaled_d_eps).
inline Mat lindblad_apply(const OperatorSet& ops, const Mat& rho,
                          ScaledAs mode) {
  require_square(rho, "lindblad_apply");
  require_same_dim(ops.hamiltonian, rho, "lindblad_apply");
  Mat out = Complex(0, -1) * (ops.hamiltonian * rho - rho * ops.hamiltonian);
  for (const auto& c : ops.diffusive_ops) detail::add_dissipator(out, c, rho);
  for (const auto& d : ops.jump_ops) detail::add_dissipator(out, d.matrix, rho);
  for (std::size_t j = 0; j < ops.scaled_jump_ops.size(); ++j) {
    if (mode == ScaledAs::base_a)
      detail::add_dissipator(out, ops.scaled_jump_ops[j].matrix, rho);
    else
      detail::add_dissipator(out, ops.scaled_op(j), rho);
  }
  return out;
}

struct JumpResult {
  DensityMatrix state;
  double intensity = 0.0;
  bool degenerate = false;
};

/// Normalized jump map rho -> D rho D^+ / tr[D rho D^+] together with the
/// stochastic intensity tr[D rho D^+]. When the intensity vanishes the jump
/// cannot fire; the input state is returned flagged degenerate.
inline JumpResult jump_map(const Mat& d, const DensityMatrix& rho) {
  require_same_dim(d, rho.rho, "jump_map");
  Mat num = d * rho.rho * d.adjoint();
  const double intensity = std::max(0.0, num.trace().real());
  if (intensity <= kDegenerateIntensity)
    return {rho, intensity, true};
  num /= intensity;
  return {DensityMatrix(std::move(num)), intensity, false};
}

/// Drift vector field of one diffusive channel,
///   h_A(rho) = A rho + rho A^+ - tr[rho (A + A^+)] rho.
/// Hermitian and traceless for Hermitian trace-one input.
inline Mat diffusive_drift(const Mat& a, const Mat& rho) {
  require_same_dim(a, rho, "diffusive_drift");
  const double expect = re_trace_prod(rho, Mat(a + Mat(a.adjoint())));
  Mat out = a * rho + rho * a.adjoint();
  out -= expect * rho;
  return out;
}

}  // namespace qsme
