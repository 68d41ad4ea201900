// Markov generators of the jump family and of its diffusive limit, the
// sampled uniform-convergence scan over the state set, and Monte-Carlo
// martingale residuals over trajectory ensembles.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "qsme/functionals.hpp"
#include "qsme/lindblad.hpp"
#include "qsme/operator_set.hpp"
#include "qsme/rng.hpp"
#include "qsme/simulate.hpp"
#include "qsme/state.hpp"

namespace qsme {

namespace detail {

/// Jump bracket [f(J_D rho) - f(rho) - Df(rho)[J_D rho - rho]] * tr[D rho D^+];
/// zero for channels with degenerate intensity.
inline double jump_bracket(const TestFunctional& f, const Mat& d,
                           const DensityMatrix& rho) {
  const JumpResult jr = jump_map(d, rho);
  if (jr.degenerate) return 0.0;
  const Mat w = jr.state.rho - rho.rho;
  return (f.value(jr.state.rho) - f.value(rho.rho) - f.d1(rho.rho, w)) *
         jr.intensity;
}

}  // namespace detail

/// Generator of the jump family at finite epsilon:
///   A_eps f = Df(L_eps(rho)) + sum over counting channels of the jump
///   bracket (scaled channels with D_j = A_j + I/eps)
/// plus the quadratic term of any plain Brownian channels C_i.
inline double generator_eps(const TestFunctional& f, const OperatorSet& ops,
                            const DensityMatrix& rho) {
  require_same_dim(ops.hamiltonian, rho.rho, "generator_eps");
  double out = f.d1(rho.rho, lindblad_apply(ops, rho.rho,
                                            ScaledAs::scaled_d_eps));
  for (const auto& d : ops.jump_ops)
    out += detail::jump_bracket(f, d.matrix, rho);
  for (std::size_t j = 0; j < ops.scaled_jump_ops.size(); ++j)
    out += detail::jump_bracket(f, ops.scaled_op(j), rho);
  for (const auto& c : ops.diffusive_ops) {
    const Mat h = diffusive_drift(c, rho.rho);
    out += 0.5 * f.d2(rho.rho, h, h);
  }
  return out;
}

/// Generator of the limit process:
///   A f = Df(L(rho)) + unscaled jump brackets
///         + 1/2 sum_j D^2 f(h_j(rho), h_j(rho))
/// where h_j runs over the scaled bases A_j and any plain Brownian C_i.
inline double generator_limit(const TestFunctional& f, const OperatorSet& ops,
                              const DensityMatrix& rho) {
  require_same_dim(ops.hamiltonian, rho.rho, "generator_limit");
  double out = f.d1(rho.rho, lindblad_apply(ops, rho.rho, ScaledAs::base_a));
  for (const auto& d : ops.jump_ops)
    out += detail::jump_bracket(f, d.matrix, rho);
  for (const auto& a : ops.scaled_jump_ops) {
    const Mat h = diffusive_drift(a.matrix, rho.rho);
    out += 0.5 * f.d2(rho.rho, h, h);
  }
  for (const auto& c : ops.diffusive_ops) {
    const Mat h = diffusive_drift(c, rho.rho);
    out += 0.5 * f.d2(rho.rho, h, h);
  }
  return out;
}

/// Random state with full support on the state set: Haar-random unitary
/// (QR of a Ginibre matrix with phase-fixed diagonal) applied to a flat
/// Dirichlet spectrum.
inline DensityMatrix sample_state(int dim, NoiseStream& stream) {
  Mat g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      g(i, j) = Complex(stream.normal(), stream.normal());
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat(identity(dim));
  Mat r = qr.matrixQR();
  for (int i = 0; i < dim; ++i) {
    const Complex rd = r(i, i);
    const Complex phase = rd == Complex(0) ? Complex(1) : rd / std::abs(rd);
    q.col(i) *= phase;
  }
  // Dirichlet(1, ..., 1) spectrum from normalized exponentials.
  Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1> spectrum(dim);
  double total = 0.0;
  for (int i = 0; i < dim; ++i) {
    spectrum(i) = stream.exponential(1.0);
    total += spectrum(i);
  }
  spectrum /= total;
  Mat rho = q * spectrum.asDiagonal() * q.adjoint();
  return DensityMatrix(std::move(rho));
}

struct ScanRow {
  double epsilon = 0.0;
  double sup_diff = 0.0;  // sampled sup over states of |A_eps f - A f|
};

struct ScanResult {
  std::vector<ScanRow> rows;
  double fitted_order = 0.0;  // least-squares slope of log sup vs log eps
  double condition_residual = 0.0;
  bool converges = false;  // fitted_order >= 0.9
};

/// Evaluates sup_rho |A_eps f - A f| over a fixed sample of states for each
/// epsilon and fits the order in epsilon on log-log pairs. The sup is a
/// sampled maximum, not a certified bound.
inline ScanResult uniform_convergence_scan(const TestFunctional& f,
                                           OperatorSet ops,
                                           const std::vector<double>& eps_list,
                                           int sample_count,
                                           std::uint64_t seed) {
  if (eps_list.size() < 3)
    throw Error("uniform_convergence_scan: need at least 3 epsilon values");
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1]))
      throw Error("uniform_convergence_scan: epsilon list must be strictly "
                  "decreasing");
  if (sample_count < 50)
    throw Error("uniform_convergence_scan: need at least 50 sampled states");
  if (ops.scaled_jump_ops.empty())
    throw Error("uniform_convergence_scan: no scaled jump channels");

  NoiseStream stream(StreamKey{seed, 0, "state-sampler"});
  std::vector<DensityMatrix> states;
  states.reserve(std::size_t(sample_count));
  for (int i = 0; i < sample_count; ++i)
    states.push_back(sample_state(ops.dim(), stream));

  ScanResult result;
  result.condition_residual = condition_residual(ops);
  for (double eps : eps_list) {
    ops.epsilon = eps;
    double sup = 0.0;
    for (const auto& rho : states)
      sup = std::max(sup, std::abs(generator_eps(f, ops, rho) -
                                   generator_limit(f, ops, rho)));
    result.rows.push_back({eps, sup});
  }

  // Least-squares slope on (log eps, log sup).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(result.rows.size());
  for (const auto& row : result.rows) {
    const double x = std::log(row.epsilon);
    const double y = std::log(std::max(row.sup_diff, 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  result.fitted_order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  result.converges = result.fitted_order >= 0.9;
  return result;
}

enum class WhichGenerator { eps, limit };

struct MartingaleEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
};

namespace detail {

inline std::size_t grid_index(const TrajectoryPath& path, double t) {
  const auto& times = path.times;
  auto it = std::lower_bound(times.begin(), times.end(), t - 1e-9);
  if (it == times.end() || std::abs(*it - t) > 1e-6)
    throw Error("martingale_residual: time " + std::to_string(t) +
                " not on the recorded grid");
  return std::size_t(it - times.begin());
}

}  // namespace detail

/// Monte-Carlo estimate of
///   E[(f(rho_{t+s}) - f(rho_t) - int_t^{t+s} A f(rho_u) du)
///      prod_i theta_i(rho_{t_i})]
/// with the time integral taken by the trapezoid rule on the recorded grid.
inline MartingaleEstimate martingale_residual(
    const TestFunctional& f, const std::vector<WeightFunctional>& weights,
    const std::vector<TrajectoryPath>& ensemble, double t, double s,
    const OperatorSet& ops, WhichGenerator which = WhichGenerator::limit) {
  if (ensemble.empty()) throw Error("martingale_residual: empty ensemble");
  if (s <= 0.0) throw Error("martingale_residual: need s > 0");
  for (const auto& w : weights)
    if (w.time > t + 1e-12)
      throw Error("martingale_residual: weight time past t");

  auto gen = [&](const DensityMatrix& rho) {
    return which == WhichGenerator::limit ? generator_limit(f, ops, rho)
                                          : generator_eps(f, ops, rho);
  };

  double sum = 0.0, sumsq = 0.0;
  const std::size_t i0 = detail::grid_index(ensemble.front(), t);
  const std::size_t i1 = detail::grid_index(ensemble.front(), t + s);
  std::vector<std::size_t> w_idx;
  for (const auto& w : weights)
    w_idx.push_back(detail::grid_index(ensemble.front(), w.time));

  for (const auto& path : ensemble) {
    if (path.times.size() != ensemble.front().times.size())
      throw Error("martingale_residual: ensemble grids differ");
    double integral = 0.0;
    double prev = 0.0;
    for (std::size_t k = i0; k <= i1; ++k) {
      const double g = gen(DensityMatrix(path.state(k)));
      if (k > i0)
        integral += 0.5 * (g + prev) * (path.times[k] - path.times[k - 1]);
      prev = g;
    }
    double bracket = f.value(path.state(i1)) - f.value(path.state(i0)) -
                     integral;
    for (std::size_t w = 0; w < weights.size(); ++w)
      bracket *= weights[w].functional.value(path.state(w_idx[w]));
    sum += bracket;
    sumsq += bracket * bracket;
  }
  const double n = double(ensemble.size());
  MartingaleEstimate out;
  out.estimate = sum / n;
  const double var = std::max(0.0, sumsq / n - out.estimate * out.estimate);
  out.standard_error = std::sqrt(var / n);
  return out;
}

}  // namespace qsme
