// Time integration of the three equation families: the jump / jump-diffusion
// master equation (counting noise, optionally with epsilon-scaled channels),
// its diffusive limit (Brownian noise), and the deterministic Lindblad ODE
// solved as an oracle for ensemble means.
//
// Two jump schemes are provided. euler_bernoulli fires each channel with
// probability min(1, intensity * dt) per step and is transparently O(dt)
// biased. thinning_exact draws candidate jumps of a dominating homogeneous
// Poisson process per channel and accepts a candidate at time u iff its mark
// lies below tr[D rho_{u-} D^+]; between events the deterministic drift is
// integrated with classical 4th-order steps (or Euler-Maruyama substeps when
// Brownian channels are present), so the jump law is exact modulo drift
// integration error.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qsme/lindblad.hpp"
#include "qsme/operator_set.hpp"
#include "qsme/rng.hpp"
#include "qsme/state.hpp"
#include "qsme/types.hpp"

namespace qsme {

enum class Scheme { euler_bernoulli, thinning_exact };

inline const char* scheme_name(Scheme s) {
  return s == Scheme::euler_bernoulli ? "euler_bernoulli" : "thinning_exact";
}

/// Time-dependent phase on the diffusive noise coefficients: channel
/// operators become A e^{i delta s}. The Lindblad part is unaffected since
/// the phase cancels in A^+A and A rho A^+.
struct Modulation {
  double delta = 0.0;
};

struct SimConfig {
  double t_final = 1.0;
  double dt = 1e-3;
  Scheme scheme = Scheme::thinning_exact;
  int record_stride = 1;
  std::optional<double> epsilon;  // overrides OperatorSet::epsilon when set
  std::optional<Modulation> time_dependent;

  void validate() const {
    if (!(t_final > 0.0)) throw Error("SimConfig: t_final must be positive");
    if (!(dt > 0.0)) throw Error("SimConfig: dt must be positive");
    if (dt > t_final) throw Error("SimConfig: dt must not exceed t_final");
    if (record_stride < 1) throw Error("SimConfig: record_stride must be >= 1");
    if (epsilon && !(*epsilon > 0.0))
      throw Error("SimConfig: epsilon must be positive");
  }

  std::size_t n_steps() const {
    return static_cast<std::size_t>(
        std::max<long long>(1, std::llround(t_final / dt)));
  }

  double step_size() const { return t_final / double(n_steps()); }
};

/// Step size used by the preset harness: 1e-3 down to epsilon = 0.05, then
/// eps^2/10 so the O(1/eps^2) jump rate stays resolved by >= 10 steps per
/// expected jump.
inline double default_dt_for_epsilon(double eps) {
  return eps >= 0.05 ? 1e-3 : eps * eps / 10.0;
}

struct JumpEvent {
  double time = 0.0;
  int channel = 0;  // index into TrajectoryPath::channel_labels
};

/// One recorded sample path. States are stored post-jump at jump times
/// (cadlag convention) on the recording grid, flattened row-major.
struct TrajectoryPath {
  int dim = 0;
  std::vector<double> times;
  std::vector<Complex> data;
  std::vector<std::string> channel_labels;
  std::vector<JumpEvent> jumps;

  std::size_t n_times() const { return times.size(); }

  Mat state(std::size_t k) const {
    Mat m(dim, dim);
    const Complex* p = data.data() + k * std::size_t(dim) * dim;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) m(i, j) = p[i * dim + j];
    return m;
  }

  void push(double t, const Mat& m) {
    times.push_back(t);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) data.push_back(m(i, j));
  }

  std::vector<std::size_t> jump_counts() const {
    std::vector<std::size_t> counts(channel_labels.size(), 0);
    for (const auto& e : jumps) counts[std::size_t(e.channel)]++;
    return counts;
  }
};

namespace detail {

struct JumpChannel {
  std::string label;
  Mat op;
  Mat gram;  // op^+ op
};

struct DiffChannel {
  Mat op;
  Mat gram;
};

struct StepperModel {
  int dim = 0;
  Mat hamiltonian;
  std::vector<DiffChannel> diffusive;
  std::vector<JumpChannel> jumps;
  std::optional<Modulation> modulation;
};

inline OperatorSet with_epsilon(const OperatorSet& ops, const SimConfig& cfg) {
  if (!cfg.epsilon) return ops;
  OperatorSet copy = ops;
  copy.epsilon = *cfg.epsilon;
  return copy;
}

/// Jump family: Brownian channels are the C_i, counting channels are the
/// unscaled D_i plus the scaled D_j = A_j + I/eps.
inline StepperModel make_jump_model(const OperatorSet& ops,
                                    const SimConfig& cfg) {
  StepperModel m;
  m.dim = ops.dim();
  m.hamiltonian = ops.hamiltonian;
  m.modulation = cfg.time_dependent;
  for (const auto& c : ops.diffusive_ops)
    m.diffusive.push_back({c, Mat(c.adjoint() * c)});
  for (const auto& d : ops.jump_ops)
    m.jumps.push_back({d.label, d.matrix, Mat(d.matrix.adjoint() * d.matrix)});
  for (std::size_t j = 0; j < ops.scaled_jump_ops.size(); ++j) {
    Mat d = ops.scaled_op(j);
    m.jumps.push_back(
        {ops.scaled_jump_ops[j].label, d, Mat(d.adjoint() * d)});
  }
  return m;
}

/// Diffusive limit family: Brownian channels are the C_i plus the scaled
/// bases A_j; only the unscaled D_i remain counting channels.
inline StepperModel make_diffusive_model(const OperatorSet& ops,
                                         const SimConfig& cfg) {
  StepperModel m;
  m.dim = ops.dim();
  m.hamiltonian = ops.hamiltonian;
  m.modulation = cfg.time_dependent;
  for (const auto& c : ops.diffusive_ops)
    m.diffusive.push_back({c, Mat(c.adjoint() * c)});
  for (const auto& a : ops.scaled_jump_ops)
    m.diffusive.push_back({a.matrix, Mat(a.matrix.adjoint() * a.matrix)});
  for (const auto& d : ops.jump_ops)
    m.jumps.push_back({d.label, d.matrix, Mat(d.matrix.adjoint() * d.matrix)});
  return m;
}

/// Deterministic between-jump drift. The counting channels enter through
/// their compensated form: the D rho D^+ of the Lindblad part cancels
/// against the compensator, leaving tr[D rho D^+] rho - 1/2 {D^+D, rho}.
inline Mat drift(const StepperModel& m, const Mat& rho) {
  Mat out = Complex(0, -1) * (m.hamiltonian * rho - rho * m.hamiltonian);
  for (const auto& c : m.diffusive) {
    out += c.op * rho * c.op.adjoint();
    out -= 0.5 * (c.gram * rho + rho * c.gram);
  }
  for (const auto& j : m.jumps) {
    const double lambda = std::max(0.0, re_trace_prod(j.gram, rho));
    out += lambda * rho;
    out -= 0.5 * (j.gram * rho + rho * j.gram);
  }
  return out;
}

inline Mat noise_op(const StepperModel& m, std::size_t k, double t) {
  if (!m.modulation) return m.diffusive[k].op;
  return Mat(std::exp(Complex(0, m.modulation->delta * t)) *
             m.diffusive[k].op);
}

inline void rk4_step(const StepperModel& m, Mat& rho, double h) {
  Mat k1 = drift(m, rho);
  Mat k2 = drift(m, Mat(rho + 0.5 * h * k1));
  Mat k3 = drift(m, Mat(rho + 0.5 * h * k2));
  Mat k4 = drift(m, Mat(rho + h * k3));
  rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

[[noreturn]] inline void blow_up(double t, const std::string& channel,
                                 const std::string& why) {
  throw Error("simulate: state blow-up at t=" + std::to_string(t) +
              " (channel " + channel + "): " + why);
}

/// Advances the continuous part of the dynamics from t0 to t1 (one
/// Euler-Maruyama step with Brownian channels, one 4th-order step without).
inline void advance_continuous(const StepperModel& m, Mat& rho, double t0,
                               double t1,
                               std::vector<NoiseStream>& brownian) {
  const double h = t1 - t0;
  if (h <= 0.0) return;
  if (m.diffusive.empty()) {
    rk4_step(m, rho, h);
    if (!all_finite(rho)) blow_up(t1, "-", "non-finite state");
    return;
  }
  Mat next = rho + h * drift(m, rho);
  for (std::size_t k = 0; k < m.diffusive.size(); ++k) {
    const double dw = brownian_increment(brownian[k], h);
    next += dw * diffusive_drift(noise_op(m, k, t0), rho);
  }
  try {
    rho = project_to_state(next).rho;
  } catch (const Error& e) {
    blow_up(t1, "-", e.what());
  }
}

inline TrajectoryPath run_path(const StepperModel& model,
                               const OperatorSet& /*ops*/,
                               const DensityMatrix& rho0, const SimConfig& cfg,
                               const StreamKey& base_key) {
  TrajectoryPath path;
  path.dim = model.dim;
  for (const auto& j : model.jumps) path.channel_labels.push_back(j.label);

  std::vector<NoiseStream> brownian;
  for (std::size_t k = 0; k < model.diffusive.size(); ++k)
    brownian.emplace_back(
        base_key.with_channel("brownian-" + std::to_string(k)));
  std::vector<NoiseStream> jump_streams;
  for (const auto& j : model.jumps)
    jump_streams.emplace_back(base_key.with_channel(j.label));

  const std::size_t n_steps = cfg.n_steps();
  const double h = cfg.step_size();
  const double t_final = cfg.t_final;

  // Candidate jumps for the thinning scheme, merged over channels in time
  // order (ties broken by channel index for determinism).
  struct Event {
    double time;
    double mark;
    int channel;
  };
  std::vector<Event> events;
  if (cfg.scheme == Scheme::thinning_exact) {
    for (std::size_t c = 0; c < model.jumps.size(); ++c) {
      const double bound = intensity_bound(model.jumps[c].op);
      for (const auto& cand :
           candidate_jumps(jump_streams[c], 0.0, t_final, bound))
        events.push_back({cand.time, cand.mark, int(c)});
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
      return a.time != b.time ? a.time < b.time : a.channel < b.channel;
    });
  } else {
    // Accuracy regime of the per-step Bernoulli scheme.
    for (const auto& j : model.jumps) {
      const double bound = intensity_bound(j.op);
      if (h * bound > 0.1)
        throw Error("SimConfig: euler_bernoulli requires dt * intensity bound "
                    "<= 0.1 (channel " + j.label + " has bound " +
                    std::to_string(bound) + ")");
    }
  }

  Mat rho = rho0.rho;
  auto record = [&](double t) {
    try {
      path.push(t, project_to_state(rho).rho);
    } catch (const Error& e) {
      blow_up(t, "-", e.what());
    }
  };

  std::size_t next_event = 0;
  for (std::size_t m = 0; m < n_steps; ++m) {
    const double t0 = double(m) * h;
    const double t1 = (m + 1 == n_steps) ? t_final : double(m + 1) * h;
    if (m % std::size_t(cfg.record_stride) == 0) record(t0);

    if (cfg.scheme == Scheme::thinning_exact) {
      double t = t0;
      while (next_event < events.size() && events[next_event].time <= t1) {
        const Event& ev = events[next_event];
        advance_continuous(model, rho, t, ev.time, brownian);
        const auto& ch = model.jumps[std::size_t(ev.channel)];
        const double lambda = std::max(0.0, re_trace_prod(ch.gram, rho));
        if (ev.mark < lambda) {
          JumpResult jr = jump_map(ch.op, DensityMatrix(rho));
          if (!jr.degenerate) {
            rho = jr.state.rho;
            path.jumps.push_back({ev.time, ev.channel});
          }
        }
        t = ev.time;
        ++next_event;
      }
      advance_continuous(model, rho, t, t1, brownian);
    } else {
      // Intensities at the left endpoint drive the Bernoulli draws.
      std::vector<double> lambdas(model.jumps.size());
      for (std::size_t c = 0; c < model.jumps.size(); ++c)
        lambdas[c] = std::max(0.0, re_trace_prod(model.jumps[c].gram, rho));

      Mat next = rho + (t1 - t0) * drift(model, rho);
      for (std::size_t k = 0; k < model.diffusive.size(); ++k) {
        const double dw = brownian_increment(brownian[k], t1 - t0);
        next += dw * diffusive_drift(noise_op(model, k, t0), rho);
      }
      if (model.diffusive.empty()) {
        rho = std::move(next);
        if (!all_finite(rho)) blow_up(t1, "-", "non-finite state");
      } else {
        try {
          rho = project_to_state(next).rho;
        } catch (const Error& e) {
          blow_up(t1, "-", e.what());
        }
      }

      for (std::size_t c = 0; c < model.jumps.size(); ++c) {
        const double p = std::min(1.0, lambdas[c] * (t1 - t0));
        if (jump_streams[c].uniform() < p) {
          JumpResult jr = jump_map(model.jumps[c].op, DensityMatrix(rho));
          if (!jr.degenerate) {
            rho = jr.state.rho;
            path.jumps.push_back({t1, int(c)});
          }
        }
      }
    }
  }
  record(t_final);
  return path;
}

}  // namespace detail

/// Solves the jump / jump-diffusion master equation. Scaled channels fire
/// with their full operators A_j + I/eps.
inline TrajectoryPath simulate_jump_diffusion(const OperatorSet& ops,
                                              const DensityMatrix& rho0,
                                              const SimConfig& cfg,
                                              const StreamKey& key) {
  ops.validate();
  rho0.validate();
  cfg.validate();
  require_same_dim(ops.hamiltonian, rho0.rho, "simulate_jump_diffusion");
  const OperatorSet eff = detail::with_epsilon(ops, cfg);
  return detail::run_path(detail::make_jump_model(eff, cfg), eff, rho0, cfg,
                          key);
}

/// Solves the diffusive limit equation: the scaled bases A_j drive Brownian
/// noises, remaining unscaled jump channels keep counting noise.
inline TrajectoryPath simulate_diffusive(const OperatorSet& ops,
                                         const DensityMatrix& rho0,
                                         const SimConfig& cfg,
                                         const StreamKey& key) {
  ops.validate();
  rho0.validate();
  cfg.validate();
  require_same_dim(ops.hamiltonian, rho0.rho, "simulate_diffusive");
  const OperatorSet eff = detail::with_epsilon(ops, cfg);
  return detail::run_path(detail::make_diffusive_model(eff, cfg), eff, rho0,
                          cfg, key);
}

/// Deterministic master equation d rho/dt = L(rho) integrated with classical
/// 4th-order fixed steps; the oracle for ensemble means.
inline TrajectoryPath lindblad_ode_solve(const OperatorSet& ops,
                                         const DensityMatrix& rho0,
                                         const SimConfig& cfg) {
  ops.validate();
  rho0.validate();
  cfg.validate();
  require_same_dim(ops.hamiltonian, rho0.rho, "lindblad_ode_solve");

  TrajectoryPath path;
  path.dim = ops.dim();
  const std::size_t n_steps = cfg.n_steps();
  const double h = cfg.step_size();
  Mat rho = rho0.rho;
  auto deriv = [&](const Mat& r) {
    return lindblad_apply(ops, r, ScaledAs::base_a);
  };
  for (std::size_t m = 0; m < n_steps; ++m) {
    if (m % std::size_t(cfg.record_stride) == 0)
      path.push(double(m) * h, project_to_state(rho).rho);
    Mat k1 = deriv(rho);
    Mat k2 = deriv(Mat(rho + 0.5 * h * k1));
    Mat k3 = deriv(Mat(rho + 0.5 * h * k2));
    Mat k4 = deriv(Mat(rho + h * k3));
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!all_finite(rho))
      detail::blow_up(double(m + 1) * h, "-", "non-finite state");
  }
  path.push(cfg.t_final, project_to_state(rho).rho);
  return path;
}

}  // namespace qsme
