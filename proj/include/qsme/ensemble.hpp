// Ensemble orchestration: reproducible Monte-Carlo runs over trajectory
// indices, aggregation into means / observable marginals / jump counts, and
// the two distributional convergence studies (epsilon scan of the jump
// family against its diffusive limit, detuning scan of the heterodyne model
// against its two-noise limit).
//
// Trajectory index i always uses streams keyed by (seed, i, channel), so an
// ensemble is a pure function of (seed, n_traj) regardless of thread count;
// aggregation runs over fixed-size index blocks merged in order, which keeps
// floating-point summation deterministic as well.
#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qsme/detection.hpp"
#include "qsme/lindblad.hpp"
#include "qsme/operator_set.hpp"
#include "qsme/simulate.hpp"
#include "qsme/stats.hpp"
#include "qsme/state.hpp"

namespace qsme {

inline std::vector<Observable> bloch_observables() {
  return {{"sigma_x", pauli_x()}, {"sigma_y", pauli_y()},
          {"sigma_z", pauli_z()}};
}

/// One runnable model: an operator set plus the choice of equation family.
struct Model {
  std::string name;
  OperatorSet ops;
  bool jump_family = false;  // counting channels for the scaled operators
  std::optional<Modulation> modulation;
};

inline TrajectoryPath run_trajectory(const Model& model, SimConfig cfg,
                                     const DensityMatrix& rho0,
                                     std::uint64_t seed, std::uint64_t index) {
  if (model.modulation) cfg.time_dependent = model.modulation;
  const StreamKey key{seed, index, ""};
  return model.jump_family ? simulate_jump_diffusion(model.ops, rho0, cfg, key)
                           : simulate_diffusive(model.ops, rho0, cfg, key);
}

/// Recording grid produced by the simulators for this configuration.
inline std::vector<double> recording_grid(const SimConfig& cfg) {
  std::vector<double> out;
  const std::size_t n = cfg.n_steps();
  const double h = cfg.step_size();
  for (std::size_t m = 0; m < n; m += std::size_t(cfg.record_stride))
    out.push_back(double(m) * h);
  out.push_back(cfg.t_final);
  return out;
}

struct ObservableSamples {
  std::string label;
  double time = 0.0;
  std::vector<double> values;  // one per trajectory, index order
};

struct EnsembleSummary {
  std::string model;
  int n_traj = 0;
  int dim = 0;
  std::vector<double> times;
  std::vector<Complex> mean_data;  // times.size()*dim*dim, row-major
  std::vector<double> se_fro;      // Monte-Carlo SE of the mean, Frobenius
  std::vector<ObservableSamples> samples;
  std::vector<std::string> jump_channels;
  std::vector<std::vector<std::size_t>> jump_counts;  // [channel][trajectory]
  std::vector<TrajectoryPath> paths;  // only with keep_paths

  Mat mean_state(std::size_t k) const {
    Mat m(dim, dim);
    const Complex* p = mean_data.data() + k * std::size_t(dim) * dim;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) m(i, j) = p[i * dim + j];
    return m;
  }

  const ObservableSamples& find_samples(const std::string& label,
                                        double time) const {
    for (const auto& s : samples)
      if (s.label == label && std::abs(s.time - time) <= 1e-9) return s;
    throw Error("EnsembleSummary: no samples for " + label + " at t=" +
                std::to_string(time));
  }
};

struct EnsembleOptions {
  bool keep_paths = false;
  int threads = 0;  // <= 0: hardware concurrency
};

inline EnsembleSummary run_ensemble(const Model& model, const SimConfig& cfg,
                                    const DensityMatrix& rho0, int n_traj,
                                    std::uint64_t seed,
                                    const std::vector<Observable>& observables,
                                    const std::vector<double>& record_times,
                                    const EnsembleOptions& options = {}) {
  if (n_traj < 1) throw Error("run_ensemble: n_traj must be >= 1");
  for (const auto& obs : observables) obs.validate();

  SimConfig effective = cfg;
  if (model.modulation) effective.time_dependent = model.modulation;
  effective.validate();

  EnsembleSummary out;
  out.model = model.name;
  out.n_traj = n_traj;
  out.dim = model.ops.dim();
  out.times = recording_grid(effective);

  const std::size_t n_times = out.times.size();
  const std::size_t entries = std::size_t(out.dim) * out.dim;

  // Marginal sampling times must lie on the recording grid.
  std::vector<std::size_t> marginal_idx;
  for (double t : record_times) {
    std::size_t best = 0;
    double best_err = 1e300;
    for (std::size_t k = 0; k < n_times; ++k) {
      const double err = std::abs(out.times[k] - t);
      if (err < best_err) {
        best_err = err;
        best = k;
      }
    }
    if (best_err > effective.step_size() * effective.record_stride * 0.5 +
                       1e-9)
      throw Error("run_ensemble: requested time " + std::to_string(t) +
                  " not on the recording grid");
    marginal_idx.push_back(best);
  }
  for (std::size_t m = 0; m < record_times.size(); ++m)
    for (const auto& obs : observables)
      out.samples.push_back({obs.label, out.times[marginal_idx[m]],
                             std::vector<double>(std::size_t(n_traj))});

  // Fixed-size index blocks keep the reduction order independent of the
  // number of workers.
  constexpr std::size_t kBlock = 256;
  const std::size_t n_blocks = (std::size_t(n_traj) + kBlock - 1) / kBlock;
  struct BlockAccum {
    std::vector<Complex> sum;
    std::vector<double> sumsq;  // re^2 + im^2 per entry
    std::vector<std::vector<std::size_t>> jump_counts;
    std::string error;
  };
  std::vector<BlockAccum> blocks(n_blocks);
  if (options.keep_paths) out.paths.resize(std::size_t(n_traj));

  std::atomic<std::size_t> next_block{0};
  std::atomic<bool> failed{false};

  auto worker = [&]() {
    for (;;) {
      const std::size_t b = next_block.fetch_add(1);
      if (b >= n_blocks || failed.load()) return;
      BlockAccum& acc = blocks[b];
      acc.sum.assign(n_times * entries, Complex(0));
      acc.sumsq.assign(n_times * entries, 0.0);
      const std::size_t lo = b * kBlock;
      const std::size_t hi =
          std::min<std::size_t>(lo + kBlock, std::size_t(n_traj));
      for (std::size_t idx = lo; idx < hi; ++idx) {
        TrajectoryPath path;
        try {
          path = run_trajectory(model, effective, rho0, seed, idx);
        } catch (const Error& e) {
          acc.error = "trajectory " + std::to_string(idx) + ": " + e.what();
          failed.store(true);
          return;
        }
        if (path.times.size() != n_times) {
          acc.error = "trajectory " + std::to_string(idx) + ": grid mismatch";
          failed.store(true);
          return;
        }
        for (std::size_t k = 0; k < n_times * entries; ++k) {
          const Complex v = path.data[k];
          acc.sum[k] += v;
          acc.sumsq[k] += v.real() * v.real() + v.imag() * v.imag();
        }
        if (acc.jump_counts.empty())
          acc.jump_counts.resize(path.channel_labels.size());
        const auto counts = path.jump_counts();
        for (std::size_t c = 0; c < counts.size(); ++c)
          acc.jump_counts[c].push_back(counts[c]);
        std::size_t s = 0;
        for (std::size_t m = 0; m < marginal_idx.size(); ++m) {
          const Mat st = path.state(marginal_idx[m]);
          for (std::size_t o = 0; o < observables.size(); ++o, ++s)
            out.samples[s].values[idx] =
                re_trace_prod(observables[o].matrix, st);
        }
        if (options.keep_paths) out.paths[idx] = std::move(path);
      }
    }
  };

  int n_threads = options.threads > 0
                      ? options.threads
                      : int(std::thread::hardware_concurrency());
  if (n_threads < 1) n_threads = 1;
  n_threads = std::min<int>(n_threads, int(n_blocks));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& blk : blocks)
    if (!blk.error.empty()) throw Error("run_ensemble: " + blk.error);

  // In-order merge of the block partials.
  std::vector<Complex> total(n_times * entries, Complex(0));
  std::vector<double> totalsq(n_times * entries, 0.0);
  for (const auto& blk : blocks) {
    for (std::size_t k = 0; k < n_times * entries; ++k) {
      total[k] += blk.sum[k];
      totalsq[k] += blk.sumsq[k];
    }
    if (out.jump_counts.empty())
      out.jump_counts.resize(blk.jump_counts.size());
    for (std::size_t c = 0; c < blk.jump_counts.size(); ++c)
      out.jump_counts[c].insert(out.jump_counts[c].end(),
                                blk.jump_counts[c].begin(),
                                blk.jump_counts[c].end());
  }
  const double n = double(n_traj);
  out.mean_data.resize(n_times * entries);
  out.se_fro.assign(n_times, 0.0);
  for (std::size_t k = 0; k < n_times * entries; ++k) {
    out.mean_data[k] = total[k] / n;
    const double mean_sq = std::norm(out.mean_data[k]);
    const double var = n > 1.0
        ? std::max(0.0, (totalsq[k] - n * mean_sq) / (n - 1.0))
        : 0.0;
    out.se_fro[k / entries] += var / n;
  }
  for (auto& se : out.se_fro) se = std::sqrt(se);

  // Jump channel labels follow the model definition order.
  {
    TrajectoryPath probe;
    Model m = model;  // labels only; cheapest probe is the channel lists
    for (const auto& d : m.ops.jump_ops) out.jump_channels.push_back(d.label);
    if (model.jump_family)
      for (const auto& a : m.ops.scaled_jump_ops)
        out.jump_channels.push_back(a.label);
  }

  for (std::size_t k = 0; k < n_times; ++k) {
    const double tr_err = std::abs(out.mean_state(k).trace() - Complex(1));
    if (tr_err > 1e-9)
      throw Error("run_ensemble: mean state trace off by " +
                  std::to_string(tr_err));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convergence studies.

struct DistanceEntry {
  double param = 0.0;  // epsilon or delta
  std::string observable;
  double time = 0.0;
  double ks = 0.0;
  double w1 = 0.0;
};

struct MeanCheckEntry {
  std::string model;
  double sup_err = 0.0;      // sup_t ||mean - ode||_F
  double worst_margin = 0.0; // max_t (err - 3 SE); ok iff <= 0
  bool ok = false;
};

struct ConvergenceReport {
  std::string study;
  std::string primary_observable;
  double primary_time = 0.0;
  int n_traj = 0;
  std::vector<double> params;
  std::vector<DistanceEntry> distances;
  std::vector<MeanCheckEntry> mean_checks;
  double ks_noise = 0.0;        // sqrt((n+m)/(nm)) fluctuation scale
  double w1_allowance = 0.0;
  double final_ks = 0.0;        // primary observable, most converged param
  double final_ks_threshold = 0.05;
  double fitted_ks_trend = 0.0; // slope of log KS vs log param (primary)
  bool has_trend = false;
  bool trend_ok = false;
  bool mean_ok = false;
  bool final_ok = false;

  bool all_ok() const {
    return mean_ok && final_ok && (!has_trend || trend_ok);
  }
};

namespace detail {

inline MeanCheckEntry mean_vs_ode(const EnsembleSummary& ens,
                                  const TrajectoryPath& ode) {
  MeanCheckEntry entry;
  entry.model = ens.model;
  if (ode.times.size() != ens.times.size())
    throw Error("mean_vs_ode: grid mismatch");
  entry.worst_margin = -1e300;
  for (std::size_t k = 0; k < ens.times.size(); ++k) {
    const double err = fro_norm(Mat(ens.mean_state(k) - ode.state(k)));
    const double margin = err - 3.0 * ens.se_fro[k];
    entry.sup_err = std::max(entry.sup_err, err);
    entry.worst_margin = std::max(entry.worst_margin, margin);
  }
  entry.ok = entry.worst_margin <= 0.0;
  return entry;
}

/// Distances between a family member and the limit ensemble, one row per
/// (observable, marginal time).
inline void append_distances(std::vector<DistanceEntry>& rows, double param,
                             const EnsembleSummary& member,
                             const EnsembleSummary& limit) {
  for (const auto& s : member.samples) {
    const auto& ref = limit.find_samples(s.label, s.time);
    rows.push_back({param, s.label, s.time, ks_distance(s.values, ref.values),
                    wasserstein1(s.values, ref.values)});
  }
}

inline double ks_of(const ConvergenceReport& rep, double param,
                    const std::string& obs, double time) {
  for (const auto& d : rep.distances)
    if (d.param == param && d.observable == obs &&
        std::abs(d.time - time) <= 1e-9)
      return d.ks;
  throw Error("ConvergenceReport: missing distance row");
}

/// Verdicts shared by both studies. `params_by_convergence` lists the family
/// parameters from least to most converged.
inline void finish_report(ConvergenceReport& rep,
                          const std::vector<double>& params_by_convergence,
                          const std::vector<EnsembleSummary>& members,
                          const EnsembleSummary& limit) {
  rep.ks_noise = std::sqrt(double(rep.n_traj + rep.n_traj) /
                           (double(rep.n_traj) * double(rep.n_traj)));
  {
    const auto& ref = limit.find_samples(rep.primary_observable,
                                         rep.primary_time);
    rep.w1_allowance =
        2.0 * std::sqrt(sample_variance(ref.values) * 2.0 / double(rep.n_traj));
  }

  rep.has_trend = params_by_convergence.size() >= 2;
  rep.trend_ok = true;
  for (const auto& s : limit.samples) {
    double prev_ks = -1.0, prev_w1 = -1.0;
    for (double p : params_by_convergence) {
      const double ks = ks_of(rep, p, s.label, s.time);
      double w1 = 0.0;
      for (const auto& d : rep.distances)
        if (d.param == p && d.observable == s.label &&
            std::abs(d.time - s.time) <= 1e-9)
          w1 = d.w1;
      if (prev_ks >= 0.0 && ks > prev_ks + 2.0 * rep.ks_noise)
        rep.trend_ok = false;
      if (prev_w1 >= 0.0 && w1 > prev_w1 + rep.w1_allowance)
        rep.trend_ok = false;
      prev_ks = ks;
      prev_w1 = w1;
    }
  }

  rep.final_ks = ks_of(rep, params_by_convergence.back(),
                       rep.primary_observable, rep.primary_time);
  rep.final_ok = rep.final_ks <= rep.final_ks_threshold;

  rep.mean_ok = true;
  for (const auto& m : rep.mean_checks) rep.mean_ok = rep.mean_ok && m.ok;

  // Least-squares slope of log KS (primary) against log param.
  if (rep.has_trend) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (double p : params_by_convergence) {
      const double x = std::log(p);
      const double y = std::log(std::max(
          ks_of(rep, p, rep.primary_observable, rep.primary_time), 1e-12));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double n = double(params_by_convergence.size());
    rep.fitted_ks_trend = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  (void)members;
}

}  // namespace detail

struct StudyOutput {
  ConvergenceReport report;
  std::vector<EnsembleSummary> ensembles;  // family members then limit
  TrajectoryPath ode;
};

/// Scans the scaled jump family over a strictly decreasing epsilon list and
/// compares each member against the diffusive-limit ensemble through KS and
/// Wasserstein distances of observable marginals, plus the mean-vs-ODE
/// check for every ensemble.
inline StudyOutput diffusion_approximation_study(
    const HomodyneParams& base, const std::vector<double>& eps_list,
    const SimConfig& cfg, int n_traj, std::uint64_t seed,
    const std::vector<Observable>& observables,
    const std::vector<double>& record_times,
    const EnsembleOptions& options = {}) {
  if (eps_list.size() < 3)
    throw Error("diffusion_approximation_study: need >= 3 epsilon values");
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1]))
      throw Error("diffusion_approximation_study: epsilon list must be "
                  "strictly decreasing");

  StudyOutput out;
  ConvergenceReport& rep = out.report;
  rep.study = "diffusion-approximation";
  rep.n_traj = n_traj;
  rep.params = eps_list;
  rep.primary_observable = observables.empty() ? "sigma_z"
                                               : observables.back().label;
  rep.primary_time = record_times.empty() ? cfg.t_final : record_times.back();

  const DensityMatrix rho0 = ground_state(2);
  HomodyneParams limit_params = base;
  Model limit{"homodyne-limit", build_homodyne_limit(limit_params), false, {}};
  EnsembleSummary limit_ens = run_ensemble(limit, cfg, rho0, n_traj, seed,
                                           observables, record_times, options);
  const TrajectoryPath ode =
      lindblad_ode_solve(limit.ops, rho0, cfg);
  rep.mean_checks.push_back(detail::mean_vs_ode(limit_ens, ode));

  for (double eps : eps_list) {
    HomodyneParams p = base;
    p.epsilon = eps;
    SimConfig member_cfg = cfg;
    member_cfg.dt = std::min(cfg.dt, default_dt_for_epsilon(eps));
    Model member{"homodyne-jump eps=" + std::to_string(eps),
                 build_homodyne_jump(p), true, {}};
    EnsembleSummary ens =
        run_ensemble(member, member_cfg, rho0, n_traj, seed, observables,
                     record_times, options);
    detail::append_distances(rep.distances, eps, ens, limit_ens);
    rep.mean_checks.push_back(detail::mean_vs_ode(
        ens, member_cfg.dt == cfg.dt
                 ? ode
                 : lindblad_ode_solve(limit.ops, rho0, member_cfg)));
    out.ensembles.push_back(std::move(ens));
  }
  detail::finish_report(rep, eps_list, out.ensembles, limit_ens);
  out.ensembles.push_back(std::move(limit_ens));
  out.ode = ode;
  return out;
}

/// Scans the heterodyne model over an increasing detuning list against the
/// two-noise limit ensemble. Requires the integration step to resolve at
/// least 50 points of the fastest oscillation period.
inline StudyOutput heterodyne_delta_study(
    const HeterodyneParams& base, const std::vector<double>& delta_list,
    const SimConfig& cfg, int n_traj, std::uint64_t seed,
    const std::vector<Observable>& observables,
    const std::vector<double>& record_times,
    const EnsembleOptions& options = {}) {
  if (delta_list.empty())
    throw Error("heterodyne_delta_study: empty delta list");
  for (std::size_t i = 1; i < delta_list.size(); ++i)
    if (!(delta_list[i] > delta_list[i - 1]))
      throw Error("heterodyne_delta_study: delta list must be strictly "
                  "increasing");
  const double dt_max = 2.0 * M_PI / (50.0 * delta_list.back());
  if (cfg.dt > dt_max)
    throw Error("heterodyne_delta_study: dt=" + std::to_string(cfg.dt) +
                " too coarse for delta_max; need dt <= " +
                std::to_string(dt_max));

  StudyOutput out;
  ConvergenceReport& rep = out.report;
  rep.study = "heterodyne-delta";
  rep.n_traj = n_traj;
  rep.params = delta_list;
  rep.primary_observable = observables.empty() ? "sigma_x"
                                               : observables.front().label;
  rep.primary_time = record_times.empty() ? cfg.t_final : record_times.back();

  const DensityMatrix rho0 = ground_state(2);
  HeterodyneParams lp = base;
  Model limit{"heterodyne-limit", build_heterodyne_limit(lp), false, {}};
  EnsembleSummary limit_ens = run_ensemble(limit, cfg, rho0, n_traj, seed,
                                           observables, record_times, options);
  const TrajectoryPath ode = lindblad_ode_solve(limit.ops, rho0, cfg);
  rep.mean_checks.push_back(detail::mean_vs_ode(limit_ens, ode));

  for (double delta : delta_list) {
    HeterodyneParams p = base;
    p.delta = delta;
    Model member{"heterodyne delta=" + std::to_string(delta),
                 build_heterodyne(p), false, heterodyne_modulation(p)};
    EnsembleSummary ens = run_ensemble(member, cfg, rho0, n_traj, seed,
                                       observables, record_times, options);
    detail::append_distances(rep.distances, delta, ens, limit_ens);
    rep.mean_checks.push_back(detail::mean_vs_ode(ens, ode));
    out.ensembles.push_back(std::move(ens));
  }
  detail::finish_report(rep, delta_list, out.ensembles, limit_ens);
  out.ensembles.push_back(std::move(limit_ens));
  out.ode = ode;
  return out;
}

}  // namespace qsme
