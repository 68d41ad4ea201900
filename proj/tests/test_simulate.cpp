// Trajectory and ODE integration checked against closed-form dynamics:
// amplitude-damping decay, exponential jump times, Poisson counting for a
// constant-rate channel, and purity preservation of the nonlinear jump
// drift.
#include <gtest/gtest.h>

#include <cmath>

#include "qsme/ensemble.hpp"
#include "qsme/simulate.hpp"
#include "qsme/stats.hpp"

using namespace qsme;

namespace {

OperatorSet amplitude_damping() {
  OperatorSet ops;
  ops.hamiltonian = zero(2);
  ops.jump_ops.push_back({"damp", sigma_minus()});
  return ops;
}

OperatorSet counting_identity() {
  OperatorSet ops;
  ops.hamiltonian = zero(2);
  ops.jump_ops.push_back({"click", identity(2)});
  return ops;
}

}  // namespace

TEST(LindbladOde, ZeroGeneratorIsConstant) {
  OperatorSet ops;
  ops.hamiltonian = zero(2);
  SimConfig cfg;
  cfg.t_final = 1.0;
  cfg.dt = 0.01;
  TrajectoryPath path = lindblad_ode_solve(ops, maximally_mixed(2), cfg);
  for (std::size_t k = 0; k < path.n_times(); ++k)
    EXPECT_LE(fro_norm(Mat(path.state(k) - maximally_mixed(2).rho)), 1e-14);
}

TEST(LindbladOde, AmplitudeDampingDecay) {
  SimConfig cfg;
  cfg.t_final = 1.0;
  cfg.dt = 1e-3;
  cfg.record_stride = 100;
  TrajectoryPath path =
      lindblad_ode_solve(amplitude_damping(), excited_state_qubit(), cfg);
  const Mat rho_t = path.state(path.n_times() - 1);
  EXPECT_NEAR(rho_t(1, 1).real(), std::exp(-1.0), 1e-6);
}

TEST(LindbladOde, FourthOrderConvergence) {
  // Error against a fine-step reference shrinks ~16x when dt halves.
  OperatorSet ops = amplitude_damping();
  ops.hamiltonian = 0.7 * pauli_x();
  const DensityMatrix rho0 = excited_state_qubit();
  auto terminal = [&](double dt) {
    SimConfig cfg;
    cfg.t_final = 1.0;
    cfg.dt = dt;
    cfg.record_stride = 1 << 20;  // record only endpoints
    TrajectoryPath p = lindblad_ode_solve(ops, rho0, cfg);
    return p.state(p.n_times() - 1);
  };
  const Mat ref = terminal(1.0 / 4096.0);
  const double err_coarse = fro_norm(Mat(terminal(1.0 / 64.0) - ref));
  const double err_fine = fro_norm(Mat(terminal(1.0 / 128.0) - ref));
  EXPECT_GE(err_coarse / err_fine, 12.0);
  EXPECT_LE(err_coarse / err_fine, 20.0);
}

TEST(SimulateJump, NoChannelsConstantPath) {
  OperatorSet ops;
  ops.hamiltonian = zero(2);
  SimConfig cfg;
  cfg.t_final = 1.0;
  cfg.dt = 0.01;
  TrajectoryPath path = simulate_jump_diffusion(ops, maximally_mixed(2), cfg,
                                                StreamKey{1, 0, ""});
  EXPECT_TRUE(path.jumps.empty());
  for (std::size_t k = 0; k < path.n_times(); ++k)
    EXPECT_LE(fro_norm(Mat(path.state(k) - maximally_mixed(2).rho)), 1e-14);
}

TEST(SimulateJump, Deterministic) {
  SimConfig cfg;
  cfg.t_final = 2.0;
  cfg.dt = 0.01;
  const StreamKey key{99, 7, ""};
  TrajectoryPath a =
      simulate_jump_diffusion(amplitude_damping(), excited_state_qubit(), cfg, key);
  TrajectoryPath b =
      simulate_jump_diffusion(amplitude_damping(), excited_state_qubit(), cfg, key);
  ASSERT_EQ(a.data.size(), b.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_EQ(a.data[i], b.data[i]);
  ASSERT_EQ(a.jumps.size(), b.jumps.size());
  for (std::size_t i = 0; i < a.jumps.size(); ++i)
    EXPECT_EQ(a.jumps[i].time, b.jumps[i].time);
}

TEST(SimulateJump, IdentityChannelCountsPoisson) {
  // D = I leaves the state invariant and clicks at unit rate.
  SimConfig cfg;
  cfg.t_final = 10.0;
  cfg.dt = 0.05;
  cfg.record_stride = 50;
  const int n = 2000;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    TrajectoryPath p = simulate_jump_diffusion(
        counting_identity(), maximally_mixed(2), cfg,
        StreamKey{31415, std::uint64_t(i), ""});
    total += double(p.jumps.size());
    EXPECT_LE(fro_norm(Mat(p.state(p.n_times() - 1) - maximally_mixed(2).rho)),
              1e-12);
  }
  // Poisson(10) per trajectory; 3 sigma on the mean at n = 2000.
  EXPECT_NEAR(total / n, 10.0, 3.0 * std::sqrt(10.0 / n));
}

TEST(SimulateJump, ExponentialJumpTimeFromExcitedState) {
  // diag(0,1) is stationary for the no-jump drift and has unit intensity,
  // so the single decay time is Exp(1).
  SimConfig cfg;
  cfg.t_final = 12.0;
  cfg.dt = 0.05;
  cfg.record_stride = 60;
  const int n = 4000;
  double sum = 0.0;
  int censored = 0;
  for (int i = 0; i < n; ++i) {
    TrajectoryPath p =
        simulate_jump_diffusion(amplitude_damping(), excited_state_qubit(), cfg,
                                StreamKey{271828, std::uint64_t(i), ""});
    EXPECT_LE(p.jumps.size(), 1u);
    if (p.jumps.empty())
      ++censored;  // P = exp(-12), essentially never
    else
      sum += p.jumps[0].time;
  }
  EXPECT_LE(censored, 2);
  EXPECT_NEAR(sum / double(n - censored), 1.0, 0.05);
}

TEST(SimulateJump, PurityPreservedAlongPath) {
  // Pure initial state, jump-only dynamics: the nonlinear drift and the
  // jump map both keep rank one.
  OperatorSet ops = amplitude_damping();
  ops.hamiltonian = 0.5 * pauli_x();
  Mat plus(2, 2);
  plus << 0.5, 0.5, 0.5, 0.5;  // |+><+|
  SimConfig cfg;
  cfg.t_final = 4.0;
  cfg.dt = 1e-3;
  cfg.record_stride = 40;
  for (int i = 0; i < 20; ++i) {
    TrajectoryPath p = simulate_jump_diffusion(
        ops, DensityMatrix(plus), cfg, StreamKey{777, std::uint64_t(i), ""});
    for (std::size_t k = 0; k < p.n_times(); ++k) {
      Eigen::SelfAdjointEigenSolver<Mat> es(p.state(k),
                                            Eigen::EigenvaluesOnly);
      EXPECT_LE(es.eigenvalues()(0), 1e-8);
    }
  }
}

TEST(SimulateJump, SchemesAgreeOnJumpCounts) {
  // Jump-count laws of the Bernoulli and thinning schemes stay within KS
  // distance 0.02 once dt * bound is small.
  SimConfig coarse;
  coarse.t_final = 5.0;
  coarse.dt = 0.01;
  coarse.record_stride = 1 << 20;
  const int n = 10000;
  std::vector<double> counts_bernoulli, counts_thinning;
  for (int i = 0; i < n; ++i) {
    SimConfig cfg = coarse;
    cfg.scheme = Scheme::euler_bernoulli;
    counts_bernoulli.push_back(double(
        simulate_jump_diffusion(counting_identity(), maximally_mixed(2), cfg,
                                StreamKey{5150, std::uint64_t(i), ""})
            .jumps.size()));
    cfg.scheme = Scheme::thinning_exact;
    counts_thinning.push_back(double(
        simulate_jump_diffusion(counting_identity(), maximally_mixed(2), cfg,
                                StreamKey{5151, std::uint64_t(i), ""})
            .jumps.size()));
  }
  EXPECT_LE(ks_distance(counts_bernoulli, counts_thinning), 0.02);
}

TEST(SimulateJump, BernoulliRejectsCoarseStep) {
  SimConfig cfg;
  cfg.t_final = 1.0;
  cfg.dt = 0.2;  // dt * bound = 0.2 > 0.1
  cfg.scheme = Scheme::euler_bernoulli;
  EXPECT_THROW(simulate_jump_diffusion(counting_identity(), maximally_mixed(2),
                                       cfg, StreamKey{1, 0, ""}),
               Error);
}

TEST(SimulateDiffusive, ZeroOperatorsConstantPath) {
  OperatorSet ops;
  ops.hamiltonian = zero(2);
  ops.diffusive_ops.push_back(zero(2));
  SimConfig cfg;
  cfg.t_final = 1.0;
  cfg.dt = 0.01;
  TrajectoryPath path = simulate_diffusive(ops, maximally_mixed(2), cfg,
                                           StreamKey{3, 0, ""});
  for (std::size_t k = 0; k < path.n_times(); ++k)
    EXPECT_LE(fro_norm(Mat(path.state(k) - maximally_mixed(2).rho)), 1e-14);
}

TEST(SimulateDiffusive, PathStatesAreValidStates) {
  OperatorSet ops;
  ops.hamiltonian = 0.5 * pauli_x();
  ops.diffusive_ops.push_back(sigma_minus());
  SimConfig cfg;
  cfg.t_final = 2.0;
  cfg.dt = 1e-3;
  cfg.record_stride = 20;
  for (int i = 0; i < 10; ++i) {
    TrajectoryPath p = simulate_diffusive(ops, ground_state(2), cfg,
                                          StreamKey{8888, std::uint64_t(i), ""});
    for (std::size_t k = 0; k < p.n_times(); ++k)
      DensityMatrix(p.state(k)).validate();
  }
}

TEST(SimulateDiffusive, HermitianChannelIsBoundedMartingale) {
  // Single A = sigma_x from the maximally mixed state: tr[rho (A + A^+)]
  // diffuses inside [-2, 2]; the ensemble mean of tr[sigma_x rho_T] stays
  // near the ODE value (zero, since I/2 is stationary).
  OperatorSet ops;
  ops.hamiltonian = zero(2);
  ops.diffusive_ops.push_back(pauli_x());
  SimConfig cfg;
  cfg.t_final = 1.0;
  cfg.dt = 1e-3;
  cfg.record_stride = 100;
  const int n = 1000;
  double mean_x = 0.0;
  for (int i = 0; i < n; ++i) {
    TrajectoryPath p = simulate_diffusive(ops, maximally_mixed(2), cfg,
                                          StreamKey{424242, std::uint64_t(i), ""});
    for (std::size_t k = 0; k < p.n_times(); ++k) {
      const double coord = re_trace_prod(Mat(2.0 * pauli_x()), p.state(k));
      EXPECT_LE(std::abs(coord), 2.0 + 1e-9);
    }
    mean_x += re_trace_prod(pauli_x(), p.state(p.n_times() - 1));
  }
  EXPECT_LE(std::abs(mean_x / n), 0.09);  // 3x MC standard error headroom
}

TEST(SimulateDiffusive, BlowUpProducesDiagnostic) {
  OperatorSet ops;
  ops.hamiltonian = zero(2);
  ops.diffusive_ops.push_back(Mat(1e4 * pauli_x()));
  SimConfig cfg;
  cfg.t_final = 1.0;
  cfg.dt = 0.05;
  try {
    simulate_diffusive(ops, ground_state(2), cfg, StreamKey{6, 0, ""});
    FAIL() << "expected blow-up";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("blow-up"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("t="), std::string::npos);
  }
}

TEST(RecordingGrid, MatchesSimulatorOutput) {
  SimConfig cfg;
  cfg.t_final = 2.0;
  cfg.dt = 1e-3;
  cfg.record_stride = 7;
  OperatorSet ops;
  ops.hamiltonian = zero(2);
  TrajectoryPath p = simulate_jump_diffusion(ops, maximally_mixed(2), cfg,
                                             StreamKey{1, 0, ""});
  const auto grid = recording_grid(cfg);
  ASSERT_EQ(grid.size(), p.times.size());
  for (std::size_t k = 0; k < grid.size(); ++k)
    EXPECT_EQ(grid[k], p.times[k]);
}
