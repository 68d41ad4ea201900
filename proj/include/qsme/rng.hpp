// Reproducible random streams for trajectory simulation.
//
// Streams are counter-based: each (master_seed, trajectory_index, channel)
// triple is hashed into an independent Philox 4x32-10 key/counter prefix, so
// ensembles can be evaluated in any order or in parallel and still produce
// bitwise-identical results. Philox follows Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3" (SC'11).
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "qsme/types.hpp"

namespace qsme {

struct Philox4x32 {
  static constexpr std::uint32_t kMult0 = 0xD2511F53u;
  static constexpr std::uint32_t kMult1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t(kMult0) * ctr[0];
      const std::uint64_t p1 = std::uint64_t(kMult1) * ctr[2];
      ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
             std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::uint64_t h, const void* data,
                             std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace detail

/// Identifies one independent random stream. Distinct keys give
/// statistically independent sequences; the same key always reproduces the
/// identical sequence.
struct StreamKey {
  std::uint64_t master_seed = 0;
  std::uint64_t trajectory_index = 0;
  std::string channel;  // e.g. a jump channel label or "brownian-0"

  StreamKey with_channel(std::string chan) const {
    return {master_seed, trajectory_index, std::move(chan)};
  }
};

/// A stream of primitive random draws. Every draw consumes exactly one
/// Philox block, so the n-th draw is a pure function of (key, n).
class NoiseStream {
 public:
  explicit NoiseStream(const StreamKey& key) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    h = detail::fnv1a64(h, &key.master_seed, sizeof key.master_seed);
    h = detail::fnv1a64(h, &key.trajectory_index, sizeof key.trajectory_index);
    h = detail::fnv1a64(h, key.channel.data(), key.channel.size());
    const std::uint64_t k = detail::splitmix64(h);
    const std::uint64_t p = detail::splitmix64(h);
    key_ = {std::uint32_t(k), std::uint32_t(k >> 32)};
    prefix_ = {std::uint32_t(p), std::uint32_t(p >> 32)};
  }

  std::array<std::uint32_t, 4> next_block() {
    const std::array<std::uint32_t, 4> ctr = {
        std::uint32_t(counter_), std::uint32_t(counter_ >> 32), prefix_[0],
        prefix_[1]};
    ++counter_;
    return Philox4x32::block(ctr, key_);
  }

  /// Uniform draw in the open interval (0, 1).
  double uniform() {
    const auto b = next_block();
    return to_unit(b[0], b[1]);
  }

  /// Standard normal draw (Box-Muller, one block per draw).
  double normal() {
    const auto b = next_block();
    const double u1 = to_unit(b[0], b[1]);
    const double u2 = to_unit(b[2], b[3]);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * M_PI * u2);
  }

  /// Exponential draw with the given rate.
  double exponential(double rate) { return -std::log(uniform()) / rate; }

 private:
  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (std::uint64_t(hi) << 32) | lo;
    // 53 significant bits, shifted into (0, 1) strictly.
    return (double(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 2> prefix_{};
  std::uint64_t counter_ = 0;
};

/// Brownian increment over a step of length dt: Normal(0, dt).
inline double brownian_increment(NoiseStream& stream, double dt) {
  if (dt <= 0.0) throw Error("brownian_increment: dt must be positive");
  return std::sqrt(dt) * stream.normal();
}

struct CandidateJump {
  double time = 0.0;
  double mark = 0.0;  // uniform on [0, bound)
};

/// Candidate points of a homogeneous Poisson process of rate `bound` on
/// [t0, t1), each carrying a uniform mark on [0, bound). Thinning these
/// candidates against a state-dependent intensity below the bound
/// reproduces the inhomogeneous counting process exactly.
inline std::vector<CandidateJump> candidate_jumps(NoiseStream& stream,
                                                  double t0, double t1,
                                                  double bound) {
  if (!(t1 > t0)) throw Error("candidate_jumps: need t1 > t0");
  if (!(bound > 0.0)) throw Error("candidate_jumps: need bound > 0");
  std::vector<CandidateJump> out;
  double t = t0;
  for (;;) {
    t += stream.exponential(bound);
    if (t >= t1) break;
    out.push_back({t, bound * stream.uniform()});
  }
  return out;
}

/// Exact supremum of the jump intensity tr[D rho D^+] over the state set:
/// the largest eigenvalue of D^+D.
inline double intensity_bound(const Mat& d) {
  require_square(d, "intensity_bound");
  if (fro_norm(d) == 0.0) throw Error("intensity_bound: zero operator");
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat(d.adjoint() * d),
                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace qsme
