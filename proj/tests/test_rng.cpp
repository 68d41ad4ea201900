#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "qsme/rng.hpp"

using namespace qsme;

// Known-answer vectors from the Random123 distribution for Philox 4x32
// with 10 rounds.
TEST(Philox, KnownAnswerVectors) {
  auto out = Philox4x32::block({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);

  out = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                          {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out[0], 0x408f276du);
  EXPECT_EQ(out[1], 0x41c83b0eu);
  EXPECT_EQ(out[2], 0xa20bc7c6u);
  EXPECT_EQ(out[3], 0x6d5451fdu);

  out = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                          {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out[0], 0xd16cfe09u);
  EXPECT_EQ(out[1], 0x94fdccebu);
  EXPECT_EQ(out[2], 0x5001e420u);
  EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(NoiseStream, SameKeyReproducesSequence) {
  StreamKey key{123456789ull, 42, "damp"};
  NoiseStream a(key);
  NoiseStream b(key);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(NoiseStream, DistinctKeysDiffer) {
  NoiseStream a(StreamKey{1, 0, "x"});
  NoiseStream b(StreamKey{1, 1, "x"});
  NoiseStream c(StreamKey{1, 0, "y"});
  NoiseStream d(StreamKey{2, 0, "x"});
  const double va = a.uniform();
  EXPECT_NE(va, b.uniform());
  EXPECT_NE(va, c.uniform());
  EXPECT_NE(va, d.uniform());
}

TEST(NoiseStream, BrownianMomentsMatchLawOfLargeNumbers) {
  NoiseStream stream(StreamKey{2024, 0, "brownian-0"});
  const int n = 1000000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = brownian_increment(stream, 1.0);
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  EXPECT_LE(std::abs(mean), 0.004);
  EXPECT_GE(var, 0.99);
  EXPECT_LE(var, 1.01);
}

TEST(NoiseStream, ChannelsAreUncorrelated) {
  NoiseStream a(StreamKey{77, 3, "brownian-0"});
  NoiseStream b(StreamKey{77, 3, "brownian-1"});
  const int n = 100000;
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a.normal();
    const double y = b.normal();
    sa += x;
    sb += y;
    sab += x * y;
    saa += x * x;
    sbb += y * y;
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  const double corr =
      cov / std::sqrt((saa / n - (sa / n) * (sa / n)) *
                      (sbb / n - (sb / n) * (sb / n)));
  EXPECT_LE(std::abs(corr), 0.01);
}

TEST(CandidateJumps, TinyIntervalIsUsuallyEmpty) {
  int empties = 0;
  for (int i = 0; i < 1000; ++i) {
    NoiseStream stream(StreamKey{5, std::uint64_t(i), "jump"});
    if (candidate_jumps(stream, 0.0, 0.0001, 1.0).empty()) ++empties;
  }
  EXPECT_GE(empties, 995);  // P(empty) = exp(-1e-4) per draw
}

TEST(CandidateJumps, CountMatchesPoissonMean) {
  // Aggregate horizon of 1e4 at rate 1; count within 3 sigma = 300.
  std::size_t count = 0;
  for (int i = 0; i < 100; ++i) {
    NoiseStream stream(StreamKey{6, std::uint64_t(i), "jump"});
    count += candidate_jumps(stream, 0.0, 100.0, 1.0).size();
  }
  EXPECT_GE(count, 10000 - 300);
  EXPECT_LE(count, 10000 + 300);
}

TEST(CandidateJumps, TimesStrictlyIncreaseAndMarksInRange) {
  NoiseStream stream(StreamKey{8, 0, "jump"});
  auto cands = candidate_jumps(stream, 2.0, 52.0, 3.0);
  double last = 2.0;
  for (const auto& c : cands) {
    EXPECT_GT(c.time, last);
    EXPECT_LT(c.time, 52.0);
    EXPECT_GE(c.mark, 0.0);
    EXPECT_LT(c.mark, 3.0);
    last = c.time;
  }
  EXPECT_GT(cands.size(), 100u);
}

TEST(CandidateJumps, MarksAreUniform) {
  // Kolmogorov-Smirnov distance of the marks against uniform[0, bound).
  const double bound = 2.5;
  std::vector<double> marks;
  for (int i = 0; marks.size() < 100000; ++i) {
    NoiseStream stream(StreamKey{9, std::uint64_t(i), "jump"});
    for (const auto& c : candidate_jumps(stream, 0.0, 1000.0, bound))
      marks.push_back(c.mark);
  }
  marks.resize(100000);
  std::sort(marks.begin(), marks.end());
  double ks = 0.0;
  const double n = double(marks.size());
  for (std::size_t i = 0; i < marks.size(); ++i) {
    const double u = marks[i] / bound;
    ks = std::max(ks, std::max((i + 1) / n - u, u - i / n));
  }
  EXPECT_LE(ks, 0.01);
}

TEST(CandidateJumps, ThinnedInterarrivalsMatchConstantRate) {
  // Accept marks below a constant intensity lambda < bound; the accepted
  // points form a rate-lambda Poisson process.
  const double bound = 2.0, lambda = 0.7;
  std::vector<double> accepted;
  for (int i = 0; accepted.size() < 100001; ++i) {
    NoiseStream stream(StreamKey{10, std::uint64_t(i), "jump"});
    for (const auto& c : candidate_jumps(stream, 0.0, 2000.0, bound))
      if (c.mark < lambda) accepted.push_back(c.time + 2000.0 * i);
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 1; i < accepted.size() && n < 100000; ++i, ++n)
    sum += accepted[i] - accepted[i - 1];
  const double mean_gap = sum / double(n);
  EXPECT_NEAR(mean_gap, 1.0 / lambda, 0.03 / lambda);
}

TEST(IntensityBound, KnownValues) {
  EXPECT_NEAR(intensity_bound(identity(2)), 1.0, 1e-12);
  EXPECT_NEAR(intensity_bound(sigma_minus()), 1.0, 1e-12);
  // D = sigma_- + 10 I: Gram matrix [[100, 10], [10, 101]], largest
  // eigenvalue (201 + sqrt(401)) / 2 by the 2x2 trace/determinant formula.
  Mat d = sigma_minus() + Mat(10.0 * identity(2));
  EXPECT_NEAR(intensity_bound(d), (201.0 + std::sqrt(401.0)) / 2.0, 1e-9);
  EXPECT_THROW(intensity_bound(zero(2)), Error);
}
