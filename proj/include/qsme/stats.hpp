// Two-sample distribution distances used as empirical proxies for
// convergence in distribution, plus small summary-statistics helpers.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "qsme/types.hpp"

namespace qsme {

/// Two-sample Kolmogorov-Smirnov distance: sup_x |ECDF_a(x) - ECDF_b(x)|.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = double(a.size()), nb = double(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() || j < b.size()) {
    double v;
    if (i < a.size() && j < b.size())
      v = std::min(a[i], b[j]);
    else
      v = i < a.size() ? a[i] : b[j];
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(double(i) / na - double(j) / nb));
  }
  return d;
}

/// First Wasserstein distance via quantile coupling: the exact integral
/// of |F_a^{-1}(u) - F_b^{-1}(u)| over u in (0, 1). Sample sizes may differ.
inline double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error("wasserstein1: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = double(a.size()), nb = double(b.size());
  std::size_t i = 0, j = 0;
  double u = 0.0, total = 0.0;
  while (i < a.size() && j < b.size()) {
    const double ua = double(i + 1) / na;
    const double ub = double(j + 1) / nb;
    const double next = std::min(ua, ub);
    total += (next - u) * std::abs(a[i] - b[j]);
    u = next;
    if (ua <= next + 1e-15) ++i;
    if (ub <= next + 1e-15) ++j;
  }
  return total;
}

/// 99th percentile of the two-sample Kolmogorov-Smirnov null distribution,
/// asymptotic form c(0.99) * sqrt((n+m)/(n m)) with c(0.99) ~ 1.628.
inline double ks_null_quantile_99(std::size_t n, std::size_t m) {
  return 1.628 * std::sqrt(double(n + m) / (double(n) * double(m)));
}

/// 95th percentile, c(0.95) ~ 1.358.
inline double ks_null_quantile_95(std::size_t n, std::size_t m) {
  return 1.358 * std::sqrt(double(n + m) / (double(n) * double(m)));
}

inline double sample_mean(const std::vector<double>& xs) {
  if (xs.empty()) throw Error("sample_mean: empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / double(xs.size());
}

inline double sample_variance(const std::vector<double>& xs) {
  if (xs.size() < 2) throw Error("sample_variance: need at least 2 samples");
  const double m = sample_mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / double(xs.size() - 1);
}

}  // namespace qsme
