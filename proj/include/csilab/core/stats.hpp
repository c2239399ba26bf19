#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "csilab/core/error.hpp"

namespace csilab::stats {

inline double mean(std::span<const double> x) {
  if (x.empty()) throw DegenerateError("mean of empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double stddev(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

/// Quantile with linear interpolation between order statistics (inclusive method, q in [0, 1]).
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DegenerateError("quantile of empty sample");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> x, double q) {
  std::sort(x.begin(), x.end());
  return quantile_sorted(x, q);
}

inline double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

inline double iqr(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  return quantile_sorted(x, 0.75) - quantile_sorted(x, 0.25);
}

struct Moments {
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  bool degenerate = false;
};

/// Adjusted Fisher-Pearson skewness (G1) and bias-corrected excess kurtosis (G2).
/// Zero-variance samples report 0 with `degenerate` set.
inline Moments higher_moments(std::span<const double> x) {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 4) throw DegenerateError("need at least 4 samples for skewness/kurtosis");
  const double m = mean(x);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - m;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  // Relative threshold so that constant series with rounding noise still count as constant.
  if (m2 <= 1e-28 * std::max(1.0, m * m)) return {0.0, 0.0, true};
  const double g1 = m3 / std::pow(m2, 1.5);
  const double g2 = m4 / (m2 * m2) - 3.0;
  Moments r;
  r.skewness = g1 * std::sqrt(n * (n - 1.0)) / (n - 2.0);
  r.excess_kurtosis = ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0));
  return r;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

inline double wrap_pi(double phase) {
  constexpr double two_pi = 6.28318530717958647692;
  double r = std::remainder(phase, two_pi);
  if (r <= -two_pi / 2) r += two_pi;
  return r;
}

}  // namespace csilab::stats
