#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "csilab/core/rng.hpp"
#include "csilab/core/stats.hpp"

namespace csilab::eval {

struct BootstrapInterval {
  double lo = 0.0;
  double hi = 0.0;
  double estimate = 0.0;  // sample mean
  double z0 = 0.0;
  double acceleration = 0.0;
  double lo_pct = 0.5;
  double hi_pct = 99.5;
  bool degenerate = false;  // zero-variance input: lo = hi = mean
};

namespace detail {

inline std::vector<double> bootstrap_means(const std::vector<double>& x, std::size_t n_boot, std::uint64_t seed) {
  Engine eng = make_engine(substream(seed, "bootstrap"));
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  std::vector<double> means(n_boot);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[pick(eng)];
    m = s / static_cast<double>(x.size());
  }
  std::sort(means.begin(), means.end());
  return means;
}

inline double normal_cdf(double z) { return boost::math::cdf(boost::math::normal_distribution<double>(), z); }
inline double normal_quantile(double p) { return boost::math::quantile(boost::math::normal_distribution<double>(), p); }

}  // namespace detail

/// Plain percentile interval of the bootstrap distribution of the mean.
inline BootstrapInterval bootstrap_percentile(const std::vector<double>& x, std::size_t n_boot = 10000,
                                              double lo_pct = 0.5, double hi_pct = 99.5, std::uint64_t seed = 0) {
  if (x.size() < 2) throw DegenerateError("bootstrap needs at least 2 values");
  BootstrapInterval r;
  r.lo_pct = lo_pct;
  r.hi_pct = hi_pct;
  r.estimate = stats::mean(x);
  const auto means = detail::bootstrap_means(x, n_boot, seed);
  r.lo = stats::quantile_sorted(means, lo_pct / 100.0);
  r.hi = stats::quantile_sorted(means, hi_pct / 100.0);
  return r;
}

/// Bias-corrected and accelerated percentile interval for the mean. z0 comes from the share of
/// bootstrap means below the sample mean; the acceleration from the jackknife.
inline BootstrapInterval bootstrap_bca(const std::vector<double>& x, std::size_t n_boot = 10000, double lo_pct = 0.5,
                                       double hi_pct = 99.5, std::uint64_t seed = 0) {
  if (x.size() < 10) throw DegenerateError("BCa bootstrap needs at least 10 values");
  if (n_boot < 2) throw ConfigError("n_boot must be at least 2");
  if (!(lo_pct > 0.0 && lo_pct < hi_pct && hi_pct < 100.0)) throw ConfigError("percentile levels must satisfy 0 < lo < hi < 100");
  BootstrapInterval r;
  r.lo_pct = lo_pct;
  r.hi_pct = hi_pct;
  r.estimate = stats::mean(x);
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  if (*mn == *mx) {
    r.lo = r.hi = r.estimate;
    r.degenerate = true;
    return r;
  }
  const auto means = detail::bootstrap_means(x, n_boot, seed);
  const auto below = static_cast<double>(std::lower_bound(means.begin(), means.end(), r.estimate) - means.begin());
  const double b = static_cast<double>(n_boot);
  const double frac = std::clamp(below / b, 0.5 / b, 1.0 - 0.5 / b);
  r.z0 = detail::normal_quantile(frac);

  const auto n = static_cast<double>(x.size());
  const double total = r.estimate * n;
  double num = 0.0, den = 0.0;
  for (double v : x) {
    const double loo = (total - v) / (n - 1.0);
    const double d = r.estimate - loo;  // mean of leave-one-out means equals the sample mean
    num += d * d * d;
    den += d * d;
  }
  r.acceleration = den > 0.0 ? num / (6.0 * std::pow(den, 1.5)) : 0.0;

  auto adjusted = [&](double pct) {
    const double z = detail::normal_quantile(pct / 100.0);
    const double w = r.z0 + z;
    return detail::normal_cdf(r.z0 + w / (1.0 - r.acceleration * w));
  };
  r.lo = stats::quantile_sorted(means, adjusted(lo_pct));
  r.hi = stats::quantile_sorted(means, adjusted(hi_pct));
  return r;
}

}  // namespace csilab::eval
