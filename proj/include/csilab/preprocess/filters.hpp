#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "csilab/core/frame.hpp"
#include "csilab/core/stats.hpp"

namespace csilab::preprocess {

enum class FilterKind { median, savgol, hampel };

struct FilterSpec {
  FilterKind kind = FilterKind::median;
  int window = 5;
  int order = 2;          // savgol
  double n_sigmas = 3.0;  // hampel
};

inline FilterSpec parse_filter(std::string_view s) {
  if (s == "median") return {FilterKind::median};
  if (s == "savgol") return {FilterKind::savgol};
  if (s == "hampel") return {FilterKind::hampel};
  throw ConfigError("unknown filter '" + std::string(s) + "' (valid: median, savgol, hampel)");
}

inline void validate_filter(const FilterSpec& f) {
  if (f.window < 1 || f.window % 2 == 0) throw ConfigError("filter window must be an odd integer >= 1");
  if (f.kind == FilterKind::savgol && (f.order < 0 || f.order >= f.window)) {
    throw ConfigError("savgol order must satisfy 0 <= order < window");
  }
  if (f.kind == FilterKind::hampel && !(f.n_sigmas >= 0.0)) throw ConfigError("hampel n_sigmas must be nonnegative");
}

inline std::vector<double> median_filter(std::span<const double> x, int w) {
  validate_filter({FilterKind::median, w});
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const std::ptrdiff_t h = w / 2;
  std::vector<double> y(x.size()), buf;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    buf.assign(x.begin() + std::max<std::ptrdiff_t>(0, i - h), x.begin() + std::min(n, i + h + 1));
    y[i] = stats::median(buf);
  }
  return y;
}

/// Values further than n_sigmas * 1.4826 * MAD from the window median are replaced by the median.
inline std::vector<double> hampel_filter(std::span<const double> x, int w, double n_sigmas) {
  validate_filter({FilterKind::hampel, w, 0, n_sigmas});
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const std::ptrdiff_t h = w / 2;
  std::vector<double> y(x.begin(), x.end()), buf;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    buf.assign(x.begin() + std::max<std::ptrdiff_t>(0, i - h), x.begin() + std::min(n, i + h + 1));
    const double med = stats::median(buf);
    for (auto& v : buf) v = std::abs(v - med);
    const double mad = 1.4826 * stats::median(buf);
    if (std::abs(x[i] - med) > n_sigmas * mad) y[i] = med;
  }
  return y;
}

/// Savitzky-Golay smoothing; near the edges the polynomial is refit on the truncated window.
inline std::vector<double> savgol_filter(std::span<const double> x, int w, int order) {
  validate_filter({FilterKind::savgol, w, order});
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const std::ptrdiff_t h = w / 2;
  std::map<std::pair<std::ptrdiff_t, std::ptrdiff_t>, Eigen::RowVectorXd> rows;
  auto weights = [&](std::ptrdiff_t left, std::ptrdiff_t right) -> const Eigen::RowVectorXd& {
    auto key = std::make_pair(left, right);
    auto it = rows.find(key);
    if (it != rows.end()) return it->second;
    const auto len = left + right + 1;
    const auto deg = std::min<std::ptrdiff_t>(order, len - 1);
    Eigen::MatrixXd v(len, deg + 1);
    for (std::ptrdiff_t r = 0; r < len; ++r) {
      for (std::ptrdiff_t c = 0; c <= deg; ++c) v(r, c) = std::pow(static_cast<double>(r - left), static_cast<double>(c));
    }
    // value of the fitted polynomial at offset 0 is the first row of the pseudo-inverse
    Eigen::MatrixXd pinv = v.completeOrthogonalDecomposition().pseudoInverse();
    return rows.emplace(key, pinv.row(0)).first->second;
  };
  std::vector<double> y(x.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto left = std::min(h, i), right = std::min(h, n - 1 - i);
    const auto& wr = weights(left, right);
    double acc = 0.0;
    for (std::ptrdiff_t r = 0; r < wr.size(); ++r) acc += wr[r] * x[i - left + r];
    y[i] = acc;
  }
  return y;
}

inline std::vector<double> apply_filter(std::span<const double> x, const FilterSpec& f) {
  switch (f.kind) {
    case FilterKind::median: return median_filter(x, f.window);
    case FilterKind::savgol: return savgol_filter(x, f.window, f.order);
    case FilterKind::hampel: return hampel_filter(x, f.window, f.n_sigmas);
  }
  return {x.begin(), x.end()};
}

/// Filters each tone's amplitude along time; phases are kept.
inline CsiSeries filter_series(const CsiSeries& s, const FilterSpec& f) {
  validate_filter(f);
  CsiSeries out = s;
  if (s.empty()) return out;
  const std::size_t K = s.grid()->size();
  std::vector<double> a(s.size());
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t n = 0; n < s.size(); ++n) a[n] = std::abs(s.frames[n].csi[k]);
    const auto b = apply_filter(a, f);
    for (std::size_t n = 0; n < s.size(); ++n) out.frames[n].csi[k] = b[n] * std::polar(1.0, std::arg(s.frames[n].csi[k]));
  }
  return out;
}

}  // namespace csilab::preprocess
