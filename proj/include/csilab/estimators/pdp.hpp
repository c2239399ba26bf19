#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "csilab/core/frame.hpp"

namespace csilab::estimators {

struct DelayProfile {
  double bin_s = 0.0;
  std::vector<double> delays_s;
  std::vector<double> power;

  std::size_t size() const noexcept { return power.size(); }
};

/// Uniformly spaced spectrum fed to the inverse DFT: contiguous grids get the missing DC tone
/// as the mean of tones -1 and +1; the 30-tone grouping is taken as 30 samples at 2 x spacing.
struct UniformSpectrum {
  CsiVector values;
  int step = 1;
};

inline UniformSpectrum uniform_spectrum(std::span<const cplx> h, const SubcarrierGrid& g) {
  if (g.size() != h.size()) throw ValidationError("csi length differs from grid");
  UniformSpectrum u;
  if (g.is_grouped30()) {
    u.step = 2;
    u.values.assign(h.begin(), h.end());
    return u;
  }
  const int lo = g.indices.front(), hi = g.indices.back();
  const auto span = static_cast<std::size_t>(hi - lo + 1);
  const bool gap_at_dc = lo < 0 && hi > 0 && !g.position_of(0) && g.position_of(-1) && g.position_of(1);
  if (g.size() + (gap_at_dc ? 1 : 0) != span) throw ConfigError("PDP needs a contiguous tone grid");
  u.values.reserve(span);
  for (int m = lo; m <= hi; ++m) {
    if (auto p = g.position_of(m)) {
      u.values.push_back(h[*p]);
    } else {
      u.values.push_back(0.5 * (h[*g.position_of(-1)] + h[*g.position_of(1)]));
    }
  }
  return u;
}

/// |IDFT|^2 over the uniform spectrum, unitary scaling, no zero padding.
inline DelayProfile compute_pdp(std::span<const cplx> h, const SubcarrierGrid& g) {
  const auto u = uniform_spectrum(h, g);
  const std::size_t N = u.values.size();
  DelayProfile d;
  d.bin_s = 1.0 / (static_cast<double>(N) * u.step * kToneSpacingHz);
  d.delays_s.resize(N);
  d.power.resize(N);
  const double norm = 1.0 / std::sqrt(static_cast<double>(N));
  std::vector<cplx> twiddle(N);
  for (std::size_t m = 0; m < N; ++m) twiddle[m] = std::polar(1.0, 2.0 * kPi * static_cast<double>(m) / static_cast<double>(N));
  for (std::size_t n = 0; n < N; ++n) {
    cplx acc{};
    for (std::size_t k = 0; k < N; ++k) acc += u.values[k] * twiddle[(k * n) % N];
    d.delays_s[n] = static_cast<double>(n) * d.bin_s;
    d.power[n] = std::norm(acc * norm);
  }
  return d;
}

inline DelayProfile compute_pdp(const CsiFrame& f) { return compute_pdp(f.csi, *f.grid); }

/// Circular local maxima whose topographic prominence is at least `rel_threshold` x max power,
/// strongest first.
inline std::vector<std::size_t> pdp_peaks(const std::vector<double>& p, double rel_threshold) {
  const std::size_t N = p.size();
  if (N < 3) return {};
  const double top = *std::max_element(p.begin(), p.end());
  if (!(top > 0.0)) return {};
  const std::size_t base = static_cast<std::size_t>(std::min_element(p.begin(), p.end()) - p.begin());
  auto at = [&](std::size_t i) { return p[(base + i) % N]; };  // rotated so position 0 is the global minimum
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < N; ++i) {
    const double v = at(i);
    const double prev = at(i - 1), next = at((i + 1) % N);
    if (!(v > prev && v >= next)) continue;
    double left_min = v, right_min = v;
    for (std::size_t j = i; j-- > 0;) {
      if (at(j) > v) break;
      left_min = std::min(left_min, at(j));
    }
    for (std::size_t j = i + 1; j <= N; ++j) {
      const double x = at(j % N);
      if (x > v) break;
      right_min = std::min(right_min, x);
    }
    if (v - std::max(left_min, right_min) >= rel_threshold * top) out.push_back((base + i) % N);
  }
  std::stable_sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  return out;
}

/// Delay of the second strongest qualifying peak after the strongest, modulo the unambiguous
/// range; nullopt when fewer than two peaks qualify.
inline std::optional<double> estimate_tof(const DelayProfile& d, double peak_threshold = 0.1) {
  const auto peaks = pdp_peaks(d.power, peak_threshold);
  if (peaks.size() < 2) return std::nullopt;
  const auto N = static_cast<long>(d.size());
  const long diff = ((static_cast<long>(peaks[1]) - static_cast<long>(peaks[0])) % N + N) % N;
  return static_cast<double>(diff) * d.bin_s;
}

}  // namespace csilab::estimators
