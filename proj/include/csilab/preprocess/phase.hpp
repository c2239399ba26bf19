#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "csilab/core/frame.hpp"

namespace csilab::preprocess {

/// ls: least squares over all tones. pads: line through the two edge tones.
/// pads_mean: edge-tone slope with the intercept set to the mean residual phase.
enum class DetrendMethod { ls, pads, pads_mean };

inline DetrendMethod parse_detrend(std::string_view s) {
  if (s == "ls") return DetrendMethod::ls;
  if (s == "pads") return DetrendMethod::pads;
  if (s == "pads_mean") return DetrendMethod::pads_mean;
  throw ConfigError("unknown detrend method '" + std::string(s) + "' (valid: ls, pads, pads_mean)");
}

inline std::string_view to_string(DetrendMethod m) {
  switch (m) {
    case DetrendMethod::ls: return "ls";
    case DetrendMethod::pads: return "pads";
    case DetrendMethod::pads_mean: return "pads_mean";
  }
  return "?";
}

/// Phase along ascending tone order with 2 pi jumps removed.
inline std::vector<double> unwrapped_phase(std::span<const cplx> h) {
  std::vector<double> p(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) p[k] = std::arg(h[k]);
  for (std::size_t k = 1; k < p.size(); ++k) {
    double d = p[k] - p[k - 1];
    d -= 2.0 * kPi * std::round(d / (2.0 * kPi));
    p[k] = p[k - 1] + d;
  }
  return p;
}

struct LinearPhase {
  double slope = 0.0;      // rad per tone index
  double intercept = 0.0;  // rad at tone index 0
};

inline LinearPhase fit_linear_phase(std::span<const cplx> h, std::span<const int> idx, DetrendMethod method) {
  if (h.size() < 2) throw DegenerateError("phase detrending needs at least 2 tones");
  const auto phi = unwrapped_phase(h);
  LinearPhase f;
  if (method != DetrendMethod::ls) {
    f.slope = (phi.back() - phi.front()) / static_cast<double>(idx.back() - idx.front());
    if (method == DetrendMethod::pads) {
      f.intercept = phi.front() - f.slope * idx.front();
    } else {
      double acc = 0.0;
      for (std::size_t k = 0; k < h.size(); ++k) acc += phi[k] - f.slope * idx[k];
      f.intercept = acc / static_cast<double>(h.size());
    }
    return f;
  }
  const auto n = static_cast<double>(h.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    mx += idx[k];
    my += phi[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    sxy += (idx[k] - mx) * (phi[k] - my);
    sxx += (idx[k] - mx) * (idx[k] - mx);
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

inline CsiVector detrend_phase(std::span<const cplx> h, std::span<const int> idx, DetrendMethod method) {
  const auto f = fit_linear_phase(h, idx, method);
  CsiVector out(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) out[k] = h[k] * std::polar(1.0, -(f.slope * idx[k] + f.intercept));
  return out;
}

/// Removes the per-packet linear phase: least squares over all tones, or the line through the edge tones.
inline CsiFrame detrend_phase(const CsiFrame& frame, DetrendMethod method) {
  return frame.with_csi(detrend_phase(frame.csi, frame.grid->indices, method));
}

inline CsiSeries detrend_phase(const CsiSeries& s, DetrendMethod method) {
  auto out = map_frames(s, [&](const CsiFrame& f) { return detrend_phase(f, method); });
  out.meta["detrend"] = std::string(to_string(method));
  return out;
}

}  // namespace csilab::preprocess
