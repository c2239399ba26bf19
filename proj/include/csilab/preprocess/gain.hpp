#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "csilab/core/frame.hpp"

namespace csilab::preprocess {

enum class GainMethod { none, l1, l2, rssi, anchored };

inline GainMethod parse_gain(std::string_view s) {
  if (s == "none") return GainMethod::none;
  if (s == "l1") return GainMethod::l1;
  if (s == "l2") return GainMethod::l2;
  if (s == "rssi") return GainMethod::rssi;
  if (s == "anchored") return GainMethod::anchored;
  throw ConfigError("unknown gain method '" + std::string(s) + "' (valid: none, l1, l2, rssi, anchored)");
}

inline std::string_view to_string(GainMethod m) {
  switch (m) {
    case GainMethod::none: return "none";
    case GainMethod::l1: return "l1";
    case GainMethod::l2: return "l2";
    case GainMethod::rssi: return "rssi";
    case GainMethod::anchored: return "anchored";
  }
  return "?";
}

struct GainOptions {
  GainMethod method = GainMethod::l1;
  std::vector<int> anchors;     // tone indices for `anchored`
  bool anchor_mean = false;     // divide by the mean over anchors instead of the sum
};

/// Real positive factor the frame is multiplied by.
inline double gain_factor(std::span<const cplx> h, std::span<const int> idx, double rssi_db, const GainOptions& o) {
  double denom = 0.0;
  switch (o.method) {
    case GainMethod::none:
      return 1.0;
    case GainMethod::l1:
      for (const auto& v : h) denom += std::abs(v);
      denom /= static_cast<double>(h.size());
      break;
    case GainMethod::l2:
      for (const auto& v : h) denom += std::norm(v);
      denom = std::sqrt(denom / static_cast<double>(h.size()));
      break;
    case GainMethod::rssi: {
      double p = 0.0;
      for (const auto& v : h) p += std::norm(v);
      if (!(p > 0.0)) throw DegenerateError("rssi scaling of an all-zero frame");
      return std::sqrt(std::pow(10.0, rssi_db / 10.0) / p);
    }
    case GainMethod::anchored: {
      if (o.anchors.empty()) throw ConfigError("anchored normalization needs a nonempty anchor set");
      for (int m : o.anchors) {
        auto it = std::lower_bound(idx.begin(), idx.end(), m);
        if (it == idx.end() || *it != m) throw ConfigError("anchor tone " + std::to_string(m) + " not on grid");
        denom += std::abs(h[static_cast<std::size_t>(it - idx.begin())]);
      }
      if (o.anchor_mean) denom /= static_cast<double>(o.anchors.size());
      break;
    }
  }
  if (!(denom > 0.0)) throw DegenerateError("gain normalization denominator is zero");
  return 1.0 / denom;
}

inline CsiVector normalize_gain(std::span<const cplx> h, std::span<const int> idx, double rssi_db,
                                const GainOptions& o) {
  const double s = gain_factor(h, idx, rssi_db, o);
  CsiVector out(h.begin(), h.end());
  for (auto& v : out) v *= s;
  return out;
}

inline CsiFrame normalize_gain(const CsiFrame& f, const GainOptions& o) {
  return f.with_csi(normalize_gain(f.csi, f.grid->indices, f.rssi_db, o));
}

inline CsiFrame normalize_gain(const CsiFrame& f, GainMethod m) { return normalize_gain(f, GainOptions{m, {}, false}); }

inline CsiSeries normalize_gain(const CsiSeries& s, const GainOptions& o) {
  auto out = map_frames(s, [&](const CsiFrame& f) { return normalize_gain(f, o); });
  out.meta["gain"] = std::string(to_string(o.method));
  return out;
}

/// H^N_k = H_k / ((1/K) sum |H_k|).
inline CsiVector l1_normalize(std::span<const cplx> h) {
  return normalize_gain(h, {}, 0.0, GainOptions{GainMethod::l1, {}, false});
}

}  // namespace csilab::preprocess
