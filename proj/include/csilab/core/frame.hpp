#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "csilab/core/error.hpp"
#include "csilab/core/grid.hpp"

namespace csilab {

using cplx = std::complex<double>;
using CsiVector = std::vector<cplx>;

/// One packet's per-tone channel estimate.
struct CsiFrame {
  std::string receiver_id;
  std::uint64_t seq = 0;
  std::int64_t ts_us = 0;
  double rssi_db = 0.0;
  GridPtr grid;
  CsiVector csi;

  std::size_t size() const noexcept { return csi.size(); }

  /// Same frame with different CSI values.
  CsiFrame with_csi(CsiVector values) const {
    CsiFrame f{receiver_id, seq, ts_us, rssi_db, grid, std::move(values)};
    return f;
  }
};

inline void validate_frame(const CsiFrame& f) {
  if (!f.grid) throw ValidationError("frame has no grid");
  if (f.csi.size() != f.grid->size()) {
    throw ValidationError("csi length " + std::to_string(f.csi.size()) + " does not match grid size " +
                          std::to_string(f.grid->size()));
  }
  for (std::size_t k = 0; k < f.csi.size(); ++k) {
    if (!std::isfinite(f.csi[k].real()) || !std::isfinite(f.csi[k].imag())) {
      throw ValidationError("non-finite csi value at tone " + std::to_string(f.grid->indices[k]));
    }
  }
  if (!std::isfinite(f.rssi_db)) throw ValidationError("non-finite rssi_db");
}

/// Ordered frames from one receiver.
struct CsiSeries {
  std::vector<CsiFrame> frames;
  std::map<std::string, std::string> meta;

  bool empty() const noexcept { return frames.empty(); }
  std::size_t size() const noexcept { return frames.size(); }
  const GridPtr& grid() const { return frames.front().grid; }
  const std::string& receiver_id() const { return frames.front().receiver_id; }
};

inline void validate_series(const CsiSeries& s) {
  for (std::size_t i = 0; i < s.frames.size(); ++i) {
    const auto& f = s.frames[i];
    validate_frame(f);
    if (i == 0) continue;
    const auto& prev = s.frames[i - 1];
    if (f.receiver_id != prev.receiver_id) throw ValidationError("mixed receiver ids in series");
    if (!same_grid(f.grid, prev.grid)) throw ValidationError("mixed grids in series");
    if (f.seq <= prev.seq) throw ValidationError("seq not strictly increasing at frame " + std::to_string(i));
    if (f.ts_us < prev.ts_us) throw ValidationError("timestamps decrease at frame " + std::to_string(i));
  }
}

inline std::vector<double> amplitudes(std::span<const cplx> v) {
  std::vector<double> a(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::abs(v[i]);
  return a;
}

/// Applies `fn` to each frame's CSI, keeping metadata.
template <class Fn>
CsiSeries map_frames(const CsiSeries& in, Fn&& fn) {
  CsiSeries out;
  out.meta = in.meta;
  out.frames.reserve(in.frames.size());
  for (const auto& f : in.frames) out.frames.push_back(fn(f));
  return out;
}

}  // namespace csilab
