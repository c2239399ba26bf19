#pragma once

#include <vector>

#include "csilab/core/frame.hpp"

namespace csilab::emulator {

struct Path {
  cplx alpha{1.0, 0.0};
  double tau_s = 0.0;
};

/// Frequency response of a fixed multipath channel over a grid.
struct StaticChannel {
  std::vector<Path> paths;
  GridPtr grid;
  CsiVector response;
};

/// H_k = sum_p alpha_p * exp(-j 2 pi f_k tau_p).
inline StaticChannel multipath_channel(std::vector<Path> paths, GridPtr grid) {
  if (!grid) throw ConfigError("channel needs a grid");
  if (paths.empty()) throw ConfigError("channel needs at least one path");
  const double range = grid->unambiguous_delay_s();
  for (const auto& p : paths) {
    if (!(p.tau_s >= 0.0) || p.tau_s >= range) {
      throw ConfigError("path delay " + std::to_string(p.tau_s) + " s outside [0, " + std::to_string(range) + ")");
    }
  }
  StaticChannel ch;
  ch.response.assign(grid->size(), cplx{});
  for (std::size_t k = 0; k < grid->size(); ++k) {
    for (const auto& p : paths) {
      ch.response[k] += p.alpha * std::polar(1.0, -2.0 * kPi * grid->freqs_hz[k] * p.tau_s);
    }
  }
  ch.paths = std::move(paths);
  ch.grid = std::move(grid);
  return ch;
}

/// Single unit path with zero delay: H_k = 1.
inline StaticChannel flat_channel(GridPtr grid) { return multipath_channel({Path{}}, std::move(grid)); }

}  // namespace csilab::emulator
