#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "csilab/core/frame.hpp"
#include "csilab/emulator/channel.hpp"

namespace csilab::emulator {

enum class ScheduleKind { constant, gain_sweep, two_path_doppler, two_path_tof, single_tone, tone_block };

inline ScheduleKind parse_schedule_kind(std::string_view s) {
  if (s == "constant") return ScheduleKind::constant;
  if (s == "gain_sweep") return ScheduleKind::gain_sweep;
  if (s == "two_path_doppler") return ScheduleKind::two_path_doppler;
  if (s == "two_path_tof") return ScheduleKind::two_path_tof;
  if (s == "single_tone") return ScheduleKind::single_tone;
  if (s == "tone_block") return ScheduleKind::tone_block;
  throw ConfigError("unknown schedule kind '" + std::string(s) +
                    "' (valid: constant, gain_sweep, two_path_doppler, two_path_tof, single_tone, tone_block)");
}

inline std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::gain_sweep: return "gain_sweep";
    case ScheduleKind::two_path_doppler: return "two_path_doppler";
    case ScheduleKind::two_path_tof: return "two_path_tof";
    case ScheduleKind::single_tone: return "single_tone";
    case ScheduleKind::tone_block: return "tone_block";
  }
  return "?";
}

enum class SweepAxis { amplitude, phase };

struct ScheduleParams {
  // two-path kinds: c_k(t) = a + b * exp(-j 2 pi f_k delta(t) / c)
  double a = 0.7;
  double b = 0.3;
  double peak = 1.0;
  double velocity_mps = 1.0;  // two_path_doppler: delta(t) = delta0 + v t
  double delta0_m = 0.0;
  double delta_start_m = 100.0;  // two_path_tof: linear from start to end over the schedule
  double delta_end_m = 300.0;
  bool allow_alias = false;

  // gain_sweep: raised-cosine transmit gain between lo and hi
  double gain_lo_db = -10.0;
  double gain_hi_db = 10.0;
  double sweep_period_s = 20.0;

  // single_tone
  int tone = 3;
  SweepAxis sweep = SweepAxis::amplitude;
  double amp_lo = 0.0;
  double amp_hi = 2.0;
  double phase_lo = 0.0;
  double phase_hi = kPi / 2;

  // tone_block
  int block_first = -10;
  int block_last = 10;
  cplx block_factor{2.0, 0.0};
};

/// Ground-truth per-packet, per-tone factors applied at the transmitter.
struct PrecodingSchedule {
  ScheduleKind kind = ScheduleKind::constant;
  GridPtr grid;
  double rate_pps = 0.0;
  std::uint64_t seed = 0;
  std::vector<CsiVector> factors;
  std::vector<std::int64_t> ts_us;
  std::vector<int> anchor_set;      // tone indices left unmodified
  std::vector<int> modified_tones;  // tone indices carrying the sweep
  std::vector<double> delta_m;      // two-path kinds: extra path length per packet

  std::size_t size() const noexcept { return factors.size(); }
};

inline std::size_t packets_for(double duration_s, double rate_pps) {
  return static_cast<std::size_t>(std::llround(duration_s * rate_pps));
}

namespace detail {

inline std::vector<int> all_tones_except(const SubcarrierGrid& g, const std::vector<int>& excluded) {
  std::vector<int> out;
  for (int m : g.indices) {
    if (std::find(excluded.begin(), excluded.end(), m) == excluded.end()) out.push_back(m);
  }
  return out;
}

inline double ramp(std::size_t n, std::size_t count, double lo, double hi) {
  if (count < 2) return lo;
  return lo + (hi - lo) * static_cast<double>(n) / static_cast<double>(count - 1);
}

}  // namespace detail

inline PrecodingSchedule make_schedule(ScheduleKind kind, const ScheduleParams& p, std::size_t n_packets,
                                       double rate_pps, GridPtr grid, std::uint64_t seed) {
  if (!grid) throw ConfigError("schedule needs a grid");
  if (!(rate_pps > 0.0)) throw ConfigError("rate_pps must be positive");
  if (n_packets == 0) throw ConfigError("schedule needs at least one packet");

  PrecodingSchedule s;
  s.kind = kind;
  s.grid = grid;
  s.rate_pps = rate_pps;
  s.seed = seed;
  s.ts_us.resize(n_packets);
  for (std::size_t n = 0; n < n_packets; ++n) {
    s.ts_us[n] = std::llround(static_cast<double>(n) * 1e6 / rate_pps);
  }
  const std::size_t K = grid->size();
  s.factors.assign(n_packets, CsiVector(K, cplx{1.0, 0.0}));

  const bool two_path = kind == ScheduleKind::two_path_doppler || kind == ScheduleKind::two_path_tof;
  if (two_path) {
    if (!(std::abs(p.a) + std::abs(p.b) <= p.peak)) {
      throw ConfigError("|a| + |b| exceeds the configured peak " + std::to_string(p.peak));
    }
    s.delta_m.resize(n_packets);
    double max_abs_delta = 0.0;
    for (std::size_t n = 0; n < n_packets; ++n) {
      const double t = static_cast<double>(s.ts_us[n]) * 1e-6;
      s.delta_m[n] = kind == ScheduleKind::two_path_doppler ? p.delta0_m + p.velocity_mps * t
                                                            : detail::ramp(n, n_packets, p.delta_start_m, p.delta_end_m);
      max_abs_delta = std::max(max_abs_delta, std::abs(s.delta_m[n]));
    }
    const double range_m = grid->unambiguous_delay_s() * kSpeedOfLight;
    if (max_abs_delta >= range_m && !p.allow_alias) {
      throw ConfigError("path-length sweep reaches " + std::to_string(max_abs_delta) +
                        " m, beyond the unambiguous range " + std::to_string(range_m) +
                        " m (set allow_alias to permit)");
    }
    for (std::size_t n = 0; n < n_packets; ++n) {
      for (std::size_t k = 0; k < K; ++k) {
        const double phase = -2.0 * kPi * grid->freqs_hz[k] * s.delta_m[n] / kSpeedOfLight;
        s.factors[n][k] = p.a + p.b * std::polar(1.0, phase);
      }
    }
    s.modified_tones = grid->indices;
    return s;
  }

  switch (kind) {
    case ScheduleKind::constant:
      s.anchor_set = grid->indices;
      break;
    case ScheduleKind::gain_sweep: {
      if (!(p.sweep_period_s > 0.0)) throw ConfigError("sweep_period_s must be positive");
      for (std::size_t n = 0; n < n_packets; ++n) {
        const double t = static_cast<double>(s.ts_us[n]) * 1e-6;
        const double g_db =
            p.gain_lo_db + (p.gain_hi_db - p.gain_lo_db) * 0.5 * (1.0 - std::cos(2.0 * kPi * t / p.sweep_period_s));
        const double g = std::pow(10.0, g_db / 20.0);
        std::fill(s.factors[n].begin(), s.factors[n].end(), cplx{g, 0.0});
      }
      s.modified_tones = grid->indices;
      break;
    }
    case ScheduleKind::single_tone: {
      auto pos = grid->position_of(p.tone);
      if (!pos) throw ConfigError("single_tone target " + std::to_string(p.tone) + " not on grid");
      for (std::size_t n = 0; n < n_packets; ++n) {
        const double amp = p.sweep == SweepAxis::amplitude ? detail::ramp(n, n_packets, p.amp_lo, p.amp_hi) : 1.0;
        const double ph = p.sweep == SweepAxis::phase ? detail::ramp(n, n_packets, p.phase_lo, p.phase_hi) : 0.0;
        s.factors[n][*pos] = std::polar(amp, ph);
      }
      s.modified_tones = {p.tone};
      s.anchor_set = detail::all_tones_except(*grid, s.modified_tones);
      break;
    }
    case ScheduleKind::tone_block: {
      if (p.block_first > p.block_last) throw ConfigError("tone block is empty");
      for (std::size_t k = 0; k < K; ++k) {
        const int m = grid->indices[k];
        if (m >= p.block_first && m <= p.block_last) {
          s.modified_tones.push_back(m);
          for (auto& row : s.factors) row[k] = p.block_factor;
        }
      }
      if (s.modified_tones.empty()) throw ConfigError("tone block contains no grid tones");
      s.anchor_set = detail::all_tones_except(*grid, s.modified_tones);
      if (s.anchor_set.empty()) throw ConfigError("tone block leaves no anchor tones");
      break;
    }
    default:
      break;
  }
  return s;
}

/// The receiver's input before distortion: one true channel vector per packet.
struct IdealStream {
  GridPtr grid;
  std::vector<std::int64_t> ts_us;
  std::vector<CsiVector> packets;

  std::size_t size() const noexcept { return packets.size(); }
};

/// Hadamard product of the static channel with each packet's precoding factors.
inline IdealStream apply_precoding(const StaticChannel& channel, const PrecodingSchedule& schedule) {
  if (!same_grid(channel.grid, schedule.grid)) throw ConfigError("channel and schedule grids differ");
  IdealStream out;
  out.grid = schedule.grid;
  out.ts_us = schedule.ts_us;
  out.packets.resize(schedule.size());
  for (std::size_t n = 0; n < schedule.size(); ++n) {
    auto& row = out.packets[n];
    row.resize(channel.response.size());
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = channel.response[k] * schedule.factors[n][k];
  }
  return out;
}

}  // namespace csilab::emulator
