#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csilab/core/stats.hpp"
#include "csilab/emulator/schedule.hpp"
#include "csilab/preprocess/gain.hpp"
#include "csilab/preprocess/phase.hpp"
#include "csilab/preprocess/profile.hpp"

namespace csilab::metrics {

struct DeviationReport {
  std::vector<int> tones;
  std::vector<double> amp;    // mean | |H_eq| - |c| |
  std::vector<double> phase;  // mean |wrap(arg H_eq - arg c)| over packets with c != 0
  std::size_t n_packets = 0;
};

/// PADS detrend followed by equalization with the receiver's calibration profile.
inline CsiSeries calibrate_for_deviation(const CsiSeries& s, const preprocess::ReceiverProfile& profile) {
  return preprocess::equalize(preprocess::detrend_phase(s, preprocess::DetrendMethod::pads), profile);
}

/// Compares calibrated CSI with the known precoding factors, scaling every frame by the mean
/// amplitude over the schedule's anchor tones so that unmodified tones sit at 1.
inline DeviationReport response_deviation(const CsiSeries& calibrated, const emulator::PrecodingSchedule& sched) {
  if (sched.anchor_set.empty()) throw ConfigError("response deviation needs a nonempty anchor set");
  if (calibrated.empty()) throw DegenerateError("response deviation on an empty series");
  const auto& grid = *calibrated.grid();
  std::vector<std::size_t> sched_pos(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    auto p = sched.grid->position_of(grid.indices[k]);
    if (!p) throw ConfigError("series tone " + std::to_string(grid.indices[k]) + " missing from schedule grid");
    sched_pos[k] = *p;
  }
  std::vector<int> anchors;
  for (int m : sched.anchor_set) {
    if (grid.position_of(m)) anchors.push_back(m);
  }
  const preprocess::GainOptions opts{preprocess::GainMethod::anchored, anchors, true};

  DeviationReport r;
  r.tones = grid.indices;
  r.amp.assign(grid.size(), 0.0);
  r.phase.assign(grid.size(), 0.0);
  std::vector<std::size_t> phase_count(grid.size(), 0);
  for (const auto& f : calibrated.frames) {
    if (f.seq >= sched.size()) throw ValidationError("frame seq beyond schedule length");
    const auto& c = sched.factors[f.seq];
    const auto h = preprocess::normalize_gain(f.csi, grid.indices, f.rssi_db, opts);
    for (std::size_t k = 0; k < h.size(); ++k) {
      const cplx ck = c[sched_pos[k]];
      r.amp[k] += std::abs(std::abs(h[k]) - std::abs(ck));
      if (ck == cplx{}) continue;
      r.phase[k] += std::abs(stats::wrap_pi(std::arg(h[k]) - std::arg(ck)));
      ++phase_count[k];
    }
  }
  r.n_packets = calibrated.size();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    r.amp[k] /= static_cast<double>(r.n_packets);
    if (phase_count[k]) r.phase[k] /= static_cast<double>(phase_count[k]);
  }
  return r;
}

inline std::string deviation_csv(const DeviationReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "tone,amp_dev,phase_dev\n";
  for (std::size_t k = 0; k < r.tones.size(); ++k) os << r.tones[k] << ',' << r.amp[k] << ',' << r.phase[k] << '\n';
  return os.str();
}

}  // namespace csilab::metrics
