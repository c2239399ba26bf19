#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "csilab/emulator/channel.hpp"
#include "csilab/emulator/receiver.hpp"
#include "csilab/emulator/schedule.hpp"
#include "csilab/preprocess/standardize.hpp"

namespace csilab::eval {

using preprocess::Tensor3;

/// Amplitude recordings of one receiver: examples x time x tone, plus per-frame RSSI.
struct LabeledDataset {
  std::string receiver_id;
  Tensor3 features;
  std::vector<double> rssi_db;  // examples x time
  std::vector<int> labels;
  int n_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
};

inline void validate_dataset(const LabeledDataset& d) {
  if (d.features.n != d.labels.size()) throw ValidationError("feature and label counts differ");
  if (!d.rssi_db.empty() && d.rssi_db.size() != d.features.n * d.features.t) {
    throw ValidationError("rssi array does not match the feature shape");
  }
  std::vector<int> counts(static_cast<std::size_t>(std::max(d.n_classes, 0)), 0);
  for (int l : d.labels) {
    if (l < 0 || l >= d.n_classes) throw ValidationError("label outside [0, n_classes)");
    ++counts[static_cast<std::size_t>(l)];
  }
  if (d.n_classes < 2) throw ValidationError("dataset needs at least 2 classes");
  for (int c : counts) {
    if (c < 2) throw ValidationError("every class needs at least 2 examples");
  }
}

/// Rows `idx` of a dataset.
inline LabeledDataset subset(const LabeledDataset& d, const std::vector<std::size_t>& idx) {
  LabeledDataset s;
  s.receiver_id = d.receiver_id;
  s.n_classes = d.n_classes;
  s.features = Tensor3(idx.size(), d.features.t, d.features.k);
  const std::size_t ex = d.features.example_size();
  const bool has_rssi = !d.rssi_db.empty();
  if (has_rssi) s.rssi_db.resize(idx.size() * d.features.t);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(d.features.data.begin() + static_cast<std::ptrdiff_t>(idx[i] * ex), ex,
                s.features.data.begin() + static_cast<std::ptrdiff_t>(i * ex));
    if (has_rssi) {
      std::copy_n(d.rssi_db.begin() + static_cast<std::ptrdiff_t>(idx[i] * d.features.t), d.features.t,
                  s.rssi_db.begin() + static_cast<std::ptrdiff_t>(i * d.features.t));
    }
    s.labels.push_back(d.labels[idx[i]]);
  }
  return s;
}

/// Surrogate activity recordings. Class c moves a reflector at velocity v0 + c * v_step from
/// path-length offset delta0 + c * delta_step; every example jitters both and draws a transmit gain.
struct ActivityConfig {
  int n_classes = 4;
  int n_per_class = 30;
  std::size_t n_time = 200;
  double rate_pps = 100.0;
  double center_freq_hz = 2.412e9;
  double a = 0.7;
  double b = 0.3;
  double v0_mps = 0.5;
  double v_step_mps = 0.25;
  double v_jitter = 0.02;  // relative
  double delta0_m = 60.0;
  double delta_step_m = 40.0;
  double delta_jitter_m = 1.0;
  double tx_gain_spread_db = 3.0;
};

/// Nearest-timestamp resampling onto n_time points at the nominal rate.
inline std::vector<std::size_t> nearest_frames(const CsiSeries& s, std::size_t n_time, double rate_pps) {
  if (s.empty()) throw DegenerateError("cannot resample an empty series");
  std::vector<std::size_t> pick(n_time);
  std::size_t j = 0;
  const auto t0 = s.frames.front().ts_us;
  for (std::size_t i = 0; i < n_time; ++i) {
    const double target = static_cast<double>(t0) + static_cast<double>(i) * 1e6 / rate_pps;
    while (j + 1 < s.size() &&
           std::abs(static_cast<double>(s.frames[j + 1].ts_us) - target) <= std::abs(static_cast<double>(s.frames[j].ts_us) - target)) {
      ++j;
    }
    pick[i] = j;
  }
  return pick;
}

/// One dataset per receiver; all receivers observe the same ideal stream for each example.
inline std::vector<LabeledDataset> gen_activity_dataset(const ActivityConfig& cfg,
                                                        const std::vector<emulator::ReceiverModel>& receivers,
                                                        std::uint64_t seed) {
  if (cfg.n_classes < 2) throw ConfigError("activity dataset needs at least 2 classes");
  if (cfg.n_per_class < 2) throw ConfigError("activity dataset needs at least 2 examples per class");
  if (receivers.empty()) throw ConfigError("activity dataset needs at least one receiver");
  auto grid = make_grid(standard_grid(Standard::ht20, cfg.center_freq_hz));

  Engine ch_eng = make_engine(substream(seed, "channel"));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<emulator::Path> paths;
  for (int p = 0; p < 3; ++p) {
    const double mag = p == 0 ? 1.0 : 0.2 + 0.3 * u01(ch_eng);
    paths.push_back({std::polar(mag, 2.0 * kPi * u01(ch_eng)), p == 0 ? 0.0 : 50e-9 + 250e-9 * u01(ch_eng)});
  }
  const auto channel = emulator::multipath_channel(paths, grid);

  const std::size_t n_examples = static_cast<std::size_t>(cfg.n_classes * cfg.n_per_class);
  std::vector<LabeledDataset> out(receivers.size());
  for (std::size_t r = 0; r < receivers.size(); ++r) {
    out[r].receiver_id = receivers[r].name;
    out[r].n_classes = cfg.n_classes;
    out[r].features = Tensor3(n_examples, cfg.n_time, decimate(*grid, receivers[r].reported_tones).size());
    out[r].rssi_db.resize(n_examples * cfg.n_time);
  }

  for (std::size_t e = 0; e < n_examples; ++e) {
    const int c = static_cast<int>(e) / cfg.n_per_class;
    Engine eng = make_engine(substream(seed, "example", e));
    emulator::ScheduleParams p;
    p.a = cfg.a;
    p.b = cfg.b;
    p.velocity_mps = (cfg.v0_mps + c * cfg.v_step_mps) * (1.0 + cfg.v_jitter * (2.0 * u01(eng) - 1.0));
    p.delta0_m = cfg.delta0_m + c * cfg.delta_step_m + cfg.delta_jitter_m * u01(eng);
    const double gain = std::pow(10.0, cfg.tx_gain_spread_db * (2.0 * u01(eng) - 1.0) / 20.0);
    auto sched = emulator::make_schedule(emulator::ScheduleKind::two_path_doppler, p, cfg.n_time, cfg.rate_pps, grid,
                                         substream(seed, "schedule", e));
    for (auto& row : sched.factors) {
      for (auto& v : row) v *= gain;
    }
    const auto ideal = emulator::apply_precoding(channel, sched);
    for (std::size_t r = 0; r < receivers.size(); ++r) {
      const auto series = emulator::distort(ideal, receivers[r], substream(seed, "receiver", e, r));
      if (series.empty()) throw DegenerateError("receiver dropped every packet of an example");
      const auto pick = nearest_frames(series, cfg.n_time, cfg.rate_pps);
      auto& d = out[r];
      for (std::size_t t = 0; t < cfg.n_time; ++t) {
        const auto& f = series.frames[pick[t]];
        for (std::size_t k = 0; k < f.csi.size(); ++k) d.features(e, t, k) = std::abs(f.csi[k]);
        d.rssi_db[e * cfg.n_time + t] = f.rssi_db;
      }
      d.labels.push_back(c);
    }
  }
  return out;
}

}  // namespace csilab::eval
