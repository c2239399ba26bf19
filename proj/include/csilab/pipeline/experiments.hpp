#pragma once

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "csilab/core/stats.hpp"
#include "csilab/emulator/channel.hpp"
#include "csilab/emulator/receiver.hpp"
#include "csilab/emulator/schedule.hpp"
#include "csilab/estimators/music.hpp"
#include "csilab/estimators/pdp.hpp"
#include "csilab/eval/cross_device.hpp"
#include "csilab/eval/dataset.hpp"
#include "csilab/eval/report.hpp"
#include "csilab/eval/variant.hpp"
#include "csilab/metrics/deviation.hpp"
#include "csilab/metrics/mahalanobis.hpp"
#include "csilab/metrics/mi.hpp"
#include "csilab/metrics/noise.hpp"
#include "csilab/pipeline/artifacts.hpp"
#include "csilab/pipeline/config.hpp"
#include "csilab/preprocess/filters.hpp"
#include "csilab/preprocess/gain.hpp"
#include "csilab/preprocess/phase.hpp"
#include "csilab/preprocess/profile.hpp"

namespace csilab::pipeline {

/// Runs fn(0..n-1) on up to `jobs` threads. The first exception (by index) is rethrown.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](std::size_t start, std::size_t step) {
    for (std::size_t i = start; i < n; i += step) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto t = static_cast<std::size_t>(std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n))));
  if (t <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < t; ++i) threads.emplace_back(work, i, t);
    for (auto& th : threads) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline GridPtr config_grid(const PipelineConfig& c) {
  return make_grid(standard_grid(c.channel.standard, c.channel.center_freq_hz));
}

inline emulator::PrecodingSchedule config_schedule(const PipelineConfig& c, const GridPtr& grid) {
  const auto kind = c.schedule.kind ? *c.schedule.kind : *default_schedule(c.experiment);
  return emulator::make_schedule(kind, c.schedule.params, c.schedule.n_packets(), c.schedule.rate_pps, grid,
                                 substream(c.seed, "schedule"));
}

/// Receiver profile from a static calibration session of `calibration_packets` packets.
inline preprocess::ReceiverProfile calibration_profile(const PipelineConfig& c, const emulator::StaticChannel& channel,
                                                       std::size_t r) {
  const auto sched = emulator::make_schedule(emulator::ScheduleKind::constant, {}, c.preprocessing.calibration_packets,
                                             c.schedule.rate_pps, channel.grid, 0);
  const auto series = emulator::distort(emulator::apply_precoding(channel, sched), c.receivers[r].model,
                                        substream(c.seed, "calibration", r));
  return preprocess::extract_profile(series, 0, c.receivers[r].model.name);
}

/// Equalization (after a PADS detrend) when a profile is given, then the configured detrend,
/// gain normalization and amplitude filter.
inline CsiSeries preprocess_series(const CsiSeries& s, const PreprocessConfig& p,
                                   const preprocess::ReceiverProfile* profile, const std::vector<int>& anchors = {}) {
  CsiSeries out = s;
  if (profile) out = preprocess::equalize(preprocess::detrend_phase(out, preprocess::DetrendMethod::pads), *profile);
  if (p.detrend) out = preprocess::detrend_phase(out, *p.detrend);
  if (p.gain != preprocess::GainMethod::none) {
    preprocess::GainOptions o{p.gain, {}, true};
    for (int m : anchors) {
      if (out.grid()->position_of(m)) o.anchors.push_back(m);
    }
    out = preprocess::normalize_gain(out, o);
  }
  if (p.filter) out = preprocess::filter_series(out, *p.filter);
  return out;
}

inline emulator::StaticChannel config_channel(const PipelineConfig& c) {
  return emulator::multipath_channel(c.channel.paths, config_grid(c));
}

/// Distorted series of every receiver for the configured schedule.
inline std::vector<CsiSeries> emulate_all(const PipelineConfig& c, const emulator::IdealStream& ideal, unsigned jobs) {
  std::vector<CsiSeries> out(c.receivers.size());
  parallel_for(out.size(), jobs, [&](std::size_t r) {
    out[r] = emulator::distort(ideal, c.receivers[r].model, substream(c.seed, "receiver", r));
    out[r].meta["experiment"] = to_string(c.experiment);
  });
  return out;
}

namespace detail {

inline double power_db(const CsiVector& h) {
  double p = 0.0;
  for (const auto& v : h) p += std::norm(v);
  return 10.0 * std::log10(p / static_cast<double>(h.size()));
}

inline void add_series(Artifacts& a, const PipelineConfig& c, const std::vector<CsiSeries>& series) {
  if (!c.write_series) return;
  for (const auto& s : series) {
    if (!s.empty()) a.add_series("series/" + s.receiver_id() + ".ndjson", s);
  }
}

}  // namespace detail

inline Artifacts run_agc_sweep(const PipelineConfig& c, unsigned jobs) {
  const auto channel = config_channel(c);
  const auto sched = config_schedule(c, channel.grid);
  const auto series = emulate_all(c, emulator::apply_precoding(channel, sched), jobs);
  const std::vector<preprocess::GainMethod> methods = {preprocess::GainMethod::none, preprocess::GainMethod::l1,
                                                        preprocess::GainMethod::l2, preprocess::GainMethod::rssi};
  Csv csv({{"receiver", "receiver name"},
           {"method", "gain normalization (none, l1, l2, rssi)"},
           {"seq", "packet sequence number"},
           {"true_gain_db", "transmit gain applied by the schedule, dB"},
           {"power_db", "mean per-tone power of the normalized CSI, dB"}});
  ordered_json summary = ordered_json::array();
  for (const auto& s : series) {
    for (auto m : methods) {
      std::vector<double> truth, power;
      for (const auto& f : s.frames) {
        const double g = 20.0 * std::log10(std::abs(sched.factors[f.seq].front()));
        const double p = detail::power_db(preprocess::normalize_gain(f.csi, f.grid->indices, f.rssi_db, {m, {}, false}));
        truth.push_back(g);
        power.push_back(p);
        csv.row(s.receiver_id(), std::string(preprocess::to_string(m)), f.seq, g, p);
      }
      ordered_json j;
      j["receiver"] = s.receiver_id();
      j["method"] = preprocess::to_string(m);
      j["corr_with_true_gain"] = stats::pearson(truth, power);
      j["power_std_db"] = stats::stddev(power);
      j["packets"] = s.size();
      summary.push_back(std::move(j));
    }
  }
  Artifacts a;
  a.add_csv("agc_sweep.csv", csv, "per-packet reported power against the known transmit gain");
  a.add_json("summary.json", {{"experiment", "agc_sweep"}, {"receivers", summary}});
  detail::add_series(a, c, series);
  return a;
}

inline Artifacts run_doppler(const PipelineConfig& c, unsigned jobs) {
  const auto channel = config_channel(c);
  const auto sched = config_schedule(c, channel.grid);
  const auto series = emulate_all(c, emulator::apply_precoding(channel, sched), jobs);
  const double truth = c.schedule.params.velocity_mps;
  std::vector<estimators::VelocityEstimates> est(series.size());
  parallel_for(series.size(), jobs, [&](std::size_t r) {
    std::optional<preprocess::ReceiverProfile> prof;
    if (c.preprocessing.equalize) prof = calibration_profile(c, channel, r);
    est[r] = estimators::estimate_velocity(preprocess_series(series[r], c.preprocessing, prof ? &*prof : nullptr),
                                           c.estimator.music);
  });
  Csv csv({{"receiver", "receiver name"},
           {"window_start_us", "timestamp of the first packet in the window, microseconds"},
           {"velocity_mps", "MUSIC velocity estimate, m/s"},
           {"error_mps", "estimate minus the emulated velocity, m/s"}});
  ordered_json summary = ordered_json::array();
  for (std::size_t r = 0; r < series.size(); ++r) {
    std::vector<double> err;
    for (std::size_t i = 0; i < est[r].velocity.size(); ++i) {
      err.push_back(est[r].velocity[i] - truth);
      csv.row(series[r].receiver_id(), est[r].window_start_us[i], est[r].velocity[i], err.back());
    }
    ordered_json j;
    j["receiver"] = series[r].receiver_id();
    j["true_velocity_mps"] = truth;
    j["windows"] = est[r].velocity.size();
    j["skipped"] = est[r].skipped;
    j["median_velocity_mps"] = est[r].median;
    j["median_error_mps"] = stats::median(err);
    j["iqr_mps"] = est[r].iqr;
    summary.push_back(std::move(j));
  }
  Artifacts a;
  a.add_csv("velocity.csv", csv, "per-window Doppler-MUSIC velocity estimates");
  a.add_json("summary.json", {{"experiment", "doppler"}, {"receivers", summary}});
  detail::add_series(a, c, series);
  return a;
}

struct TofStats {
  std::vector<std::uint64_t> seq;
  std::vector<double> truth_s;
  std::vector<double> est_s;  // NaN when fewer than two peaks were found
  double mean_abs_error_s = std::numeric_limits<double>::quiet_NaN();
  std::size_t missing = 0;
};

inline TofStats tof_errors(const CsiSeries& s, const emulator::PrecodingSchedule& sched, double threshold,
                           std::size_t stride) {
  TofStats t;
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); i += stride) {
    const auto& f = s.frames[i];
    const double truth = sched.delta_m[f.seq] / kSpeedOfLight;
    const auto e = estimators::estimate_tof(estimators::compute_pdp(f), threshold);
    t.seq.push_back(f.seq);
    t.truth_s.push_back(truth);
    t.est_s.push_back(e ? *e : std::numeric_limits<double>::quiet_NaN());
    if (e) {
      acc += std::abs(*e - truth);
      ++n;
    } else {
      ++t.missing;
    }
  }
  if (n) t.mean_abs_error_s = acc / static_cast<double>(n);
  return t;
}

inline Artifacts run_tof(const PipelineConfig& c, unsigned jobs) {
  const auto channel = config_channel(c);
  const auto sched = config_schedule(c, channel.grid);
  const auto series = emulate_all(c, emulator::apply_precoding(channel, sched), jobs);
  std::vector<TofStats> main(series.size()), plain(series.size());
  parallel_for(series.size(), jobs, [&](std::size_t r) {
    const auto& e = c.estimator;
    if (c.preprocessing.equalize) {
      const auto prof = calibration_profile(c, channel, r);
      main[r] = tof_errors(preprocess_series(series[r], c.preprocessing, &prof), sched, e.tof_threshold, e.tof_stride);
    }
    plain[r] = tof_errors(preprocess_series(series[r], c.preprocessing, nullptr), sched, e.tof_threshold, e.tof_stride);
    if (!c.preprocessing.equalize) main[r] = plain[r];
  });
  Csv csv({{"receiver", "receiver name"},
           {"seq", "packet sequence number"},
           {"true_tof_ns", "emulated delay difference between the two paths, ns"},
           {"est_tof_ns", "PDP estimate, ns; empty when fewer than two peaks pass the threshold"},
           {"error_ns", "estimate minus truth, ns"}});
  ordered_json summary = ordered_json::array();
  for (std::size_t r = 0; r < series.size(); ++r) {
    const auto& t = main[r];
    for (std::size_t i = 0; i < t.seq.size(); ++i) {
      csv.row(series[r].receiver_id(), t.seq[i], t.truth_s[i] * 1e9, t.est_s[i] * 1e9, (t.est_s[i] - t.truth_s[i]) * 1e9);
    }
    const auto g = series[r].grid();
    ordered_json j;
    j["receiver"] = series[r].receiver_id();
    j["equalized"] = c.preprocessing.equalize;
    j["bin_ns"] = 1e9 / (static_cast<double>(g->indices.back() - g->indices.front() + 1) * kToneSpacingHz);
    j["unambiguous_ns"] = g->unambiguous_delay_s() * 1e9;
    j["estimates"] = t.seq.size() - t.missing;
    j["missing"] = t.missing;
    j["mean_abs_error_ns"] = t.mean_abs_error_s * 1e9;
    if (c.preprocessing.equalize) j["mean_abs_error_unequalized_ns"] = plain[r].mean_abs_error_s * 1e9;
    summary.push_back(std::move(j));
  }
  Artifacts a;
  a.add_csv("tof.csv", csv, "per-packet PDP time-of-flight estimates");
  a.add_json("summary.json", {{"experiment", "tof"}, {"threshold", c.estimator.tof_threshold}, {"receivers", summary}});
  detail::add_series(a, c, series);
  return a;
}

inline Artifacts run_profile_stability(const PipelineConfig& c, unsigned jobs) {
  const auto channel = config_channel(c);
  const auto sched = emulator::make_schedule(emulator::ScheduleKind::constant, {}, c.eval.session_packets,
                                             c.schedule.rate_pps, channel.grid, 0);
  const auto ideal = emulator::apply_precoding(channel, sched);
  const auto R = c.receivers.size();
  const auto S = static_cast<std::size_t>(c.eval.sessions);
  std::vector<preprocess::ReceiverProfile> profiles(R * S);
  parallel_for(R * S, jobs, [&](std::size_t i) {
    const std::size_t r = i / S, s = i % S;
    const auto series = emulator::distort(ideal, c.receivers[r].model, substream(c.seed, "session", r, s));
    profiles[i] = preprocess::extract_profile(series, 0, c.receivers[r].model.name + "/" + std::to_string(s));
  });
  Csv csv({{"receiver", "receiver name"},
           {"session", "session index"},
           {"tone", "subcarrier index"},
           {"amp", "profile amplitude A_k"},
           {"phase_rad", "profile phase Phi_k, rad"}});
  Artifacts a;
  ordered_json summary = ordered_json::array();
  for (std::size_t r = 0; r < R; ++r) {
    std::vector<preprocess::ReceiverProfile> mine(profiles.begin() + static_cast<std::ptrdiff_t>(r * S),
                                                  profiles.begin() + static_cast<std::ptrdiff_t>((r + 1) * S));
    std::ostringstream nd;
    for (std::size_t s = 0; s < S; ++s) {
      nd << preprocess::encode_profile(mine[s]) << '\n';
      for (std::size_t k = 0; k < mine[s].amp.size(); ++k) {
        csv.row(c.receivers[r].model.name, s, mine[s].grid->indices[k], mine[s].amp[k], mine[s].phase[k]);
      }
    }
    const auto& name = c.receivers[r].model.name;
    a.add("profiles/" + name + ".ndjson", nd.str());
    a.add("profiles/" + name + ".ndjson.meta.json", ordered_json{{"grid", grid_to_json(*mine[0].grid)}}.dump(2) + "\n");
    const auto st = preprocess::stability_score(mine);
    ordered_json j;
    j["receiver"] = name;
    j["sessions"] = S;
    j["packets_per_session"] = c.eval.session_packets;
    j["score"] = st.score;
    j["min_pair"] = st.min_pair;
    j["nonpositive_pair"] = st.nonpositive_pair;
    summary.push_back(std::move(j));
  }
  a.add_csv("profiles.csv", csv, "calibration profiles per receiver and session");
  a.add_json("summary.json", {{"experiment", "profile_stability"}, {"receivers", summary}});
  return a;
}

inline void noise_rows(Csv& csv, const std::string& rx, const std::string& stage, const metrics::NoiseReport& n) {
  for (std::size_t k = 0; k < n.tones.size(); ++k) {
    const auto& a = n.amplitude[k];
    const auto& p = n.phase[k];
    csv.row(rx, stage, n.tones[k], a.std, a.iqr, a.skewness, a.excess_kurtosis, p.std, p.iqr, p.skewness,
            p.excess_kurtosis);
  }
}

inline Artifacts run_noise(const PipelineConfig& c, unsigned jobs) {
  const auto channel = config_channel(c);
  const auto sched = config_schedule(c, channel.grid);
  const auto series = emulate_all(c, emulator::apply_precoding(channel, sched), jobs);
  struct Out {
    metrics::NoiseReport raw;
    std::optional<metrics::NoiseReport> filtered;
    std::size_t removed = 0;
    double threshold = 0.0;
    metrics::CorrelationResult corr;
  };
  std::vector<Out> out(series.size());
  parallel_for(series.size(), jobs, [&](std::size_t r) {
    std::optional<preprocess::ReceiverProfile> prof;
    if (c.preprocessing.equalize) prof = calibration_profile(c, channel, r);
    const auto s = preprocess_series(series[r], c.preprocessing, prof ? &*prof : nullptr, sched.anchor_set);
    out[r].raw = metrics::noise_stats(s);
    out[r].corr = metrics::noise_correlation(s);
    if (c.preprocessing.mahalanobis_p) {
      out[r].threshold = metrics::chi2_quantile(static_cast<double>(s.grid()->size()), *c.preprocessing.mahalanobis_p);
      auto f = metrics::mahalanobis_filter(s, out[r].threshold);
      out[r].removed = f.removed;
      out[r].filtered = metrics::noise_stats(f.kept);
    }
  });
  Csv csv({{"receiver", "receiver name"},
           {"stage", "preprocessed or mahalanobis (after outlier filtering)"},
           {"tone", "subcarrier index"},
           {"amp_std", "amplitude standard deviation"},
           {"amp_iqr", "amplitude interquartile range"},
           {"amp_skew", "amplitude skewness"},
           {"amp_kurt", "amplitude excess kurtosis"},
           {"phase_std", "phase standard deviation about the circular mean, rad"},
           {"phase_iqr", "phase interquartile range, rad"},
           {"phase_skew", "phase skewness"},
           {"phase_kurt", "phase excess kurtosis"}});
  ordered_json summary = ordered_json::array();
  for (std::size_t r = 0; r < series.size(); ++r) {
    const auto& rx = series[r].receiver_id();
    noise_rows(csv, rx, "preprocessed", out[r].raw);
    ordered_json j;
    j["receiver"] = rx;
    j["preprocessed"] = metrics::noise_json(out[r].raw);
    j["corr_lag1"] = out[r].corr.mean_at_lag(1);
    j["flagged_tones"] = out[r].corr.flagged_tones;
    if (out[r].filtered) {
      noise_rows(csv, rx, "mahalanobis", *out[r].filtered);
      j["mahalanobis"] = metrics::noise_json(*out[r].filtered);
      j["mahalanobis"]["threshold_d2"] = out[r].threshold;
      j["mahalanobis"]["removed"] = out[r].removed;
    }
    summary.push_back(std::move(j));
  }
  Artifacts a;
  a.add_csv("noise.csv", csv, "per-tone noise moments of static captures");
  a.add_json("summary.json", {{"experiment", "noise"}, {"receivers", summary}});
  detail::add_series(a, c, series);
  return a;
}

inline Artifacts run_faithfulness(const PipelineConfig& c, unsigned jobs) {
  const auto channel = config_channel(c);
  const auto sched = config_schedule(c, channel.grid);
  const auto series = emulate_all(c, emulator::apply_precoding(channel, sched), jobs);
  std::vector<metrics::DeviationReport> dev(series.size());
  parallel_for(series.size(), jobs, [&](std::size_t r) {
    const auto prof = calibration_profile(c, channel, r);
    dev[r] = metrics::response_deviation(metrics::calibrate_for_deviation(series[r], prof), sched);
  });
  Csv csv({{"receiver", "receiver name"},
           {"tone", "subcarrier index"},
           {"modified", "1 when the schedule precodes this tone"},
           {"amp_dev", "mean absolute amplitude deviation from the precoded factor"},
           {"phase_dev", "mean absolute wrapped phase deviation, rad"}});
  ordered_json summary = ordered_json::array();
  for (std::size_t r = 0; r < series.size(); ++r) {
    const auto& d = dev[r];
    double am = 0, pm = 0, aa = 0, pa = 0;
    std::size_t nm = 0, na = 0;
    for (std::size_t k = 0; k < d.tones.size(); ++k) {
      const bool mod = std::find(sched.modified_tones.begin(), sched.modified_tones.end(), d.tones[k]) !=
                       sched.modified_tones.end();
      csv.row(series[r].receiver_id(), d.tones[k], mod, d.amp[k], d.phase[k]);
      (mod ? am : aa) += d.amp[k];
      (mod ? pm : pa) += d.phase[k];
      ++(mod ? nm : na);
    }
    ordered_json j;
    j["receiver"] = series[r].receiver_id();
    j["packets"] = d.n_packets;
    j["modified_amp_dev"] = nm ? am / static_cast<double>(nm) : 0.0;
    j["modified_phase_dev"] = nm ? pm / static_cast<double>(nm) : 0.0;
    j["anchor_amp_dev"] = na ? aa / static_cast<double>(na) : 0.0;
    j["anchor_phase_dev"] = na ? pa / static_cast<double>(na) : 0.0;
    summary.push_back(std::move(j));
  }
  Artifacts a;
  a.add_csv("deviation.csv", csv, "per-tone deviation between calibrated CSI and the precoded change");
  a.add_json("summary.json", {{"experiment", "faithfulness"}, {"receivers", summary}});
  detail::add_series(a, c, series);
  return a;
}

inline Artifacts run_sensitivity(const PipelineConfig& c, unsigned jobs) {
  const auto channel = config_channel(c);
  const auto sched = config_schedule(c, channel.grid);
  const auto series = emulate_all(c, emulator::apply_precoding(channel, sched), jobs);
  const int tone = c.schedule.params.tone;
  const auto tpos = *channel.grid->position_of(tone);
  const bool amp_axis = c.schedule.params.sweep == emulator::SweepAxis::amplitude;
  std::vector<CsiSeries> proc(series.size());
  std::vector<double> mi(series.size());
  parallel_for(series.size(), jobs, [&](std::size_t r) {
    std::optional<preprocess::ReceiverProfile> prof;
    if (c.preprocessing.equalize) prof = calibration_profile(c, channel, r);
    proc[r] = preprocess_series(series[r], c.preprocessing, prof ? &*prof : nullptr, sched.anchor_set);
    const auto pos = *proc[r].grid()->position_of(tone);
    metrics::Samples x{proc[r].size(), 1, {}}, y{proc[r].size(), 2, {}};
    for (const auto& f : proc[r].frames) {
      const auto ck = sched.factors[f.seq][tpos];
      x.v.push_back(amp_axis ? std::abs(ck) : std::arg(ck));
      y.v.push_back(f.csi[pos].real());
      y.v.push_back(f.csi[pos].imag());
    }
    mi[r] = metrics::mutual_information_knn(x, y, c.eval.mi_k, substream(c.seed, "mi", r));
  });
  Csv csv({{"receiver", "receiver name"},
           {"seq", "packet sequence number"},
           {"parameter", "swept precoding amplitude or phase (rad) on the target tone"},
           {"re", "real part of the preprocessed CSI on the target tone"},
           {"im", "imaginary part of the preprocessed CSI on the target tone"}});
  ordered_json summary = ordered_json::array();
  for (std::size_t r = 0; r < series.size(); ++r) {
    const auto pos = *proc[r].grid()->position_of(tone);
    for (const auto& f : proc[r].frames) {
      const auto ck = sched.factors[f.seq][tpos];
      csv.row(proc[r].receiver_id(), f.seq, amp_axis ? std::abs(ck) : std::arg(ck), f.csi[pos].real(), f.csi[pos].imag());
    }
    ordered_json j;
    j["receiver"] = series[r].receiver_id();
    j["tone"] = tone;
    j["axis"] = amp_axis ? "amplitude" : "phase";
    j["samples"] = proc[r].size();
    j["k"] = c.eval.mi_k;
    j["mi_nats"] = mi[r];
    j["mi_bits"] = metrics::nats_to_bits(mi[r]);
    summary.push_back(std::move(j));
  }
  Artifacts a;
  a.add_csv("sensitivity.csv", csv, "swept parameter against the preprocessed CSI of the target tone");
  a.add_json("summary.json", {{"experiment", "sensitivity"}, {"receivers", summary}});
  detail::add_series(a, c, series);
  return a;
}

/// Two receivers whose gain control differs in kind or parameters.
inline bool agc_distinct(const emulator::ReceiverModel& a, const emulator::ReceiverModel& b) { return !(a.agc == b.agc); }

struct VariantSummary {
  std::string variant;
  double median_off_diagonal = 0.0;  // over seeds and AGC-distinct pairs
  double min_off_diagonal = 1.0;
  double mean_diagonal = 0.0;
  std::size_t pairs = 0;
};

/// Pools the off-diagonal accuracies of AGC-distinct pairs over all seeds.
inline std::vector<VariantSummary> summarize_cross_device(const std::vector<eval::CrossDeviceResult>& runs,
                                                          const std::vector<emulator::ReceiverModel>& models) {
  std::vector<VariantSummary> out;
  if (runs.empty()) return out;
  for (std::size_t v = 0; v < runs.front().variants.size(); ++v) {
    VariantSummary s;
    s.variant = runs.front().variants[v].variant;
    std::vector<double> off;
    double diag = 0.0;
    std::size_t nd = 0;
    for (const auto& run : runs) {
      const auto D = run.devices.size();
      const auto& pairs = run.variants[v].pairs;
      for (std::size_t a = 0; a < D; ++a) {
        for (std::size_t b = 0; b < D; ++b) {
          const double acc = pairs[a * D + b].accuracy;
          if (a == b) {
            diag += acc;
            ++nd;
          } else if (agc_distinct(models[a], models[b])) {
            off.push_back(acc);
            s.min_off_diagonal = std::min(s.min_off_diagonal, acc);
          }
        }
      }
    }
    s.pairs = off.size();
    s.median_off_diagonal = off.empty() ? std::numeric_limits<double>::quiet_NaN() : stats::median(off);
    s.mean_diagonal = nd ? diag / static_cast<double>(nd) : 0.0;
    out.push_back(s);
  }
  return out;
}

/// Cross-device matrices for `seeds` independent surrogate datasets.
inline std::vector<eval::CrossDeviceResult> cross_device_runs(const eval::ActivityConfig& activity,
                                                              const std::vector<emulator::ReceiverModel>& models,
                                                              const std::vector<eval::Variant>& variants,
                                                              std::uint64_t seed, int seeds, unsigned jobs) {
  std::vector<eval::CrossDeviceResult> runs(static_cast<std::size_t>(seeds));
  parallel_for(runs.size(), jobs, [&](std::size_t s) {
    const auto run_seed = substream(seed, "cross_device", s);
    const auto data = eval::gen_activity_dataset(activity, models, run_seed);
    runs[s] = eval::cross_device_experiment(data, variants, run_seed);
  });
  return runs;
}

inline Artifacts run_cross_device(const PipelineConfig& c, unsigned jobs) {
  std::vector<emulator::ReceiverModel> models;
  for (const auto& r : c.receivers) models.push_back(r.model);
  std::vector<eval::Variant> variants;
  for (const auto& v : c.eval.variants) variants.push_back(eval::parse_variant(v));
  const auto runs = cross_device_runs(c.eval.activity, models, variants, c.seed, c.eval.seeds, jobs);

  // Within-device CV with BCa intervals on the first seed's data.
  const auto data = eval::gen_activity_dataset(c.eval.activity, models, substream(c.seed, "cross_device", 0));
  std::vector<eval::EvalReport> reports(data.size() * variants.size());
  parallel_for(reports.size(), jobs, [&](std::size_t i) {
    const std::size_t d = i / variants.size(), v = i % variants.size();
    reports[i] = eval::evaluate(data[d], variants[v], c.eval.folds, c.eval.repeats, c.eval.n_boot,
                                substream(c.seed, "within_device", d));
  });

  Csv csv({{"seed_index", "index of the surrogate dataset"},
           {"variant", "preprocessing variant"},
           {"train", "receiver the classifier was trained on"},
           {"test", "receiver the classifier was tested on"},
           {"agc_distinct", "1 when the two receivers differ in gain control"},
           {"accuracy", "1-NN accuracy"}});
  for (std::size_t s = 0; s < runs.size(); ++s) {
    const auto D = runs[s].devices.size();
    for (const auto& m : runs[s].variants) {
      for (std::size_t p = 0; p < m.pairs.size(); ++p) {
        csv.row(s, m.variant, m.pairs[p].train_device, m.pairs[p].test_device,
                p / D != p % D && agc_distinct(models[p / D], models[p % D]), m.pairs[p].accuracy);
      }
    }
  }
  ordered_json vs = ordered_json::array();
  for (const auto& s : summarize_cross_device(runs, models)) {
    vs.push_back({{"variant", s.variant},
                  {"median_off_diagonal", s.median_off_diagonal},
                  {"min_off_diagonal", s.min_off_diagonal},
                  {"mean_diagonal", s.mean_diagonal},
                  {"pairs", s.pairs}});
  }
  ordered_json within = ordered_json::array();
  for (const auto& r : reports) within.push_back(eval::to_json(r));

  Artifacts a;
  a.add_csv("cross_device.csv", csv, "train/test accuracy for every receiver pair, variant and seed");
  a.add_csv("confusion.csv",
            {{"variant", "preprocessing variant"},
             {"train", "training receiver"},
             {"test", "test receiver"},
             {"true", "true class"},
             {"pred", "predicted class"},
             {"count", "number of test examples"}},
            eval::confusion_csv(runs.front()), "confusion counts of the first seed");
  a.add_json("cross_device_seed0.json", eval::to_json(runs.front()));
  a.add_json("summary.json", {{"experiment", "cross_device"},
                              {"seeds", c.eval.seeds},
                              {"devices", runs.front().devices},
                              {"variants", vs},
                              {"within_device", within}});
  return a;
}

inline Artifacts run_experiment(const PipelineConfig& c, unsigned jobs) {
  switch (c.experiment) {
    case Experiment::agc_sweep: return run_agc_sweep(c, jobs);
    case Experiment::doppler: return run_doppler(c, jobs);
    case Experiment::tof: return run_tof(c, jobs);
    case Experiment::profile_stability: return run_profile_stability(c, jobs);
    case Experiment::noise: return run_noise(c, jobs);
    case Experiment::faithfulness: return run_faithfulness(c, jobs);
    case Experiment::sensitivity: return run_sensitivity(c, jobs);
    case Experiment::cross_device: return run_cross_device(c, jobs);
  }
  throw ConfigError("unhandled experiment");
}

/// Runs the configured experiment and writes its artifacts and manifest to `c.output_dir`.
inline ordered_json run(const PipelineConfig& c, unsigned jobs = 1) {
  const auto artifacts = run_experiment(c, jobs);
  return write_artifacts(c.output_dir, artifacts, c.effective, to_string(c.experiment), c.seed);
}

}  // namespace csilab::pipeline
