#pragma once

// JSON experiment configuration: parsing with full issue collection, `--set` overrides and
// cross-field validation.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "csilab/core/ndjson.hpp"
#include "csilab/emulator/channel.hpp"
#include "csilab/emulator/receiver.hpp"
#include "csilab/emulator/schedule.hpp"
#include "csilab/estimators/music.hpp"
#include "csilab/eval/dataset.hpp"
#include "csilab/eval/variant.hpp"
#include "csilab/preprocess/filters.hpp"
#include "csilab/preprocess/gain.hpp"
#include "csilab/preprocess/phase.hpp"

namespace csilab::pipeline {

enum class Experiment { agc_sweep, doppler, tof, profile_stability, noise, faithfulness, sensitivity, cross_device };

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"agc_sweep", "doppler",      "tof",         "profile_stability",
                                                 "noise",     "faithfulness", "sensitivity", "cross_device"};
  return names;
}

inline std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

inline Experiment parse_experiment(std::string_view s) {
  const auto& names = experiment_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == s) return static_cast<Experiment>(i);
  }
  throw ConfigError("unknown experiment '" + std::string(s) + "' (valid: " + join_names(names) + ")");
}

inline const std::string& to_string(Experiment e) { return experiment_names()[static_cast<std::size_t>(e)]; }

/// Schedule an experiment runs when the config does not name one.
inline std::optional<emulator::ScheduleKind> default_schedule(Experiment e) {
  using emulator::ScheduleKind;
  switch (e) {
    case Experiment::agc_sweep: return ScheduleKind::gain_sweep;
    case Experiment::doppler: return ScheduleKind::two_path_doppler;
    case Experiment::tof: return ScheduleKind::two_path_tof;
    case Experiment::profile_stability:
    case Experiment::noise: return ScheduleKind::constant;
    case Experiment::faithfulness: return ScheduleKind::tone_block;
    case Experiment::sensitivity: return ScheduleKind::single_tone;
    case Experiment::cross_device: return std::nullopt;
  }
  return std::nullopt;
}

struct Issue {
  std::string path;
  std::string message;
  bool warning = false;
};

using Issues = std::vector<Issue>;

inline bool has_errors(const Issues& issues) {
  return std::any_of(issues.begin(), issues.end(), [](const Issue& i) { return !i.warning; });
}

inline ordered_json issues_json(const Issues& issues) {
  auto arr = ordered_json::array();
  for (const auto& i : issues) {
    ordered_json j;
    j["path"] = i.path;
    j["severity"] = i.warning ? "warning" : "error";
    j["message"] = i.message;
    arr.push_back(std::move(j));
  }
  return arr;
}

/// Thrown when a config has at least one error; carries every issue found.
class ConfigIssues : public ConfigError {
 public:
  explicit ConfigIssues(Issues issues)
      : ConfigError("configuration has " + std::to_string(issues.size()) + " issue(s)"), issues_(std::move(issues)) {}
  const Issues& issues() const noexcept { return issues_; }

 private:
  Issues issues_;
};

struct ChannelConfig {
  std::string standard = "ht20";
  double center_freq_hz = 5.18e9;
  std::vector<emulator::Path> paths{emulator::Path{}};
};

struct ScheduleConfig {
  std::optional<emulator::ScheduleKind> kind;
  emulator::ScheduleParams params;
  double rate_pps = 500.0;
  double duration_s = 10.0;
  std::optional<std::size_t> packets;

  std::size_t n_packets() const { return packets ? *packets : emulator::packets_for(duration_s, rate_pps); }
};

struct ReceiverConfig {
  std::string preset;
  emulator::ReceiverModel model;
};

struct PreprocessConfig {
  std::optional<preprocess::DetrendMethod> detrend = preprocess::DetrendMethod::ls;
  preprocess::GainMethod gain = preprocess::GainMethod::l1;
  bool equalize = false;
  std::size_t calibration_packets = 2000;
  std::optional<preprocess::FilterSpec> filter;
  std::optional<double> mahalanobis_p;
};

struct EstimatorConfig {
  estimators::MusicConfig music;
  double tof_threshold = 0.05;
  std::size_t tof_stride = 1;
};

struct EvalConfig {
  int sessions = 5;
  std::size_t session_packets = 10000;
  int seeds = 10;
  std::vector<std::string> variants{"raw", "zscore-feature", "l1+zscore-feature"};
  eval::ActivityConfig activity;
  int folds = 5;
  int repeats = 2;
  std::size_t n_boot = 2000;
  std::size_t mi_k = 4;
};

struct PipelineConfig {
  Experiment experiment = Experiment::doppler;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  bool write_series = true;
  ChannelConfig channel;
  ScheduleConfig schedule;
  std::vector<ReceiverConfig> receivers;
  PreprocessConfig preprocessing;
  EstimatorConfig estimator;
  EvalConfig eval;
  ordered_json effective;  // the config document after overrides
};

namespace detail {

inline std::string type_name(const json& j) { return j.type_name(); }

/// Walks one JSON object, recording every type, range and unknown-key problem it meets.
class Reader {
 public:
  Reader(const json* j, std::string path, Issues* issues) : j_(j), path_(std::move(path)), issues_(issues) {
    if (j_ && !j_->is_object()) {
      error("", "expected an object, got " + type_name(*j_));
      j_ = nullptr;
    }
  }

  std::string at(std::string_view key) const {
    if (key.empty()) return path_;
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  void error(std::string_view key, std::string msg) const { issues_->push_back({at(key), std::move(msg), false}); }
  void warn(std::string_view key, std::string msg) const { issues_->push_back({at(key), std::move(msg), true}); }

  const json* get(const char* key) {
    seen_.insert(key);
    if (!j_) return nullptr;
    auto it = j_->find(key);
    if (it == j_->end() || it->is_null()) return nullptr;
    return &*it;
  }

  bool has(const char* key) const {
    if (!j_) return false;
    auto it = j_->find(key);
    return it != j_->end() && !it->is_null();
  }

  bool number(const char* key, double& out, double lo = -std::numeric_limits<double>::infinity(),
              double hi = std::numeric_limits<double>::infinity()) {
    const json* v = get(key);
    if (!v) return false;
    if (!v->is_number()) {
      error(key, "expected a number, got " + type_name(*v));
      return false;
    }
    const double x = v->get<double>();
    if (!std::isfinite(x) || x < lo || x > hi) {
      error(key, "value " + v->dump() + " outside [" + bound(lo) + ", " + bound(hi) + "]");
      return false;
    }
    out = x;
    return true;
  }

  bool positive(const char* key, double& out) {
    double x = out;
    if (!number(key, x)) return false;
    if (!(x > 0.0)) {
      error(key, "must be positive");
      return false;
    }
    out = x;
    return true;
  }

  template <class T>
  bool integer(const char* key, T& out, long long lo, long long hi) {
    const json* v = get(key);
    if (!v) return false;
    if (!v->is_number_integer()) {
      error(key, "expected an integer, got " + type_name(*v));
      return false;
    }
    long long x = 0;
    bool ok = true;
    if (v->is_number_unsigned()) {
      const auto u = v->get<unsigned long long>();
      ok = u <= static_cast<unsigned long long>(hi);
      x = ok ? static_cast<long long>(u) : 0;
    } else {
      x = v->get<long long>();
    }
    if (!ok || x < lo || x > hi) {
      error(key, "value " + v->dump() + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      return false;
    }
    out = static_cast<T>(x);
    return true;
  }

  bool boolean(const char* key, bool& out) {
    const json* v = get(key);
    if (!v) return false;
    if (!v->is_boolean()) {
      error(key, "expected true or false, got " + type_name(*v));
      return false;
    }
    out = v->get<bool>();
    return true;
  }

  bool string(const char* key, std::string& out) {
    const json* v = get(key);
    if (!v) return false;
    if (!v->is_string()) {
      error(key, "expected a string, got " + type_name(*v));
      return false;
    }
    out = v->get<std::string>();
    return true;
  }

  /// Parses a string through `parse`, which reports bad values by throwing ConfigError.
  template <class T, class Parse>
  bool choice(const char* key, T& out, Parse parse) {
    std::string s;
    if (!string(key, s)) return false;
    try {
      out = parse(s);
      return true;
    } catch (const ConfigError& e) {
      error(key, e.what());
      return false;
    }
  }

  Reader child(const char* key) { return Reader(get(key), at(key), issues_); }

  /// Reports keys present in the object but never asked for.
  void finish() const {
    if (!j_) return;
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      if (seen_.count(it.key())) continue;
      std::string valid;
      for (const auto& s : seen_) valid += (valid.empty() ? "" : ", ") + s;
      error(it.key(), "unknown key (valid: " + valid + ")");
    }
  }

  const json* raw() const { return j_; }
  Issues& issues() const { return *issues_; }

 private:
  static std::string bound(double x) {
    if (std::isinf(x)) return x < 0 ? "-inf" : "inf";
    std::ostringstream os;
    os << x;
    return os.str();
  }

  const json* j_;
  std::string path_;
  Issues* issues_;
  std::set<std::string> seen_;
};

inline void read_channel(Reader r, ChannelConfig& c) {
  r.string("standard", c.standard);
  r.positive("center_freq_hz", c.center_freq_hz);
  if (const json* paths = r.get("paths")) {
    if (!paths->is_array() || paths->empty()) {
      r.error("paths", "expected a nonempty array of {amplitude, phase_rad, delay_ns}");
    } else {
      c.paths.clear();
      for (std::size_t i = 0; i < paths->size(); ++i) {
        Reader p(&(*paths)[i], r.at("paths") + "[" + std::to_string(i) + "]", &r.issues());
        double amp = 1.0, phase = 0.0, delay_ns = 0.0;
        p.number("amplitude", amp, 0.0);
        p.number("phase_rad", phase);
        p.number("delay_ns", delay_ns, 0.0);
        p.finish();
        c.paths.push_back({std::polar(amp, phase), delay_ns * 1e-9});
      }
    }
  }
  r.finish();
}

inline void read_schedule(Reader r, ScheduleConfig& s) {
  auto& p = s.params;
  r.choice("kind", s.kind, [](std::string_view v) { return std::optional(emulator::parse_schedule_kind(v)); });
  r.positive("rate_pps", s.rate_pps);
  r.positive("duration_s", s.duration_s);
  std::size_t packets = 0;
  if (r.integer("packets", packets, 1, 100000000)) s.packets = packets;
  r.number("a", p.a);
  r.number("b", p.b);
  r.positive("peak", p.peak);
  r.number("velocity_mps", p.velocity_mps);
  r.number("delta0_m", p.delta0_m);
  r.number("delta_start_m", p.delta_start_m);
  r.number("delta_end_m", p.delta_end_m);
  r.boolean("allow_alias", p.allow_alias);
  r.number("gain_lo_db", p.gain_lo_db);
  r.number("gain_hi_db", p.gain_hi_db);
  r.positive("sweep_period_s", p.sweep_period_s);
  r.integer("tone", p.tone, -1024, 1024);
  r.choice("sweep", p.sweep, [](std::string_view v) {
    if (v == "amplitude") return emulator::SweepAxis::amplitude;
    if (v == "phase") return emulator::SweepAxis::phase;
    throw ConfigError("unknown sweep axis '" + std::string(v) + "' (valid: amplitude, phase)");
  });
  r.number("amp_lo", p.amp_lo, 0.0);
  r.number("amp_hi", p.amp_hi, 0.0);
  r.number("phase_lo", p.phase_lo);
  r.number("phase_hi", p.phase_hi);
  r.integer("block_first", p.block_first, -1024, 1024);
  r.integer("block_last", p.block_last, -1024, 1024);
  double bamp = std::abs(p.block_factor), bph = std::arg(p.block_factor);
  r.number("block_factor_amp", bamp, 0.0);
  r.number("block_factor_phase", bph);
  p.block_factor = std::polar(bamp, bph);
  if (s.packets && r.has("duration_s")) r.error("packets", "give either packets or duration_s, not both");
  r.finish();
}

inline void read_agc(Reader& r, emulator::AgcPolicy& agc) {
  const json* v = r.get("agc");
  if (!v) return;
  auto kind_of = [&](const std::string& s, const std::string& path) -> bool {
    try {
      const auto k = emulator::parse_agc_kind(s);
      if (k != agc.kind) {
        const double target = agc.target_db;
        switch (k) {
          case emulator::AgcKind::none: agc = emulator::AgcPolicy::none(); break;
          case emulator::AgcKind::step_coarse: agc = emulator::AgcPolicy::step_coarse(); break;
          case emulator::AgcKind::step_fine: agc = emulator::AgcPolicy::step_fine(); break;
          case emulator::AgcKind::random: agc = emulator::AgcPolicy::random(); break;
        }
        agc.target_db = target;
      }
      return true;
    } catch (const ConfigError& e) {
      r.issues().push_back({path, e.what(), false});
      return false;
    }
  };
  if (v->is_string()) {
    kind_of(v->get<std::string>(), r.at("agc"));
    return;
  }
  Reader a(v, r.at("agc"), &r.issues());
  std::string kind;
  if (a.string("kind", kind)) kind_of(kind, a.at("kind"));
  a.positive("step_db", agc.step_db);
  a.number("hysteresis_db", agc.hysteresis_db, 0.0);
  a.number("spread_db", agc.spread_db, 0.0);
  a.number("target_db", agc.target_db);
  a.finish();
}

inline void read_profile(Reader& r, emulator::ProfileShape& shape) {
  const json* v = r.get("profile");
  if (!v) return;
  if (v->is_boolean()) {
    shape.enabled = v->get<bool>();
    return;
  }
  if (v->is_string()) {
    const auto s = v->get<std::string>();
    if (s == "on" || s == "off") {
      shape.enabled = s == "on";
    } else {
      r.error("profile", "expected on, off, a boolean or an object, got '" + s + "'");
    }
    return;
  }
  Reader p(v, r.at("profile"), &r.issues());
  p.boolean("enabled", shape.enabled);
  p.integer("harmonics", shape.harmonics, 0, 28);
  p.number("amp_ripple", shape.amp_ripple, 0.0, 0.99);
  p.number("phase_ripple_rad", shape.phase_ripple_rad, 0.0);
  p.integer("seed", shape.seed, 0, std::numeric_limits<long long>::max());
  p.finish();
}

inline void read_receiver(const json& v, const std::string& path, Issues& issues, ReceiverConfig& rc) {
  if (v.is_string()) {
    rc.preset = v.get<std::string>();
  } else if (v.is_object() && v.contains("preset") && v["preset"].is_string()) {
    rc.preset = v["preset"].get<std::string>();
  } else if (!v.is_object()) {
    issues.push_back({path, "expected a preset name or an object", false});
    return;
  } else {
    issues.push_back({path + ".preset", "missing (valid: " + join_names(emulator::preset_names()) + ")", false});
    return;
  }
  try {
    rc.model = emulator::preset(rc.preset);
  } catch (const ConfigError& e) {
    issues.push_back({path + (v.is_object() ? ".preset" : ""), e.what(), false});
    return;
  }
  if (v.is_string()) return;

  Reader r(&v, path, &issues);
  r.get("preset");
  auto& m = rc.model;
  r.string("name", m.name);
  read_agc(r, m.agc);
  read_profile(r, m.profile);
  r.number("phase_slope_max", m.phase_ramp.slope_max, 0.0);
  r.boolean("random_intercept", m.phase_ramp.random_intercept);
  if (r.has("noise")) {
    Reader n = r.child("noise");
    n.number("sigma", m.noise.sigma, 0.0);
    n.number("corr", m.noise.corr, -0.999, 0.999);
    n.number("outlier_prob", m.noise.outlier_prob, 0.0, 1.0);
    n.number("outlier_scale", m.noise.outlier_scale, 0.0);
    n.finish();
  }
  r.integer("smoothing_width", m.smoothing_width, 1, 55);
  r.choice("tones", m.reported_tones, parse_tone_subset);
  r.number("rssi_quant_db", m.rssi_quant_db, 0.0);
  r.number("drop_prob", m.drop_prob, 0.0, 0.999);
  r.positive("report_scale", m.report_scale);
  r.finish();
}

inline void read_preprocessing(Reader r, PreprocessConfig& p) {
  if (const json* d = r.get("detrend")) {
    if (d->is_string() && d->get<std::string>() == "none") {
      p.detrend.reset();
    } else if (!d->is_string()) {
      r.error("detrend", "expected a string");
    } else {
      try {
        p.detrend = preprocess::parse_detrend(d->get<std::string>());
      } catch (const ConfigError& e) {
        r.error("detrend", std::string(e.what()) + "; 'none' disables detrending");
      }
    }
  }
  r.choice("gain", p.gain, preprocess::parse_gain);
  r.boolean("equalize", p.equalize);
  r.integer("calibration_packets", p.calibration_packets, 1, 10000000);
  std::string filter;
  if (r.string("filter", filter) && filter != "none") {
    try {
      p.filter = preprocess::parse_filter(filter);
    } catch (const ConfigError& e) {
      r.error("filter", e.what());
    }
  }
  if (p.filter) {
    r.integer("filter_window", p.filter->window, 1, 10001);
    r.integer("filter_order", p.filter->order, 0, 10);
    r.number("filter_sigmas", p.filter->n_sigmas, 0.0);
    try {
      preprocess::validate_filter(*p.filter);
    } catch (const ConfigError& e) {
      r.error("filter_window", e.what());
    }
  } else {
    r.get("filter_window");
    r.get("filter_order");
    r.get("filter_sigmas");
  }
  double mp = 0.0;
  if (r.number("mahalanobis_p", mp, 0.0, 1.0)) {
    if (!(mp > 0.0 && mp < 1.0)) {
      r.error("mahalanobis_p", "must lie strictly between 0 and 1");
    } else {
      p.mahalanobis_p = mp;
    }
  }
  r.finish();
}

inline void read_estimator(Reader r, EstimatorConfig& e) {
  auto& m = e.music;
  r.integer("window_len", m.window_len, 2, 100000);
  r.integer("n_sources", m.n_sources, 1, 1000);
  r.number("v_min", m.v_min);
  r.number("v_max", m.v_max);
  r.positive("v_step", m.v_step);
  r.number("carrier_freq_hz", m.carrier_freq_hz, 0.0);
  r.number("dead_zone_mps", m.dead_zone_mps, 0.0);
  r.number("max_loss", m.max_loss, 0.0, 1.0);
  r.number("eig_rel_threshold", m.eig_rel_threshold, 0.0, 1.0);
  r.number("tof_threshold", e.tof_threshold, 0.0, 1.0);
  r.integer("tof_stride", e.tof_stride, 1, 1000000);
  try {
    estimators::validate(m);
  } catch (const ConfigError& ex) {
    r.error("", ex.what());
  }
  r.finish();
}

inline void read_activity(Reader r, eval::ActivityConfig& a) {
  r.integer("n_classes", a.n_classes, 2, 1000);
  r.integer("n_per_class", a.n_per_class, 2, 100000);
  r.integer("n_time", a.n_time, 2, 100000);
  r.positive("rate_pps", a.rate_pps);
  r.positive("center_freq_hz", a.center_freq_hz);
  r.number("a", a.a);
  r.number("b", a.b);
  r.number("v0_mps", a.v0_mps);
  r.number("v_step_mps", a.v_step_mps);
  r.number("v_jitter", a.v_jitter, 0.0);
  r.number("delta0_m", a.delta0_m, 0.0);
  r.number("delta_step_m", a.delta_step_m);
  r.number("delta_jitter_m", a.delta_jitter_m, 0.0);
  r.number("tx_gain_spread_db", a.tx_gain_spread_db, 0.0);
  r.finish();
}

inline void read_eval(Reader r, EvalConfig& e) {
  r.integer("sessions", e.sessions, 2, 1000);
  r.integer("session_packets", e.session_packets, 1, 100000000);
  r.integer("seeds", e.seeds, 1, 100000);
  if (const json* v = r.get("variants")) {
    if (!v->is_array() || v->empty()) {
      r.error("variants", "expected a nonempty array of variant names");
    } else {
      e.variants.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        const auto path = "variants[" + std::to_string(i) + "]";
        if (!(*v)[i].is_string()) {
          r.error(path, "expected a string");
          continue;
        }
        const auto name = (*v)[i].get<std::string>();
        try {
          eval::parse_variant(name);
          e.variants.push_back(name);
        } catch (const ConfigError& ex) {
          r.error(path, ex.what());
        }
      }
    }
  }
  read_activity(r.child("activity"), e.activity);
  r.integer("folds", e.folds, 2, 100);
  r.integer("repeats", e.repeats, 1, 1000);
  r.integer("n_boot", e.n_boot, 100, 10000000);
  r.integer("mi_k", e.mi_k, 1, 1000);
  r.finish();
}

/// Checks that need several sections at once.
inline void cross_validate(const PipelineConfig& c, Issues& issues) {
  auto error = [&](std::string path, std::string msg) { issues.push_back({std::move(path), std::move(msg), false}); };
  auto warn = [&](std::string path, std::string msg) { issues.push_back({std::move(path), std::move(msg), true}); };

  GridPtr grid;
  try {
    grid = make_grid(standard_grid(c.channel.standard, c.channel.center_freq_hz));
  } catch (const ConfigError& e) {
    error("channel.standard", e.what());
  }
  if (grid) {
    const double range = grid->unambiguous_delay_s();
    for (std::size_t i = 0; i < c.channel.paths.size(); ++i) {
      if (c.channel.paths[i].tau_s >= range) {
        error("channel.paths[" + std::to_string(i) + "].delay_ns",
              "delay beyond the unambiguous range " + std::to_string(range * 1e9) + " ns");
      }
    }
  }

  const auto min_rx = c.experiment == Experiment::cross_device ? 2u : 1u;
  if (c.receivers.size() < min_rx) {
    error("receivers", "experiment " + to_string(c.experiment) + " needs at least " + std::to_string(min_rx) +
                           " receiver(s) (presets: " + join_names(emulator::preset_names()) + ")");
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < c.receivers.size(); ++i) {
    const auto path = "receivers[" + std::to_string(i) + "]";
    const auto& m = c.receivers[i].model;
    if (!names.insert(m.name).second) error(path + ".name", "duplicate receiver name '" + m.name + "'");
    const bool safe = !m.name.empty() && m.name.front() != '.' &&
                      std::all_of(m.name.begin(), m.name.end(), [](unsigned char ch) {
                        return std::isalnum(ch) || ch == '_' || ch == '-' || ch == '.';
                      });
    if (!safe) error(path + ".name", "receiver names may only use letters, digits, '_', '-' and '.'");
    try {
      emulator::validate_model(m);
    } catch (const ConfigError& e) {
      error(path, e.what());
    }
  }

  if (c.experiment == Experiment::cross_device) {
    if (c.eval.activity.n_per_class < c.eval.folds) {
      error("eval.activity.n_per_class", "fewer examples per class than folds");
    }
    if (c.eval.folds * c.eval.repeats < 10) {
      error("eval.repeats", "folds x repeats must give at least 10 accuracies for the BCa interval");
    }
    return;
  }

  const auto kind = c.schedule.kind ? *c.schedule.kind : *default_schedule(c.experiment);
  using emulator::ScheduleKind;
  auto require_kind = [&](std::initializer_list<ScheduleKind> ok) {
    if (std::find(ok.begin(), ok.end(), kind) != ok.end()) return;
    std::string valid;
    for (auto k : ok) valid += (valid.empty() ? "" : ", ") + std::string(emulator::to_string(k));
    error("schedule.kind", "experiment " + to_string(c.experiment) + " cannot use schedule '" +
                               std::string(emulator::to_string(kind)) + "' (valid: " + valid + ")");
  };
  switch (c.experiment) {
    case Experiment::agc_sweep: require_kind({ScheduleKind::gain_sweep, ScheduleKind::constant}); break;
    case Experiment::doppler: require_kind({ScheduleKind::two_path_doppler}); break;
    case Experiment::tof: require_kind({ScheduleKind::two_path_tof}); break;
    case Experiment::profile_stability:
    case Experiment::noise: require_kind({ScheduleKind::constant}); break;
    case Experiment::faithfulness: require_kind({ScheduleKind::single_tone, ScheduleKind::tone_block}); break;
    case Experiment::sensitivity: require_kind({ScheduleKind::single_tone}); break;
    case Experiment::cross_device: break;
  }

  const std::size_t n = c.experiment == Experiment::profile_stability ? c.eval.session_packets : c.schedule.n_packets();
  if (n == 0) error("schedule.duration_s", "schedule has no packets");
  if (c.experiment == Experiment::doppler && n < c.estimator.music.window_len) {
    error("schedule.duration_s", "fewer packets than one MUSIC window (" +
                                     std::to_string(c.estimator.music.window_len) + ")");
  }
  if ((c.experiment == Experiment::noise || c.experiment == Experiment::sensitivity) && n < 8) {
    error("schedule.duration_s", "noise statistics need at least 8 packets");
  }
  if (c.experiment == Experiment::noise && c.preprocessing.mahalanobis_p && grid && n <= grid->size()) {
    error("preprocessing.mahalanobis_p", "Mahalanobis filtering needs more packets than tones");
  }
  if (c.experiment == Experiment::sensitivity && c.schedule.params.sweep == emulator::SweepAxis::amplitude &&
      c.schedule.params.amp_lo == c.schedule.params.amp_hi) {
    error("schedule.amp_hi", "sweep range is empty");
  }

  if (c.preprocessing.gain == preprocess::GainMethod::anchored &&
      !(kind == ScheduleKind::single_tone || kind == ScheduleKind::tone_block || kind == ScheduleKind::constant)) {
    error("preprocessing.gain", "anchored normalization needs a schedule with unmodified tones "
                                "(constant, single_tone or tone_block)");
  }

  const auto& p = c.schedule.params;
  if ((kind == ScheduleKind::two_path_doppler || kind == ScheduleKind::two_path_tof) &&
      !(std::abs(p.a) + std::abs(p.b) <= p.peak)) {
    error("schedule.b", "|a| + |b| exceeds the configured peak");
  }
  if (grid && kind == ScheduleKind::single_tone && !grid->position_of(p.tone)) {
    error("schedule.tone", "tone " + std::to_string(p.tone) + " is not on the grid");
  }
  if (grid && c.experiment == Experiment::sensitivity) {
    for (std::size_t i = 0; i < c.receivers.size(); ++i) {
      if (!decimate(*grid, c.receivers[i].model.reported_tones).position_of(p.tone)) {
        error("receivers[" + std::to_string(i) + "].tones", "receiver does not report the swept tone");
      }
    }
  }
  if (kind == ScheduleKind::tone_block && p.block_first > p.block_last) {
    error("schedule.block_last", "tone block is empty");
  }
  if (grid && (kind == ScheduleKind::two_path_doppler || kind == ScheduleKind::two_path_tof)) {
    const double t_end = static_cast<double>(n > 0 ? n - 1 : 0) / c.schedule.rate_pps;
    const double max_delta =
        kind == ScheduleKind::two_path_tof
            ? std::max(std::abs(p.delta_start_m), std::abs(p.delta_end_m))
            : std::max(std::abs(p.delta0_m), std::abs(p.delta0_m + p.velocity_mps * t_end));
    const double range_m = grid->unambiguous_delay_s() * kSpeedOfLight;
    if (max_delta >= range_m && !p.allow_alias) {
      warn("schedule.allow_alias", "path-length sweep reaches " + std::to_string(max_delta) +
                                       " m, beyond the unambiguous range " + std::to_string(range_m) +
                                       " m; set allow_alias to permit");
    }
    for (std::size_t i = 0; i < c.receivers.size(); ++i) {
      const auto rx_range = decimate(*grid, c.receivers[i].model.reported_tones).unambiguous_delay_s() * kSpeedOfLight;
      if (rx_range < range_m && max_delta >= rx_range && !p.allow_alias) {
        warn("receivers[" + std::to_string(i) + "].tones",
             "reported tones alias path lengths beyond " + std::to_string(rx_range) +
                 " m; this sweep reaches " + std::to_string(max_delta) + " m");
      }
    }
  }
}

inline std::vector<std::string> path_tokens(std::string_view key) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < key.size(); ++i) {
    const char ch = key[i];
    if (ch == '.') {
      if (cur.empty()) throw ConfigError("empty path segment in '" + std::string(key) + "'");
      out.push_back(cur);
      cur.clear();
    } else if (ch == '[') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
      const auto close = key.find(']', i);
      if (close == std::string_view::npos) throw ConfigError("unterminated '[' in '" + std::string(key) + "'");
      const auto idx = key.substr(i + 1, close - i - 1);
      if (idx.empty() || !std::all_of(idx.begin(), idx.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        throw ConfigError("array index must be a nonnegative integer in '" + std::string(key) + "'");
      }
      out.push_back("[" + std::string(idx) + "]");
      i = close;
      if (i + 1 < key.size() && key[i + 1] == '.') ++i;
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  if (out.empty()) throw ConfigError("empty override key");
  return out;
}

}  // namespace detail

/// Applies one `key=value` override. The value is read as JSON when it parses, otherwise as a
/// string. Missing objects along the path are created; array indices must already exist or
/// extend the array by one.
inline void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' lacks '='");
  const auto key = assignment.substr(0, eq);
  const auto text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = std::string(text);
  }
  json* node = &doc;
  for (const auto& tok : detail::path_tokens(key)) {
    if (tok.front() == '[') {
      const auto i = std::stoul(tok.substr(1, tok.size() - 2));
      if (node->is_null()) *node = json::array();
      if (!node->is_array()) throw ConfigError("override '" + std::string(key) + "': " + tok + " indexes a non-array");
      if (i > node->size()) {
        throw ConfigError("override '" + std::string(key) + "': index " + std::to_string(i) + " beyond array size " +
                          std::to_string(node->size()));
      }
      if (i == node->size()) node->push_back(json());
      node = &(*node)[i];
      // A receiver given by preset name becomes an object so fields can be overridden.
      if (node->is_string()) *node = json{{"preset", node->get<std::string>()}};
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) throw ConfigError("override '" + std::string(key) + "': '" + tok + "' indexes a non-object");
      node = &(*node)[tok];
    }
  }
  *node = std::move(value);
}

/// Parses and validates a config document, returning every issue found. `out` is filled as far
/// as possible even when issues are reported.
inline Issues parse_config(const json& doc, PipelineConfig& out) {
  Issues issues;
  detail::Reader root(&doc, "", &issues);
  if (!doc.is_object()) return issues;

  if (const json* e = root.get("experiment")) {
    if (!e->is_string()) {
      root.error("experiment", "expected a string (valid: " + join_names(experiment_names()) + ")");
    } else {
      try {
        out.experiment = parse_experiment(e->get<std::string>());
      } catch (const ConfigError& ex) {
        root.error("experiment", ex.what());
      }
    }
  } else {
    root.error("experiment", "missing (valid: " + join_names(experiment_names()) + ")");
  }

  if (const json* s = root.get("seed")) {
    if (!s->is_number_unsigned()) {
      root.error("seed", "expected a nonnegative integer, got " + s->dump());
    } else {
      out.seed = s->get<std::uint64_t>();
    }
  } else {
    root.error("seed", "missing (required)");
  }

  std::string dir;
  if (root.string("output_dir", dir)) out.output_dir = dir;
  root.boolean("write_series", out.write_series);

  detail::read_channel(root.child("channel"), out.channel);
  detail::read_schedule(root.child("schedule"), out.schedule);
  out.receivers.clear();
  if (const json* rx = root.get("receivers")) {
    if (!rx->is_array()) {
      root.error("receivers", "expected an array of receivers");
    } else {
      for (std::size_t i = 0; i < rx->size(); ++i) {
        ReceiverConfig rc;
        const auto before = issues.size();
        detail::read_receiver((*rx)[i], "receivers[" + std::to_string(i) + "]", issues, rc);
        if (issues.size() == before || !rc.preset.empty()) out.receivers.push_back(std::move(rc));
      }
    }
  }
  detail::read_preprocessing(root.child("preprocessing"), out.preprocessing);
  detail::read_estimator(root.child("estimator"), out.estimator);
  detail::read_eval(root.child("eval"), out.eval);
  root.finish();

  if (!has_errors(issues)) detail::cross_validate(out, issues);
  out.effective = ordered_json::parse(doc.dump());
  return issues;
}

/// Reads a config file, applies overrides left to right and validates. Throws ConfigIssues when
/// any error is found; warnings are returned.
inline Issues load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides,
                          PipelineConfig& out) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigIssues({{"<file>", std::string("malformed json: ") + e.what(), false}});
  }
  for (const auto& o : overrides) {
    try {
      apply_override(doc, o);
    } catch (const ConfigError& e) {
      throw ConfigIssues({{"--set", e.what(), false}});
    }
  }
  auto issues = parse_config(doc, out);
  if (has_errors(issues)) throw ConfigIssues(std::move(issues));
  return issues;
}

}  // namespace csilab::pipeline
