// csilab: command-line front end.
//
//   csilab run CONFIG [--set key=value]... [--seed N] [--out DIR] [--jobs N]
//   csilab validate CONFIG [--set key=value]...
//   csilab emulate CONFIG --out DIR
//   csilab preprocess IN.ndjson --out OUT.ndjson [--detrend ls] [--gain l1] [--profile P.ndjson]
//   csilab estimate velocity|tof IN.ndjson --out OUT.csv
//   csilab metrics noise|profile|mahalanobis IN.ndjson... --out PATH
//   csilab eval CONFIG [--out DIR]
//
// Exit status: 0 success, 1 invalid configuration or input, 2 runtime failure.

#include <cstdio>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "csilab/pipeline/experiments.hpp"

namespace {

using namespace csilab;
using csilab::ordered_json;

struct ConfigArgs {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
};

void add_config_args(CLI::App* cmd, ConfigArgs& a, bool with_out = true) {
  cmd->add_option("config", a.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  cmd->add_option("--set", a.sets, "override key=value (repeatable, applied left to right)")
      ->allow_extra_args(false)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  cmd->add_option("--seed", a.seed, "override the top-level seed");
  if (with_out) cmd->add_option("--out", a.out, "output directory (overrides output_dir)");
  cmd->add_option("--jobs", a.jobs, "worker threads")->check(CLI::PositiveNumber);
}

std::vector<std::string> overrides_of(const ConfigArgs& a, std::vector<std::string> front = {}) {
  auto o = std::move(front);
  o.insert(o.end(), a.sets.begin(), a.sets.end());
  if (a.seed) o.push_back("seed=" + std::to_string(*a.seed));
  if (!a.out.empty()) o.push_back("output_dir=" + ordered_json(a.out).dump());
  return o;
}

void print_warnings(const pipeline::Issues& issues) {
  if (issues.empty()) return;
  ordered_json j;
  j["status"] = "warning";
  j["issues"] = pipeline::issues_json(issues);
  std::cerr << j.dump(2) << '\n';
}

int run_config(const ConfigArgs& a, std::vector<std::string> front = {}) {
  pipeline::PipelineConfig cfg;
  print_warnings(pipeline::load_config(a.config, overrides_of(a, std::move(front)), cfg));
  const auto manifest = pipeline::run(cfg, a.jobs);
  ordered_json j;
  j["status"] = "ok";
  j["experiment"] = pipeline::to_string(cfg.experiment);
  j["output_dir"] = cfg.output_dir.string();
  j["files"] = manifest["files"].size() + 1;
  std::cout << j.dump() << '\n';
  return 0;
}

int validate_config(const ConfigArgs& a) {
  pipeline::Issues issues;
  try {
    pipeline::PipelineConfig cfg;
    issues = pipeline::load_config(a.config, overrides_of(a), cfg);
  } catch (const pipeline::ConfigIssues& e) {
    issues = e.issues();
  }
  ordered_json j;
  j["valid"] = !pipeline::has_errors(issues);
  j["issues"] = pipeline::issues_json(issues);
  std::cout << j.dump(2) << '\n';
  return pipeline::has_errors(issues) ? 1 : 0;
}

int emulate(const ConfigArgs& a) {
  pipeline::PipelineConfig cfg;
  print_warnings(pipeline::load_config(a.config, overrides_of(a), cfg));
  if (cfg.experiment == pipeline::Experiment::cross_device) {
    throw ConfigError("emulate needs a schedule-driven experiment, not cross_device");
  }
  const auto channel = pipeline::config_channel(cfg);
  const auto sched = pipeline::config_schedule(cfg, channel.grid);
  const auto series = pipeline::emulate_all(cfg, emulator::apply_precoding(channel, sched), a.jobs);
  pipeline::Artifacts art;
  for (const auto& s : series) art.add_series(s.receiver_id() + ".ndjson", s);
  pipeline::write_artifacts(cfg.output_dir, art, cfg.effective, "emulate", cfg.seed);
  std::cout << ordered_json{{"status", "ok"}, {"output_dir", cfg.output_dir.string()}, {"series", series.size()}}.dump()
            << '\n';
  return 0;
}

struct PreprocessArgs {
  std::string in, out, detrend = "ls", gain = "l1", profile, filter = "none";
  int filter_window = 5;
};

int preprocess_cmd(const PreprocessArgs& a) {
  auto s = load_series(a.in);
  pipeline::PreprocessConfig p;
  p.detrend = a.detrend == "none" ? std::nullopt : std::optional(preprocess::parse_detrend(a.detrend));
  p.gain = preprocess::parse_gain(a.gain);
  if (p.gain == preprocess::GainMethod::anchored) throw ConfigError("anchored gain needs a schedule; use run");
  if (a.filter != "none") {
    p.filter = preprocess::parse_filter(a.filter);
    p.filter->window = a.filter_window;
  }
  std::optional<preprocess::ReceiverProfile> prof;
  if (!a.profile.empty()) {
    const auto ps = preprocess::load_profiles(a.profile);
    if (ps.empty()) throw ValidationError("profile file is empty");
    if (!same_grid(ps.front().grid, s.grid())) throw ValidationError("profile grid differs from the series grid");
    prof = ps.front();
  }
  auto out = pipeline::preprocess_series(s, p, prof ? &*prof : nullptr);
  if (prof) out.meta["equalized_with"] = prof->label;
  save_series(a.out, out);
  return 0;
}

struct EstimateArgs {
  std::string in, out;
  estimators::MusicConfig music;
  double threshold = 0.05;
};

int estimate_velocity_cmd(const EstimateArgs& a) {
  const auto s = load_series(a.in);
  const auto est = estimators::estimate_velocity(s, a.music);
  pipeline::Csv csv({{"window_start_us", ""}, {"velocity_mps", ""}});
  for (std::size_t i = 0; i < est.velocity.size(); ++i) csv.row(est.window_start_us[i], est.velocity[i]);
  write_file_atomic(a.out, csv.str());
  std::cout << ordered_json{{"windows", est.velocity.size()}, {"skipped", est.skipped}, {"median_mps", est.median},
                            {"iqr_mps", est.iqr}}
                   .dump()
            << '\n';
  return 0;
}

int estimate_tof_cmd(const EstimateArgs& a) {
  const auto s = load_series(a.in);
  pipeline::Csv csv({{"seq", ""}, {"tof_ns", ""}});
  std::size_t missing = 0;
  for (const auto& f : s.frames) {
    const auto t = estimators::estimate_tof(estimators::compute_pdp(f), a.threshold);
    if (!t) ++missing;
    csv.row(f.seq, t ? *t * 1e9 : std::numeric_limits<double>::quiet_NaN());
  }
  write_file_atomic(a.out, csv.str());
  std::cout << ordered_json{{"frames", s.size()}, {"missing", missing}}.dump() << '\n';
  return 0;
}

struct MetricsArgs {
  std::vector<std::string> in;
  std::string out;
  double p = 0.999;
};

int noise_cmd(const MetricsArgs& a) {
  if (a.in.size() != 1) throw ConfigError("metrics noise takes one series");
  const auto r = metrics::noise_stats(load_series(a.in.front()));
  write_file_atomic(a.out, metrics::noise_csv(r));
  std::cout << metrics::noise_json(r).dump() << '\n';
  return 0;
}

int profile_cmd(const MetricsArgs& a) {
  std::vector<preprocess::ReceiverProfile> ps;
  for (const auto& path : a.in) {
    const auto s = load_series(path);
    ps.push_back(preprocess::extract_profile(s, 0, std::filesystem::path(path).stem().string()));
    if (!same_grid(ps.front().grid, ps.back().grid)) throw ValidationError("series grids differ");
  }
  preprocess::save_profiles(a.out, ps);
  ordered_json j{{"profiles", ps.size()}};
  if (ps.size() >= 2) {
    const auto st = preprocess::stability_score(ps);
    j["score"] = st.score;
    j["min_pair"] = st.min_pair;
  }
  std::cout << j.dump() << '\n';
  return 0;
}

int mahalanobis_cmd(const MetricsArgs& a) {
  if (a.in.size() != 1) throw ConfigError("metrics mahalanobis takes one series");
  const auto s = load_series(a.in.front());
  const double thr = metrics::chi2_quantile(static_cast<double>(s.grid()->size()), a.p);
  auto r = metrics::mahalanobis_filter(s, thr);
  if (r.kept.empty()) throw DegenerateError("every frame was removed");
  save_series(a.out, r.kept);
  std::cout << ordered_json{{"threshold_d2", thr}, {"removed", r.removed}, {"kept", r.kept.size()}}.dump() << '\n';
  return 0;
}

int report_error(const std::string& kind, const std::string& msg, int code) {
  ordered_json j;
  j["status"] = "error";
  j["kind"] = kind;
  j["message"] = msg;
  std::cerr << j.dump(2) << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"csilab: ground-truth-aware Wi-Fi CSI lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", csilab::pipeline::kVersion);

  ConfigArgs run_args, validate_args, emulate_args, eval_args;
  add_config_args(app.add_subcommand("run", "run an experiment config end to end"), run_args);
  add_config_args(app.add_subcommand("validate", "check a config without running it"), validate_args, false);
  add_config_args(app.add_subcommand("emulate", "write the emulated NDJSON series of a config"), emulate_args);
  add_config_args(app.add_subcommand("eval", "cross-device and within-device evaluation"), eval_args);

  PreprocessArgs pre;
  auto* pre_cmd = app.add_subcommand("preprocess", "phase detrend, equalize, normalize and filter a series");
  pre_cmd->add_option("input", pre.in, "NDJSON series")->required()->check(CLI::ExistingFile);
  pre_cmd->add_option("--out", pre.out, "output NDJSON series")->required();
  pre_cmd->add_option("--detrend", pre.detrend, "ls, pads, pads_mean or none");
  pre_cmd->add_option("--gain", pre.gain, "none, l1, l2 or rssi");
  pre_cmd->add_option("--profile", pre.profile, "profile NDJSON to equalize with")->check(CLI::ExistingFile);
  pre_cmd->add_option("--filter", pre.filter, "none, median, savgol or hampel");
  pre_cmd->add_option("--filter-window", pre.filter_window, "odd filter window");

  EstimateArgs est;
  auto* est_cmd = app.add_subcommand("estimate", "velocity or time-of-flight estimation");
  est_cmd->require_subcommand(1);
  auto* vel_cmd = est_cmd->add_subcommand("velocity", "Doppler-MUSIC per window");
  auto* tof_cmd = est_cmd->add_subcommand("tof", "PDP time of flight per frame");
  for (auto* c : {vel_cmd, tof_cmd}) {
    c->add_option("input", est.in, "NDJSON series")->required()->check(CLI::ExistingFile);
    c->add_option("--out", est.out, "output CSV")->required();
  }
  vel_cmd->add_option("--window", est.music.window_len, "packets per window");
  vel_cmd->add_option("--sources", est.music.n_sources, "signal subspace dimension");
  vel_cmd->add_option("--v-min", est.music.v_min, "velocity grid start, m/s");
  vel_cmd->add_option("--v-max", est.music.v_max, "velocity grid end, m/s");
  vel_cmd->add_option("--v-step", est.music.v_step, "velocity grid step, m/s");
  vel_cmd->add_option("--dead-zone", est.music.dead_zone_mps, "excluded band around 0, m/s");
  tof_cmd->add_option("--threshold", est.threshold, "peak threshold relative to the maximum");

  MetricsArgs met;
  auto* met_cmd = app.add_subcommand("metrics", "noise moments, calibration profiles, outlier filtering");
  met_cmd->require_subcommand(1);
  auto* noise_c = met_cmd->add_subcommand("noise", "per-tone amplitude and phase moments (CSV)");
  auto* prof_c = met_cmd->add_subcommand("profile", "calibration profile per series plus stability score");
  auto* mah_c = met_cmd->add_subcommand("mahalanobis", "drop frames beyond a chi-square quantile");
  for (auto* c : {noise_c, prof_c, mah_c}) {
    c->add_option("input", met.in, "NDJSON series")->required()->check(CLI::ExistingFile);
    c->add_option("--out", met.out, "output path")->required();
  }
  mah_c->add_option("--p", met.p, "chi-square quantile")->check(CLI::Range(0.0, 1.0));

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("run")) return run_config(run_args);
    if (app.got_subcommand("validate")) return validate_config(validate_args);
    if (app.got_subcommand("emulate")) return emulate(emulate_args);
    if (app.got_subcommand("eval")) return run_config(eval_args, {"experiment=\"cross_device\""});
    if (app.got_subcommand("preprocess")) return preprocess_cmd(pre);
    if (vel_cmd->parsed()) return estimate_velocity_cmd(est);
    if (tof_cmd->parsed()) return estimate_tof_cmd(est);
    if (noise_c->parsed()) return noise_cmd(met);
    if (prof_c->parsed()) return profile_cmd(met);
    if (mah_c->parsed()) return mahalanobis_cmd(met);
  } catch (const csilab::pipeline::ConfigIssues& e) {
    ordered_json j;
    j["status"] = "error";
    j["kind"] = "validation";
    j["issues"] = csilab::pipeline::issues_json(e.issues());
    std::cerr << j.dump(2) << '\n';
    return 1;
  } catch (const csilab::ParseError& e) {
    return report_error("parse", e.what(), 1);
  } catch (const csilab::ConfigError& e) {
    return report_error("config", e.what(), 1);
  } catch (const csilab::ValidationError& e) {
    return report_error("validation", e.what(), 1);
  } catch (const csilab::Error& e) {
    return report_error("runtime", e.what(), 2);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 2);
  }
  return 0;
}
