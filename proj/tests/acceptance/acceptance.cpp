// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "csilab/emulator/channel.hpp"
#include "csilab/emulator/receiver.hpp"
#include "csilab/emulator/schedule.hpp"
#include "csilab/estimators/music.hpp"
#include "csilab/estimators/pdp.hpp"
#include "csilab/eval/bootstrap.hpp"
#include "csilab/metrics/mi.hpp"
#include "csilab/pipeline/config.hpp"
#include "csilab/pipeline/experiments.hpp"
#include "csilab/preprocess/gain.hpp"
#include "csilab/preprocess/phase.hpp"
#include "csilab/preprocess/profile.hpp"

using namespace csilab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

unsigned jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

GridPtr ht20() { return make_grid(standard_grid(Standard::ht20, 5.18e9)); }

nlohmann::json summary_of(const pipeline::Artifacts& a) {
  for (const auto& [name, content] : a.files)
    if (name == "summary.json") return nlohmann::json::parse(content);
  throw Error("experiment produced no summary.json");
}

pipeline::PipelineConfig config_from(const nlohmann::json& doc) {
  pipeline::PipelineConfig c;
  const auto issues = pipeline::parse_config(doc, c);
  if (pipeline::has_errors(issues)) throw ConfigError("acceptance config invalid: " + issues.front().path + ": " + issues.front().message);
  return c;
}

/// Doppler two-path at v = 1 m/s, a = 0.7, b = 0.3, 500 pps x 50 s.
estimators::VelocityEstimates doppler(const emulator::ReceiverModel& m, std::optional<preprocess::DetrendMethod> detrend,
                                      preprocess::GainMethod gain, std::uint64_t seed) {
  const auto g = ht20();
  emulator::ScheduleParams p;
  p.a = 0.7;
  p.b = 0.3;
  p.velocity_mps = 1.0;
  p.delta0_m = 100.0;
  const auto sched = emulator::make_schedule(emulator::ScheduleKind::two_path_doppler, p, 25000, 500.0, g,
                                             substream(seed, "schedule"));
  const auto s = emulator::distort(emulator::apply_precoding(emulator::flat_channel(g), sched), m, substream(seed, "receiver"));
  pipeline::PreprocessConfig pc;
  pc.detrend = detrend;
  pc.gain = gain;
  return estimators::estimate_velocity(pipeline::preprocess_series(s, pc, nullptr), estimators::MusicConfig{});
}

double median_error_mps(const estimators::VelocityEstimates& e) { return std::abs(e.median - 1.0); }

// 1 ------------------------------------------------------------------------------------------
Outcome doppler_rescue() {
  const auto t0 = Clock::now();
  auto rx = emulator::preset("qca");
  rx.agc = emulator::AgcPolicy::random(6.0);
  auto flat = rx;
  flat.agc = emulator::AgcPolicy{};
  const auto rescued = doppler(rx, preprocess::DetrendMethod::ls, preprocess::GainMethod::l1, 1);
  const auto detrend_only = doppler(rx, preprocess::DetrendMethod::ls, preprocess::GainMethod::none, 1);
  const auto reference = doppler(flat, preprocess::DetrendMethod::ls, preprocess::GainMethod::none, 1);
  const double secs = seconds_since(t0);
  const double err = median_error_mps(rescued);
  const bool ok = err <= 0.002 && detrend_only.iqr >= 5.0 * reference.iqr && secs <= 120.0;
  return {ok, fmt("l1+LS median error %.2f mm/s (<= 2); detrend-only IQR %.4f vs agc=none IQR %.4f m/s (ratio %.1f, >= 5); %.1f s (<= 120)",
                  err * 1e3, detrend_only.iqr, reference.iqr,
                  reference.iqr > 0 ? detrend_only.iqr / reference.iqr : INFINITY, secs)};
}

// 2 ------------------------------------------------------------------------------------------
Outcome music_invariance() {
  const auto t0 = Clock::now();
  const auto g = ht20();
  Engine eng(make_engine(substream(2, "music_invariance")));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const estimators::MusicConfig cfg;
  // locations of the n_sources strongest local maxima, in grid order
  auto argmaxes = [&](const estimators::Pseudospectrum& s) {
    auto peaks = estimators::spectrum_peaks(s.p);
    peaks.resize(std::min(peaks.size(), cfg.n_sources));
    std::sort(peaks.begin(), peaks.end());
    return peaks;
  };
  int worst = 0, failed = 0;
  for (int w = 0; w < 100; ++w) {
    emulator::ScheduleParams p;
    p.a = 0.5 + 0.3 * u(eng);
    p.b = 0.1 + (0.9 - p.a) * u(eng);
    p.velocity_mps = (u(eng) < 0.5 ? -1.0 : 1.0) * (0.3 + 2.2 * u(eng));
    p.delta0_m = 10.0 + 200.0 * u(eng);
    const auto sched = emulator::make_schedule(emulator::ScheduleKind::two_path_doppler, p, cfg.window_len, 500.0, g,
                                               substream(2, "window", static_cast<std::uint64_t>(w)));
    auto s = emulator::distort(emulator::apply_precoding(emulator::flat_channel(g), sched), emulator::preset("x310"),
                               substream(2, "receiver", static_cast<std::uint64_t>(w)));
    s = preprocess::normalize_gain(preprocess::detrend_phase(s, preprocess::DetrendMethod::ls), preprocess::GainOptions{});
    CsiVector weights(g->size());
    for (auto& x : weights) x = std::polar(std::exp(std::log(0.1) + std::log(100.0) * u(eng)), 2.0 * kPi * u(eng));
    auto weighted = s;
    for (auto& f : weighted.frames)
      for (std::size_t k = 0; k < weights.size(); ++k) f.csi[k] *= weights[k];
    const auto a = argmaxes(estimators::music_spectrum(s.frames, cfg));
    const auto b = argmaxes(estimators::music_spectrum(weighted.frames, cfg));
    long shift = a.size() == b.size() && !a.empty() ? 0 : 1L << 20;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
      shift = std::max(shift, std::labs(static_cast<long>(a[i]) - static_cast<long>(b[i])));
    worst = std::max(worst, static_cast<int>(shift));
    failed += shift > 1;
  }
  const double secs = seconds_since(t0);
  return {failed == 0 && secs <= 60.0,
          fmt("100 windows, weights |w| in [0.1, 10]: max shift of the %zu strongest peaks %d step(s) (<= 1), %d window(s) over; %.1f s (<= 60)",
              cfg.n_sources, worst, failed, secs)};
}

// 3 ------------------------------------------------------------------------------------------
Outcome tof_staircase() {
  std::vector<std::string> notes;
  bool ok = true;

  // equalization gain on a receiver with a strong nonlinearity profile
  const auto c = config_from(nlohmann::json::parse(R"({
    "experiment": "tof", "seed": 7, "write_series": false,
    "schedule": {"kind": "two_path_tof", "rate_pps": 500, "duration_s": 10, "delta_start_m": 100, "delta_end_m": 300},
    "receivers": [{"preset": "asus1", "profile": "on"}],
    "preprocessing": {"detrend": "ls", "gain": "l1", "equalize": true, "calibration_packets": 5000},
    "estimator": {"tof_threshold": 0.05}
  })"));
  const auto rx = summary_of(pipeline::run_experiment(c, 1))["receivers"][0];
  const double eq = rx["mean_abs_error_ns"], raw = rx["mean_abs_error_unequalized_ns"];
  ok &= eq < raw;
  notes.push_back(fmt("mean |error| %.1f ns equalized vs %.1f ns raw", eq, raw));

  // noiseless staircase
  const auto g = ht20();
  emulator::ScheduleParams p;
  p.delta_start_m = 100.0;
  p.delta_end_m = 300.0;
  const auto sched = emulator::make_schedule(emulator::ScheduleKind::two_path_tof, p, 5000, 500.0, g, 3);
  const auto ideal = emulator::distort(emulator::apply_precoding(emulator::flat_channel(g), sched), emulator::preset("ideal"), 3);
  const auto st = pipeline::tof_errors(ideal, sched, 0.05, 1);
  const double bin = estimators::compute_pdp(ideal.frames[0]).bin_s;
  std::size_t rises = 0, bad_steps = 0;
  double worst_err = 0.0;
  for (std::size_t i = 0; i < st.est_s.size(); ++i) {
    if (std::isnan(st.est_s[i])) {
      ++bad_steps;
      continue;
    }
    worst_err = std::max(worst_err, std::abs(st.est_s[i] - st.truth_s[i]));
    if (i == 0 || std::isnan(st.est_s[i - 1])) continue;
    const double d = st.est_s[i] - st.est_s[i - 1];
    if (std::abs(d - bin) < 1e-15) {
      ++rises;
    } else if (std::abs(d) >= 1e-15) {
      ++bad_steps;
    }
  }
  const std::size_t expected = static_cast<std::size_t>((p.delta_end_m - p.delta_start_m) / kSpeedOfLight / bin);
  const bool stair = bad_steps == 0 && rises + 1 >= expected && std::abs(bin * 1e9 - 56.14) < 0.01 && worst_err <= bin;
  ok &= stair;
  notes.push_back(fmt("staircase: bin %.2f ns, %zu one-bin rises (~%zu expected), %zu irregular steps, max |error| %.1f ns",
                      bin * 1e9, rises, expected, bad_steps, worst_err * 1e9));

  // 30-tone alias: the sweep crosses 1.6 us
  auto m30 = emulator::preset("ideal");
  m30.reported_tones = ToneSubset::grouped30;
  emulator::ScheduleParams pa;
  pa.delta_start_m = 300.0;
  pa.delta_end_m = 700.0;
  pa.allow_alias = true;
  const auto s30 = emulator::make_schedule(emulator::ScheduleKind::two_path_tof, pa, 2000, 500.0, g, 4);
  const auto x30 = emulator::distort(emulator::apply_precoding(emulator::flat_channel(g), s30), m30, 4);
  const auto t30 = pipeline::tof_errors(x30, s30, 0.05, 1);
  const double bin30 = estimators::compute_pdp(x30.frames[0]).bin_s;
  // the peaks merge right at the wrap, so compare against the last packet that had an estimate
  double wrap_at = NAN, last = NAN;
  for (std::size_t i = 0; i < t30.est_s.size(); ++i) {
    if (std::isnan(t30.est_s[i])) continue;
    if (last - t30.est_s[i] > 1e-6) {
      wrap_at = t30.truth_s[i];
      break;
    }
    last = t30.est_s[i];
  }
  const bool wraps = std::abs(wrap_at - 1.6e-6) <= 2.0 * bin30;
  ok &= wraps;
  notes.push_back(fmt("30-tone estimate wraps at true delay %.0f ns (1600 +- %.0f)", wrap_at * 1e9, 2.0 * bin30 * 1e9));

  std::string d;
  for (const auto& n : notes) d += (d.empty() ? "" : "; ") + n;
  return {ok, d};
}

// 4 ------------------------------------------------------------------------------------------
double stability(const emulator::ReceiverModel& m, std::uint64_t seed) {
  const auto g = ht20();
  const auto sched = emulator::make_schedule(emulator::ScheduleKind::constant, {}, 10000, 500.0, g, 0);
  const auto ideal = emulator::apply_precoding(emulator::flat_channel(g), sched);
  std::vector<preprocess::ReceiverProfile> ps;
  for (std::uint64_t s = 0; s < 5; ++s)
    ps.push_back(preprocess::extract_profile(emulator::distort(ideal, m, substream(seed, "session", s)), 0));
  return preprocess::stability_score(ps).score;
}

Outcome profile_stability() {
  const auto x310 = emulator::preset("x310");
  auto esp_level = x310;
  esp_level.noise.sigma = emulator::sigma_for_measured(0.035, esp_level);
  const double a = stability(x310, 4), b = stability(esp_level, 4);
  return {a >= 0.9999 && b >= 0.999, fmt("S = %.6f default noise (>= 0.9999), %.6f at sigma 0.035 (>= 0.999)", a, b)};
}

// 5 ------------------------------------------------------------------------------------------
Outcome l1_invariance() {
  Engine eng(make_engine(substream(5, "l1")));
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    CsiVector h(56);
    for (auto& c : h) c = std::polar(std::exp(nd(eng)), kPi * u(eng));
    const double alpha = std::pow(10.0, u(eng));
    auto scaled = h;
    for (auto& c : scaled) c *= alpha;
    const auto a = preprocess::l1_normalize(h), b = preprocess::l1_normalize(scaled);
    for (std::size_t k = 0; k < h.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]) / std::abs(a[k]));
  }
  return {worst <= 1e-12, fmt("10^4 frames, alpha in [1e-6, 1e6]: max relative difference %.2e (<= 1e-12)", worst)};
}

// 6 ------------------------------------------------------------------------------------------
Outcome noise_metrology() {
  const std::map<std::string, double> table = {{"x310", 0.003}, {"ax210", 0.004}, {"iwl5300", 0.013}, {"qca", 0.015},
                                               {"asus1", 0.015}, {"asus2", 0.017}, {"esp1", 0.035}, {"esp2", 0.037}};
  nlohmann::json doc = nlohmann::json::parse(R"({
    "experiment": "noise", "seed": 5, "write_series": false,
    "schedule": {"kind": "constant", "rate_pps": 500, "packets": 10000},
    "preprocessing": {"detrend": "pads", "gain": "l1", "equalize": true, "calibration_packets": 10000, "mahalanobis_p": 0.999}
  })");
  for (const auto& [name, _] : table) doc["receivers"].push_back(name);
  const auto summary = summary_of(pipeline::run_experiment(config_from(doc), jobs()));
  bool ok = true;
  std::string d;
  for (const auto& r : summary["receivers"]) {
    const std::string name = r["receiver"];
    const double sd = r["preprocessed"]["amplitude"]["std"];
    const double rel = sd / table.at(name) - 1.0;
    ok &= std::abs(rel) <= 0.10;
    d += fmt("%s %.4f (%+.0f%%) ", name.c_str(), sd, rel * 100);
  }
  for (const auto& r : summary["receivers"]) {
    const std::string name = r["receiver"];
    if (name != "asus1" && name != "asus2") continue;
    const double before = r["preprocessed"]["amplitude"]["excess_kurtosis"];
    const double after = r["mahalanobis"]["amplitude"]["excess_kurtosis"];
    ok &= before > 10.0 && after < 1.0;
    d += fmt("; %s kurtosis %.1f -> %.2f after removing %d", name.c_str(), before, after, r["mahalanobis"]["removed"].get<int>());
  }
  return {ok, "std within 10%: " + d};
}

// 7 ------------------------------------------------------------------------------------------
Outcome kraskov_mi() {
  bool ok = true;
  std::string d;
  for (double rho : {0.0, 0.5, 0.9}) {
    Engine eng(make_engine(substream(7, "mi", static_cast<std::uint64_t>(rho * 10))));
    std::normal_distribution<double> nd;
    std::vector<double> x(10000), y(10000);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double a = nd(eng), b = nd(eng);
      x[i] = a;
      y[i] = rho * a + std::sqrt(1.0 - rho * rho) * b;
    }
    const double mi = metrics::mutual_information_knn(x, y);
    const double truth = -0.5 * std::log(1.0 - rho * rho);
    ok &= std::abs(mi - truth) <= 0.05;
    if (rho == 0.0) ok &= mi < 0.02;
    d += fmt("%srho %.1f: %.4f vs %.4f nats", d.empty() ? "" : "; ", rho, mi, truth);
  }
  return {ok, d + " (tolerance 0.05; independence < 0.02)"};
}

// 8 ------------------------------------------------------------------------------------------
Outcome bca_bootstrap() {
  std::vector<double> sym;
  for (int i = -50; i <= 50; ++i) sym.push_back(0.8 + 0.001 * i);
  const auto bca = eval::bootstrap_bca(sym, 10000, 0.5, 99.5, 8);
  const auto pct = eval::bootstrap_percentile(sym, 10000, 0.5, 99.5, 8);
  const double width = pct.hi - pct.lo;
  const double gap = std::max(std::abs(bca.lo - pct.lo), std::abs(bca.hi - pct.hi)) / width;
  const bool reduces = std::abs(bca.acceleration) < 1e-12 && gap <= 0.05;

  Engine eng(make_engine(substream(8, "coverage")));
  std::normal_distribution<double> nd(0.8, 0.05);
  int covered = 0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> x(100);
    for (auto& v : x) v = nd(eng);
    const auto ci = eval::bootstrap_bca(x, 10000, 0.5, 99.5, substream(8, "trial", static_cast<std::uint64_t>(t)));
    covered += ci.lo <= 0.8 && 0.8 <= ci.hi;
  }
  const double coverage = static_cast<double>(covered) / trials;
  return {reduces && coverage >= 0.97 && coverage <= 1.0,
          fmt("symmetric sample: a = %.1e, z0 = %.3f, endpoints within %.1f%% of the interval width of the percentile ones (<= 5%%); "
              "99%% coverage %.3f over %d trials (in [0.97, 1])",
              bca.acceleration, bca.z0, gap * 100, coverage, trials)};
}

// 9 ------------------------------------------------------------------------------------------
Outcome cross_device() {
  pipeline::PipelineConfig c;
  pipeline::load_config(fs::path(CSILAB_CONFIG_DIR) / "cross_device.json", {}, c);
  std::vector<emulator::ReceiverModel> models;
  for (const auto& r : c.receivers) models.push_back(r.model);
  std::vector<eval::Variant> variants;
  for (const auto& v : c.eval.variants) variants.push_back(eval::parse_variant(v));
  const auto runs = pipeline::cross_device_runs(c.eval.activity, models, variants, c.seed, c.eval.seeds, jobs());
  const auto s = pipeline::summarize_cross_device(runs, models);
  auto med = [&](const std::string& name) {
    for (const auto& v : s)
      if (v.variant == name) return v.median_off_diagonal;
    throw Error("variant missing: " + name);
  };
  const double raw = med("raw"), z = med("zscore-feature"), l1z = med("l1+zscore-feature");
  const bool ok = c.eval.seeds >= 10 && raw <= z && z <= l1z && l1z - raw >= 0.10;
  return {ok, fmt("%d seeds, %zu AGC-distinct pairs pooled: median off-diagonal raw %.3f <= zscore-feature %.3f <= l1+zscore-feature %.3f; gain %.3f (>= 0.10)",
                  c.eval.seeds, s.front().pairs, raw, z, l1z, l1z - raw)};
}

// 10 -----------------------------------------------------------------------------------------
Outcome ls_vs_pads() {
  bool ok = true;
  std::string d = "Doppler |median error| mm/s LS/PADS:";
  for (const auto& name : emulator::preset_names()) {
    const auto m = emulator::preset(name);
    if (!m.profile.enabled) continue;
    const double ls = median_error_mps(doppler(m, preprocess::DetrendMethod::ls, preprocess::GainMethod::l1, 10));
    const double pads = median_error_mps(doppler(m, preprocess::DetrendMethod::pads, preprocess::GainMethod::l1, 10));
    ok &= ls <= pads;
    d += fmt(" %s %.2f/%.2f", name.c_str(), ls * 1e3, pads * 1e3);
  }
  d += "; equalized ToF mean |error| ns LS/PADS:";
  for (const char* name : {"asus1", "x310", "qca", "esp1"}) {
    double err[2];
    for (int i = 0; i < 2; ++i) {
      auto doc = nlohmann::json::parse(R"({
        "experiment": "tof", "seed": 10, "write_series": false,
        "schedule": {"kind": "two_path_tof", "rate_pps": 500, "duration_s": 10, "delta_start_m": 100, "delta_end_m": 300},
        "preprocessing": {"gain": "l1", "equalize": true, "calibration_packets": 5000},
        "estimator": {"tof_threshold": 0.05}
      })");
      doc["receivers"] = {name};
      doc["preprocessing"]["detrend"] = i == 0 ? "ls" : "pads";
      err[i] = summary_of(pipeline::run_experiment(config_from(doc), 1))["receivers"][0]["mean_abs_error_ns"];
    }
    ok &= err[0] <= err[1];
    d += fmt(" %s %.2f/%.2f", name, err[0], err[1]);
  }
  return {ok, d};
}

// 11 -----------------------------------------------------------------------------------------
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    out[fs::relative(e.path(), dir).string()] = os.str();
  }
  return out;
}

Outcome determinism() {
  const auto work = fs::temp_directory_path() / "csilab_acceptance_rerun";
  std::vector<fs::path> configs;
  for (const auto& e : fs::directory_iterator(CSILAB_CONFIG_DIR))
    if (e.path().extension() == ".json") configs.push_back(e.path());
  std::sort(configs.begin(), configs.end());
  bool ok = !configs.empty();
  std::size_t files = 0;
  std::string diffs;
  for (const auto& path : configs) {
    const auto out = work / path.stem();
    fs::remove_all(out);
    pipeline::PipelineConfig c;
    pipeline::load_config(path, {"output_dir=" + out.string()}, c);
    pipeline::run(c, 1);
    const auto first = snapshot(out);
    fs::remove_all(out);
    pipeline::run(c, jobs() > 1 ? jobs() : 3);
    const auto second = snapshot(out);
    files += first.size();
    if (first != second) {
      ok = false;
      diffs += " " + path.stem().string();
    }
  }
  fs::remove_all(work);
  return {ok, fmt("%zu experiment configs run twice (1 worker, then several): %zu files, byte-identical%s", configs.size(), files,
                  diffs.empty() ? "" : (": differing in" + diffs).c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  // optional arguments select criteria by number
  std::vector<bool> selected(12, argc == 1);
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n >= 1 && n <= 11) selected[static_cast<std::size_t>(n)] = true;
  }
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"doppler rescue under random AGC", doppler_rescue},
      {"MUSIC per-tone weight invariance", music_invariance},
      {"ToF staircase, equalization gain, 30-tone alias", tof_staircase},
      {"profile stability", profile_stability},
      {"l1 scale invariance", l1_invariance},
      {"noise metrology", noise_metrology},
      {"Kraskov mutual information", kraskov_mi},
      {"BCa bootstrap", bca_bootstrap},
      {"cross-device rescue", cross_device},
      {"LS vs PADS detrending", ls_vs_pads},
      {"determinism", determinism},
  };
  int failed = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i + 1]) continue;
    ++ran;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
