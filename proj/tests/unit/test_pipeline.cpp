#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "csilab/pipeline/artifacts.hpp"
#include "csilab/pipeline/config.hpp"
#include "csilab/pipeline/experiments.hpp"

using namespace csilab;
using namespace csilab::pipeline;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

const Issue* find_issue(const Issues& issues, std::string_view path) {
  for (const auto& i : issues)
    if (i.path == path) return &i;
  return nullptr;
}

json small_doppler() {
  return json::parse(R"({
    "experiment": "doppler", "seed": 17, "output_dir": "unused",
    "schedule": {"kind": "two_path_doppler", "rate_pps": 500, "duration_s": 1, "velocity_mps": 1.0, "delta0_m": 100},
    "receivers": ["x310", "qca"],
    "estimator": {"window_len": 50, "v_min": -2, "v_max": 2, "v_step": 0.01}
  })");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("shipped configs validate") {
  for (const auto& e : fs::directory_iterator(CSILAB_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    INFO(e.path());
    PipelineConfig c;
    Issues issues;
    CHECK_NOTHROW(issues = load_config(e.path(), {}, c));
    CHECK(issues.empty());
  }
}

TEST_CASE("missing seed is named") {
  auto doc = small_doppler();
  doc.erase("seed");
  PipelineConfig c;
  const auto issues = parse_config(doc, c);
  REQUIRE(has_errors(issues));
  const auto* i = find_issue(issues, "seed");
  REQUIRE(i);
  CHECK(!i->warning);
}

TEST_CASE("unknown experiment lists the valid names") {
  auto doc = small_doppler();
  doc["experiment"] = "dopler";
  PipelineConfig c;
  const auto issues = parse_config(doc, c);
  const auto* i = find_issue(issues, "experiment");
  REQUIRE(i);
  for (const auto& name : experiment_names()) CHECK_THAT(i->message, ContainsSubstring(name));
}

TEST_CASE("every offending key is reported") {
  auto doc = small_doppler();
  doc.erase("seed");
  doc["schedule"]["rate_pps"] = -5;
  doc["receivers"][1] = "nokia";
  doc["preprocessing"] = {{"gain", "l7"}};
  PipelineConfig c;
  const auto issues = parse_config(doc, c);
  CHECK(find_issue(issues, "seed"));
  CHECK(find_issue(issues, "schedule.rate_pps"));
  CHECK(find_issue(issues, "receivers[1]"));
  CHECK(find_issue(issues, "preprocessing.gain"));
  CHECK(issues.size() >= 4);

  const auto j = issues_json(issues);
  CHECK(j.size() == issues.size());
  CHECK(j[0].contains("path"));
  CHECK(j[0]["severity"] == "error");
}

TEST_CASE("unknown keys are errors") {
  auto doc = small_doppler();
  doc["schedule"]["velocty_mps"] = 2.0;
  PipelineConfig c;
  const auto issues = parse_config(doc, c);
  CHECK(find_issue(issues, "schedule.velocty_mps"));
}

TEST_CASE("path-length sweep beyond the unambiguous range warns") {
  auto doc = json::parse(R"({
    "experiment": "tof", "seed": 1,
    "schedule": {"kind": "two_path_tof", "rate_pps": 100, "duration_s": 1, "delta_start_m": 100, "delta_end_m": 1200},
    "receivers": ["x310"]
  })");
  PipelineConfig c;
  auto issues = parse_config(doc, c);
  CHECK(!has_errors(issues));
  const auto* w = find_issue(issues, "schedule.allow_alias");
  REQUIRE(w);
  CHECK(w->warning);

  doc["schedule"]["allow_alias"] = true;
  issues = parse_config(doc, c);
  CHECK(issues.empty());
}

TEST_CASE("overrides compose left to right") {
  auto doc = small_doppler();
  apply_override(doc, "seed=3");
  apply_override(doc, "seed=4");
  CHECK(doc["seed"] == 4);

  apply_override(doc, "receivers[0].profile=off");
  CHECK(doc["receivers"][0]["preset"] == "x310");
  CHECK(doc["receivers"][0]["profile"] == "off");
  apply_override(doc, "receivers[2]=esp1");
  CHECK(doc["receivers"].size() == 3);
  apply_override(doc, "estimator.window_len=25");
  apply_override(doc, "output_dir=some/where");
  CHECK(doc["output_dir"] == "some/where");

  PipelineConfig c;
  CHECK(parse_config(doc, c).empty());
  CHECK(c.seed == 4);
  CHECK(!c.receivers[0].model.profile.enabled);
  CHECK(c.receivers[1].model.profile.enabled);
  CHECK(c.receivers.size() == 3);
  CHECK(c.estimator.music.window_len == 25);
  CHECK(c.effective["receivers"][0]["profile"] == "off");

  CHECK_THROWS_AS(apply_override(doc, "receivers[9].profile=on"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "seed"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "seed.x=1"), ConfigError);
}

TEST_CASE("load_config reports overrides and malformed files") {
  const auto dir = fresh_dir("csilab_cfg_test");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "bad.json") << "{\"experiment\": ";
    std::ofstream(dir / "ok.json") << small_doppler().dump();
  }
  PipelineConfig c;
  CHECK_THROWS_AS(load_config(dir / "bad.json", {}, c), ConfigIssues);
  CHECK_NOTHROW(load_config(dir / "ok.json", {"seed=9"}, c));
  CHECK(c.seed == 9);
  try {
    load_config(dir / "ok.json", {"seed=-1", "schedule.rate_pps=0"}, c);
    FAIL("expected config issues");
  } catch (const ConfigIssues& e) {
    CHECK(e.issues().size() >= 2);
  }
  fs::remove_all(dir);
}

TEST_CASE("csv cells") {
  Csv csv({{"a", "first"}, {"b", "second"}});
  csv.row(0.1, std::numeric_limits<double>::quiet_NaN());
  csv.row(std::size_t{3}, std::string("x"));
  CHECK(csv.str() == "a,b\n0.10000000000000001,\n3,x\n");
  CHECK_THROWS_AS(csv.row(1.0), Error);
}

TEST_CASE("runs are byte-identical and carry a manifest") {
  PipelineConfig c;
  REQUIRE(parse_config(small_doppler(), c).empty());
  const auto dir = fresh_dir("csilab_run_test");
  c.output_dir = dir / "a";
  const auto m1 = run(c, 1);
  std::map<std::string, std::string> first;
  for (const auto& e : fs::directory_iterator(c.output_dir)) first[e.path().filename().string()] = slurp(e.path());
  const auto m2 = run(c, 2);
  for (const auto& [name, content] : first) CHECK(slurp(c.output_dir / name) == content);
  CHECK(m1 == m2);

  CHECK(first.count("manifest.json"));
  CHECK(first.count("config.effective.json"));
  CHECK(first.count("schema.json"));
  CHECK(m1["seed"] == 17);
  CHECK(m1["experiment"] == "doppler");
  CHECK(m1["config_hash"].get<std::string>().rfind("fnv1a64:", 0) == 0);
  for (const auto& f : m1["files"]) {
    const auto text = slurp(c.output_dir / f["name"].get<std::string>());
    CHECK(f["bytes"] == text.size());
    CHECK(f["fnv1a64"] == hex64(content_hash(text)));
  }

  // The effective config reruns the same experiment.
  PipelineConfig again;
  CHECK(load_config(c.output_dir / "config.effective.json", {}, again).empty());
  again.output_dir = dir / "b";
  run(again, 1);
  for (const auto& [name, content] : first) {
    if (name == "manifest.json" || name == "config.effective.json") continue;
    CHECK(slurp(again.output_dir / name) == content);
  }
  fs::remove_all(dir);
}

TEST_CASE("profile override changes the tof results") {
  auto doc = json::parse(R"({
    "experiment": "tof", "seed": 2,
    "schedule": {"kind": "two_path_tof", "rate_pps": 100, "duration_s": 2, "delta_start_m": 100, "delta_end_m": 200},
    "receivers": ["asus1"],
    "preprocessing": {"equalize": true, "calibration_packets": 200}
  })");
  const auto dir = fresh_dir("csilab_tof_profile");
  std::string results[2];
  for (int on = 0; on < 2; ++on) {
    auto d = doc;
    apply_override(d, std::string("receivers[0].profile=") + (on ? "on" : "off"));
    apply_override(d, "output_dir=" + (dir / (on ? "on" : "off")).string());
    PipelineConfig c;
    REQUIRE(parse_config(d, c).empty());
    const auto m = run(c, 1);
    std::string all;
    for (const auto& f : m["files"]) {
      const auto name = f["name"].get<std::string>();
      if (name != "config.effective.json" && name != "manifest.json") all += slurp(c.output_dir / name);
    }
    results[on] = all;
  }
  CHECK(!results[0].empty());
  CHECK(results[0] != results[1]);
  fs::remove_all(dir);
}
