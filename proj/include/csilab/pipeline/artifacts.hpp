#pragma once

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <json.hpp>

#include "csilab/core/ndjson.hpp"
#include "csilab/core/rng.hpp"

namespace csilab::pipeline {

inline constexpr const char* kVersion = "1.0.0";

struct Column {
  std::string name;
  std::string doc;
};

/// CSV text with a documented header. Numbers print with 17 significant digits so that files
/// round-trip and stay byte-stable.
class Csv {
 public:
  explicit Csv(std::vector<Column> cols) : cols_(std::move(cols)) {
    for (std::size_t i = 0; i < cols_.size(); ++i) os_ << (i ? "," : "") << cols_[i].name;
    os_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... vals) {
    static_assert(sizeof...(Ts) > 0);
    if (sizeof...(Ts) != cols_.size()) throw Error("csv row width does not match header");
    std::size_t i = 0;
    ((os_ << (i++ ? "," : "") << cell(vals)), ...);
    os_ << '\n';
  }

  const std::vector<Column>& columns() const { return cols_; }
  std::string str() const { return os_.str(); }

  static std::string cell(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(bool b) { return b ? "1" : "0"; }
  template <class T>
    requires std::is_integral_v<T>
  static std::string cell(T v) {
    return std::to_string(v);
  }

 private:
  std::vector<Column> cols_;
  std::ostringstream os_;
};

/// Everything an experiment produces, in write order.
struct Artifacts {
  std::vector<std::pair<std::string, std::string>> files;
  ordered_json csv_schema = ordered_json::object();

  void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }

  void add_csv(std::string name, const Csv& csv, std::string doc) {
    add_csv(std::move(name), csv.columns(), csv.str(), std::move(doc));
  }

  void add_csv(std::string name, const std::vector<Column>& columns, std::string content, std::string doc) {
    ordered_json cols = ordered_json::array();
    for (const auto& c : columns) cols.push_back({{"name", c.name}, {"doc", c.doc}});
    csv_schema[name] = {{"doc", std::move(doc)}, {"columns", std::move(cols)}};
    add(std::move(name), std::move(content));
  }

  void add_json(std::string name, const ordered_json& j) { add(std::move(name), j.dump(2) + "\n"); }

  /// NDJSON series plus its grid/provenance sidecar.
  void add_series(const std::string& name, const CsiSeries& s) {
    std::ostringstream body;
    write_series(body, s);
    ordered_json meta;
    meta["receiver"] = s.receiver_id();
    meta["grid"] = grid_to_json(*s.grid());
    meta["meta"] = s.meta;
    add(name, body.str());
    add(name + ".meta.json", meta.dump(2) + "\n");
  }
};

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

inline std::uint64_t content_hash(std::string_view s) { return csilab::detail::fnv1a(s); }

inline ordered_json library_versions() {
  ordered_json j;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  j["boost"] = std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000) + "." +
               std::to_string(BOOST_VERSION % 100);
  j["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                       "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH);
#ifdef __VERSION__
  j["compiler"] = __VERSION__;
#endif
  return j;
}

/// Writes every artifact (atomically), then the effective config, the CSV schema and the
/// manifest. Contents carry no timestamps, so identical inputs give identical bytes.
inline ordered_json write_artifacts(const std::filesystem::path& dir, const Artifacts& a, const ordered_json& config,
                                    std::string_view experiment, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  const std::string cfg_text = config.dump(2) + "\n";
  ordered_json files = ordered_json::array();
  auto put = [&](const std::string& name, const std::string& content) {
    write_file_atomic(dir / name, content);
    files.push_back({{"name", name}, {"bytes", content.size()}, {"fnv1a64", hex64(content_hash(content))}});
  };
  for (const auto& [name, content] : a.files) put(name, content);
  put("config.effective.json", cfg_text);
  put("schema.json", a.csv_schema.dump(2) + "\n");

  ordered_json m;
  m["tool"] = "csilab";
  m["version"] = kVersion;
  m["experiment"] = experiment;
  m["seed"] = seed;
  m["config_hash"] = "fnv1a64:" + hex64(content_hash(config.dump()));
  m["rerun"] = "csilab run config.effective.json";
  m["libraries"] = library_versions();
  m["files"] = std::move(files);
  write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
  return m;
}

}  // namespace csilab::pipeline
