#pragma once

// Newline-delimited JSON interchange: one CSI frame per line,
// {rx, seq, ts_us, rssi_db, sc_idx:[...], csi_re:[...], csi_im:[...]}, arrays ordered by
// ascending tone index. Series carry a sidecar "<file>.meta.json" holding the grid and provenance.

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "csilab/core/frame.hpp"

namespace csilab {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline std::string encode_frame(const CsiFrame& frame) {
  validate_frame(frame);
  ordered_json j;
  j["rx"] = frame.receiver_id;
  j["seq"] = frame.seq;
  j["ts_us"] = frame.ts_us;
  j["rssi_db"] = frame.rssi_db;
  j["sc_idx"] = frame.grid->indices;
  auto re = ordered_json::array();
  auto im = ordered_json::array();
  for (const auto& c : frame.csi) {
    re.push_back(c.real());
    im.push_back(c.imag());
  }
  j["csi_re"] = std::move(re);
  j["csi_im"] = std::move(im);
  return j.dump();
}

namespace detail {

inline const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(key, "missing");
  return *it;
}

template <class T>
T get_as(const json& j, const char* key) {
  const json& v = require(j, key);
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ParseError(key, std::string("wrong type: ") + e.what());
  }
}

inline std::vector<double> number_array(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_array()) throw ParseError(key, "expected an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) throw ParseError(key, "non-numeric entry");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace detail

/// Parses one line against the grid the series was recorded on.
inline CsiFrame decode_frame(std::string_view line, const GridPtr& grid) {
  if (!grid) throw ConfigError("decode_frame needs a grid");
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError("<line>", std::string("malformed json: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("<line>", "expected an object");

  CsiFrame f;
  f.receiver_id = detail::get_as<std::string>(j, "rx");
  f.seq = detail::get_as<std::uint64_t>(j, "seq");
  f.ts_us = detail::get_as<std::int64_t>(j, "ts_us");
  f.rssi_db = detail::get_as<double>(j, "rssi_db");
  auto idx = detail::get_as<std::vector<int>>(j, "sc_idx");
  auto re = detail::number_array(j, "csi_re");
  auto im = detail::number_array(j, "csi_im");

  if (idx.size() != grid->size()) {
    throw ParseError("sc_idx", "length " + std::to_string(idx.size()) + " does not match grid (" +
                                   std::to_string(grid->size()) + ")");
  }
  if (idx != grid->indices) throw ParseError("sc_idx", "tone indices differ from the series grid");
  if (re.size() != grid->size()) {
    throw ParseError("csi_re", "length " + std::to_string(re.size()) + " does not match grid (" +
                                   std::to_string(grid->size()) + ")");
  }
  if (im.size() != grid->size()) {
    throw ParseError("csi_im", "length " + std::to_string(im.size()) + " does not match grid (" +
                                   std::to_string(grid->size()) + ")");
  }
  f.grid = grid;
  f.csi.resize(re.size());
  for (std::size_t k = 0; k < re.size(); ++k) f.csi[k] = {re[k], im[k]};
  try {
    validate_frame(f);
  } catch (const ValidationError& e) {
    throw ParseError("csi_re", e.what());
  }
  return f;
}

inline ordered_json grid_to_json(const SubcarrierGrid& g) {
  ordered_json j;
  j["center_freq_hz"] = g.center_freq_hz;
  j["bandwidth_hz"] = g.bandwidth_hz;
  j["sc_idx"] = g.indices;
  return j;
}

inline SubcarrierGrid grid_from_json(const json& j) {
  return SubcarrierGrid::from_indices(detail::get_as<double>(j, "center_freq_hz"),
                                      detail::get_as<double>(j, "bandwidth_hz"),
                                      detail::get_as<std::vector<int>>(j, "sc_idx"));
}

inline void write_series(std::ostream& os, const CsiSeries& s) {
  for (const auto& f : s.frames) os << encode_frame(f) << '\n';
}

inline CsiSeries read_series(std::istream& is, const GridPtr& grid) {
  CsiSeries s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      s.frames.push_back(decode_frame(line, grid));
    } catch (const ParseError& e) {
      throw ParseError(e.field(), std::string("line ") + std::to_string(lineno) + ": " + e.what());
    }
  }
  validate_series(s);
  return s;
}

inline std::filesystem::path meta_path(const std::filesystem::path& series_path) {
  auto p = series_path;
  p += ".meta.json";
  return p;
}

/// Writes `content` to `path` via a temporary file and rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + tmp.string());
    os << content;
    if (!os) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void save_series(const std::filesystem::path& path, const CsiSeries& s) {
  if (s.empty()) throw ValidationError("refusing to save an empty series");
  validate_series(s);
  std::ostringstream body;
  write_series(body, s);
  ordered_json meta;
  meta["receiver"] = s.receiver_id();
  meta["grid"] = grid_to_json(*s.grid());
  meta["meta"] = s.meta;
  write_file_atomic(path, body.str());
  write_file_atomic(meta_path(path), meta.dump(2) + "\n");
}

inline CsiSeries load_series(const std::filesystem::path& path) {
  json meta;
  try {
    meta = json::parse(read_file(meta_path(path)));
  } catch (const json::parse_error& e) {
    throw ParseError("<meta>", e.what());
  }
  auto grid = make_grid(grid_from_json(detail::require(meta, "grid")));
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path.string());
  auto s = read_series(is, grid);
  if (meta.contains("meta")) s.meta = meta["meta"].get<std::map<std::string, std::string>>();
  return s;
}

}  // namespace csilab
