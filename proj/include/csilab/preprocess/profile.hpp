#pragma once

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "csilab/core/ndjson.hpp"
#include "csilab/preprocess/gain.hpp"
#include "csilab/preprocess/phase.hpp"

namespace csilab::preprocess {

/// Static per-tone calibration of one receiver.
struct ReceiverProfile {
  GridPtr grid;
  std::vector<double> amp;
  std::vector<double> phase;
  std::size_t n_packets = 0;
  std::string label;

  cplx at(std::size_t k) const { return std::polar(amp[k], phase[k]); }
};

/// Mean amplitude and circular-mean phase of PADS-detrended, l1-normalized CSI over the first
/// `n_packets` frames.
inline ReceiverProfile extract_profile(const CsiSeries& s, std::size_t n_packets, std::string label = {}) {
  if (s.empty()) throw DegenerateError("profile extraction on an empty series");
  if (n_packets == 0 || n_packets > s.size()) n_packets = s.size();
  const std::size_t K = s.grid()->size();
  std::vector<double> amp(K, 0.0);
  std::vector<cplx> dir(K, cplx{});
  for (std::size_t n = 0; n < n_packets; ++n) {
    const auto& f = s.frames[n];
    auto h = l1_normalize(detrend_phase(f.csi, f.grid->indices, DetrendMethod::pads));
    for (std::size_t k = 0; k < K; ++k) {
      const double a = std::abs(h[k]);
      amp[k] += a;
      if (a > 0.0) dir[k] += h[k] / a;
    }
  }
  ReceiverProfile p;
  p.grid = s.grid();
  p.n_packets = n_packets;
  p.label = std::move(label);
  p.amp.resize(K);
  p.phase.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    p.amp[k] = amp[k] / static_cast<double>(n_packets);
    p.phase[k] = std::arg(dir[k]);
    if (!(p.amp[k] > 0.0)) throw DegenerateError("profile amplitude is zero at tone " + std::to_string(p.grid->indices[k]));
  }
  return p;
}

/// Profile with A = 1 and Phi = 0.
inline ReceiverProfile unit_profile(GridPtr grid) {
  ReceiverProfile p;
  p.amp.assign(grid->size(), 1.0);
  p.phase.assign(grid->size(), 0.0);
  p.grid = std::move(grid);
  return p;
}

inline CsiFrame equalize(const CsiFrame& f, const ReceiverProfile& p) {
  if (!same_grid(f.grid, p.grid)) throw ConfigError("profile grid differs from frame grid");
  CsiVector out(f.csi.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!(p.amp[k] > 0.0)) throw DegenerateError("profile amplitude must be positive");
    out[k] = f.csi[k] / p.at(k);
  }
  return f.with_csi(std::move(out));
}

inline CsiSeries equalize(const CsiSeries& s, const ReceiverProfile& p) {
  auto out = map_frames(s, [&](const CsiFrame& f) { return equalize(f, p); });
  out.meta["equalized"] = p.label.empty() ? "profile" : p.label;
  return out;
}

struct StabilityResult {
  double score = 0.0;
  double min_pair = 0.0;
  bool nonpositive_pair = false;  // some similarity <= 0; score forced to 0
};

/// Geometric mean of the pairwise cosine similarities Re<H_i, H_j> / (|H_i||H_j|).
inline StabilityResult stability_score(const std::vector<ReceiverProfile>& profiles) {
  if (profiles.size() < 2) throw ConfigError("stability score needs at least 2 profiles");
  for (const auto& p : profiles) {
    if (!same_grid(p.grid, profiles.front().grid)) throw ConfigError("profiles on different grids");
  }
  std::vector<double> norms;
  for (const auto& p : profiles) {
    double n2 = 0.0;
    for (double a : p.amp) n2 += a * a;
    if (!(n2 > 0.0)) throw DegenerateError("zero-norm profile '" + p.label + "'");
    norms.push_back(std::sqrt(n2));
  }
  StabilityResult r;
  r.min_pair = 1.0;
  double log_sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    for (std::size_t j = i + 1; j < profiles.size(); ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < profiles[i].amp.size(); ++k) {
        dot += (profiles[i].at(k) * std::conj(profiles[j].at(k))).real();
      }
      const double sij = dot / (norms[i] * norms[j]);
      r.min_pair = std::min(r.min_pair, sij);
      if (sij <= 0.0) {
        r.nonpositive_pair = true;
      } else {
        log_sum += std::log(sij);
      }
      ++pairs;
    }
  }
  r.score = r.nonpositive_pair ? 0.0 : std::exp(log_sum / static_cast<double>(pairs));
  return r;
}

inline std::string encode_profile(const ReceiverProfile& p) {
  ordered_json j;
  j["label"] = p.label;
  j["sc_idx"] = p.grid->indices;
  j["amp"] = p.amp;
  j["phase"] = p.phase;
  j["n_packets"] = p.n_packets;
  return j.dump();
}

inline ReceiverProfile decode_profile(std::string_view line, const GridPtr& grid) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError("<line>", e.what());
  }
  ReceiverProfile p;
  p.grid = grid;
  p.label = csilab::detail::get_as<std::string>(j, "label");
  p.amp = csilab::detail::number_array(j, "amp");
  p.phase = csilab::detail::number_array(j, "phase");
  p.n_packets = csilab::detail::get_as<std::size_t>(j, "n_packets");
  if (csilab::detail::get_as<std::vector<int>>(j, "sc_idx") != grid->indices) throw ParseError("sc_idx", "differs from grid");
  if (p.amp.size() != grid->size()) throw ParseError("amp", "length does not match grid");
  if (p.phase.size() != grid->size()) throw ParseError("phase", "length does not match grid");
  return p;
}

/// One profile per line; the grid goes to the usual meta sidecar.
inline void save_profiles(const std::filesystem::path& path, const std::vector<ReceiverProfile>& ps) {
  if (ps.empty()) throw ValidationError("no profiles to save");
  std::ostringstream body;
  for (const auto& p : ps) body << encode_profile(p) << '\n';
  ordered_json meta;
  meta["grid"] = grid_to_json(*ps.front().grid);
  write_file_atomic(path, body.str());
  write_file_atomic(meta_path(path), meta.dump(2) + "\n");
}

inline std::vector<ReceiverProfile> load_profiles(const std::filesystem::path& path) {
  auto grid = make_grid(grid_from_json(csilab::detail::require(json::parse(read_file(meta_path(path))), "grid")));
  std::istringstream is(read_file(path));
  std::vector<ReceiverProfile> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) out.push_back(decode_profile(line, grid));
  }
  return out;
}

}  // namespace csilab::preprocess
