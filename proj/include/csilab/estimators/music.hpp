#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "csilab/core/frame.hpp"
#include "csilab/core/stats.hpp"

namespace csilab::estimators {

struct MusicConfig {
  std::size_t window_len = 50;
  std::size_t n_sources = 2;
  double v_min = -3.0;
  double v_max = 3.0;
  double v_step = 0.001;
  double carrier_freq_hz = 0.0;  // 0: take the grid centre
  double dead_zone_mps = 0.05;
  double max_loss = 0.2;
  double eig_rel_threshold = 1e-10;  // signal eigenvalues below this fraction of the largest are dropped

  std::size_t grid_size() const {
    return static_cast<std::size_t>(std::llround((v_max - v_min) / v_step)) + 1;
  }
  double velocity_at(std::size_t i) const { return v_min + static_cast<double>(i) * v_step; }
};

inline void validate(const MusicConfig& c) {
  if (c.n_sources < 1 || c.n_sources >= c.window_len) throw ConfigError("MUSIC needs 1 <= n_sources < window_len");
  if (!(c.v_step > 0.0) || !(c.v_max >= c.v_min)) throw ConfigError("velocity grid must be nonempty and increasing");
  if (!(c.max_loss >= 0.0 && c.max_loss < 1.0)) throw ConfigError("max_loss outside [0, 1)");
}

struct Pseudospectrum {
  std::vector<double> v;
  std::vector<double> p;
  Eigen::VectorXd eigenvalues;  // ascending
  std::size_t signal_dim = 0;
};

/// MUSIC over a window of frames; tones are the snapshots so R is M x M across packets.
/// Uses P(v) = 1 / (a^H E_n E_n^H a) = 1 / (M - ||E_s^H a||^2) since |a_n| = 1.
inline Pseudospectrum music_spectrum(std::span<const CsiFrame> window, const MusicConfig& cfg) {
  validate(cfg);
  const std::size_t M = window.size();
  if (M <= cfg.n_sources) throw ConfigError("window shorter than n_sources + 1");
  const std::size_t K = window.front().csi.size();
  Eigen::MatrixXcd X(M, K);
  for (std::size_t n = 0; n < M; ++n) {
    if (window[n].csi.size() != K) throw ValidationError("window frames differ in tone count");
    for (std::size_t k = 0; k < K; ++k) X(n, k) = window[n].csi[k];
  }
  const Eigen::MatrixXcd R = X * X.adjoint() / static_cast<double>(K);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(R);
  Pseudospectrum out;
  out.eigenvalues = es.eigenvalues();
  const double top = std::max(out.eigenvalues[M - 1], 0.0);
  std::size_t p = 0;
  for (std::size_t i = 0; i < cfg.n_sources; ++i) {
    if (out.eigenvalues[M - 1 - i] > cfg.eig_rel_threshold * top && top > 0.0) ++p;
  }
  out.signal_dim = p;
  const Eigen::MatrixXcd Es = es.eigenvectors().rightCols(static_cast<Eigen::Index>(p));

  const double fc = cfg.carrier_freq_hz > 0.0 ? cfg.carrier_freq_hz : window.front().grid->center_freq_hz;
  std::vector<double> t(M);
  for (std::size_t n = 0; n < M; ++n) t[n] = static_cast<double>(window[n].ts_us - window.front().ts_us) * 1e-6;

  const std::size_t G = cfg.grid_size();
  out.v.resize(G);
  out.p.resize(G);
  const double w = -2.0 * kPi * fc / kSpeedOfLight;
  Eigen::VectorXcd a(M), rot(M);
  for (std::size_t n = 0; n < M; ++n) rot[n] = std::polar(1.0, w * cfg.v_step * t[n]);
  const double floor = 1e-12 * static_cast<double>(M);
  for (std::size_t i = 0; i < G; ++i) {
    const double v = cfg.velocity_at(i);
    if (i % 256 == 0) {
      for (std::size_t n = 0; n < M; ++n) a[n] = std::polar(1.0, w * v * t[n]);
    } else {
      a = a.cwiseProduct(rot);
    }
    const double proj = p ? (Es.adjoint() * a).squaredNorm() : 0.0;
    out.v[i] = v;
    out.p[i] = 1.0 / std::max(static_cast<double>(M) - proj, floor);
  }
  return out;
}

/// Local maxima of the pseudospectrum, strongest first, as grid positions.
inline std::vector<std::size_t> spectrum_peaks(const std::vector<double>& p) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool left = i == 0 || p[i] > p[i - 1];
    const bool right = i + 1 == p.size() || p[i] >= p[i + 1];
    if (left && right) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  return idx;
}

/// Grid argmax of P outside the dead zone around 0.
inline double pick_velocity(const Pseudospectrum& s, const MusicConfig& cfg) {
  std::size_t best = s.p.size();
  for (std::size_t i = 0; i < s.p.size(); ++i) {
    if (std::abs(s.v[i]) <= cfg.dead_zone_mps) continue;
    if (best == s.p.size() || s.p[i] > s.p[best]) best = i;
  }
  if (best == s.p.size()) throw DegenerateError("velocity grid lies entirely inside the dead zone");
  return s.v[best];
}

struct VelocityEstimates {
  std::vector<std::int64_t> window_start_us;
  std::vector<double> velocity;
  std::size_t skipped = 0;
  double median = 0.0;
  double iqr = 0.0;
};

/// Non-overlapping windows of `window_len` sequence numbers; windows losing more than
/// `max_loss` of their packets are skipped.
inline VelocityEstimates estimate_velocity(const CsiSeries& s, const MusicConfig& cfg) {
  validate(cfg);
  if (s.size() < cfg.window_len) throw DegenerateError("series shorter than one MUSIC window");
  VelocityEstimates out;
  const std::uint64_t first = s.frames.front().seq;
  std::size_t i = 0;
  while (i < s.size()) {
    const std::uint64_t w = (s.frames[i].seq - first) / cfg.window_len;
    const std::uint64_t end_seq = first + (w + 1) * cfg.window_len;
    std::size_t j = i;
    while (j < s.size() && s.frames[j].seq < end_seq) ++j;
    const std::size_t count = j - i;
    const bool full_span = end_seq <= s.frames.back().seq + 1;
    const double loss = 1.0 - static_cast<double>(count) / static_cast<double>(cfg.window_len);
    if (!full_span || loss > cfg.max_loss || count <= cfg.n_sources) {
      if (full_span) ++out.skipped;
    } else {
      const auto spec = music_spectrum(std::span<const CsiFrame>(s.frames).subspan(i, count), cfg);
      out.window_start_us.push_back(s.frames[i].ts_us);
      out.velocity.push_back(pick_velocity(spec, cfg));
    }
    i = j;
  }
  if (out.velocity.empty()) throw DegenerateError("no usable MUSIC windows");
  out.median = stats::median(out.velocity);
  out.iqr = stats::iqr(out.velocity);
  return out;
}

}  // namespace csilab::estimators
