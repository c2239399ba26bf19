#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "csilab/core/frame.hpp"
#include "csilab/core/stats.hpp"

namespace csilab::metrics {

struct MomentRow {
  double std = 0.0;
  double iqr = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  bool degenerate = false;
};

struct NoiseReport {
  std::vector<int> tones;
  std::vector<MomentRow> amplitude;
  std::vector<MomentRow> phase;
  MomentRow amplitude_mean;
  MomentRow phase_mean;
  std::size_t n_samples = 0;
};

inline MomentRow moment_row(std::vector<double> x) {
  MomentRow r;
  r.std = stats::stddev(x);
  const auto m = stats::higher_moments(x);
  r.skewness = m.skewness;
  r.excess_kurtosis = m.excess_kurtosis;
  r.degenerate = m.degenerate;
  r.iqr = stats::iqr(std::move(x));
  if (r.degenerate) r.std = r.iqr = 0.0;
  return r;
}

inline MomentRow average_rows(const std::vector<MomentRow>& rows) {
  MomentRow m;
  for (const auto& r : rows) {
    m.std += r.std;
    m.iqr += r.iqr;
    m.skewness += r.skewness;
    m.excess_kurtosis += r.excess_kurtosis;
    m.degenerate = m.degenerate || r.degenerate;
  }
  const auto n = static_cast<double>(rows.size());
  m.std /= n;
  m.iqr /= n;
  m.skewness /= n;
  m.excess_kurtosis /= n;
  return m;
}

/// Per-tone amplitude and phase moments of a static, equalized series. Phase is taken relative
/// to each tone's circular mean.
inline NoiseReport noise_stats(const CsiSeries& s) {
  if (s.size() < 8) throw DegenerateError("noise statistics need at least 8 samples");
  const std::size_t K = s.grid()->size(), N = s.size();
  NoiseReport r;
  r.tones = s.grid()->indices;
  r.n_samples = N;
  std::vector<double> a(N), ph(N);
  for (std::size_t k = 0; k < K; ++k) {
    cplx dir{};
    for (std::size_t n = 0; n < N; ++n) {
      const auto& h = s.frames[n].csi[k];
      a[n] = std::abs(h);
      if (a[n] > 0.0) dir += h / a[n];
    }
    const double ref = std::arg(dir);
    for (std::size_t n = 0; n < N; ++n) ph[n] = stats::wrap_pi(std::arg(s.frames[n].csi[k]) - ref);
    r.amplitude.push_back(moment_row(a));
    r.phase.push_back(moment_row(ph));
  }
  r.amplitude_mean = average_rows(r.amplitude);
  r.phase_mean = average_rows(r.phase);
  return r;
}

inline std::string noise_csv(const NoiseReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "tone,amp_std,amp_iqr,amp_skew,amp_kurt,phase_std,phase_iqr,phase_skew,phase_kurt\n";
  for (std::size_t k = 0; k < r.tones.size(); ++k) {
    const auto& a = r.amplitude[k];
    const auto& p = r.phase[k];
    os << r.tones[k] << ',' << a.std << ',' << a.iqr << ',' << a.skewness << ',' << a.excess_kurtosis << ','
       << p.std << ',' << p.iqr << ',' << p.skewness << ',' << p.excess_kurtosis << '\n';
  }
  return os.str();
}

inline nlohmann::ordered_json noise_json(const NoiseReport& r) {
  auto row = [](const MomentRow& m) {
    nlohmann::ordered_json j;
    j["std"] = m.std;
    j["iqr"] = m.iqr;
    j["skewness"] = m.skewness;
    j["excess_kurtosis"] = m.excess_kurtosis;
    j["degenerate"] = m.degenerate;
    return j;
  };
  nlohmann::ordered_json j;
  j["n_samples"] = r.n_samples;
  j["amplitude"] = row(r.amplitude_mean);
  j["phase"] = row(r.phase_mean);
  return j;
}

struct CorrelationResult {
  Eigen::MatrixXd rho;
  std::vector<int> flagged_tones;  // zero-variance tones; their off-diagonal entries are 0

  /// Mean correlation between tones `lag` positions apart.
  double mean_at_lag(std::size_t lag) const {
    double acc = 0.0;
    const auto K = static_cast<std::size_t>(rho.rows());
    if (lag >= K) return 0.0;
    for (std::size_t i = 0; i + lag < K; ++i) acc += rho(i, i + lag);
    return acc / static_cast<double>(K - lag);
  }
};

/// Pearson correlation between per-tone amplitude fluctuations.
inline CorrelationResult noise_correlation(const CsiSeries& s) {
  if (s.size() < 8) throw DegenerateError("noise correlation needs at least 8 samples");
  const auto K = static_cast<Eigen::Index>(s.grid()->size()), N = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd A(N, K);
  for (Eigen::Index n = 0; n < N; ++n) {
    for (Eigen::Index k = 0; k < K; ++k) A(n, k) = std::abs(s.frames[n].csi[k]);
  }
  A.rowwise() -= A.colwise().mean();
  Eigen::MatrixXd C = A.transpose() * A;
  CorrelationResult r;
  r.rho = Eigen::MatrixXd::Identity(K, K);
  std::vector<double> sd(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    sd[k] = std::sqrt(C(k, k));
    if (!(sd[k] > 1e-14 * std::sqrt(static_cast<double>(N)))) {
      sd[k] = 0.0;
      r.flagged_tones.push_back(s.grid()->indices[k]);
    }
  }
  for (Eigen::Index i = 0; i < K; ++i) {
    for (Eigen::Index j = 0; j < K; ++j) {
      if (i == j) continue;
      r.rho(i, j) = sd[i] > 0.0 && sd[j] > 0.0 ? std::clamp(C(i, j) / (sd[i] * sd[j]), -1.0, 1.0) : 0.0;
    }
  }
  return r;
}

}  // namespace csilab::metrics
