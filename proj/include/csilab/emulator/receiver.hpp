#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "csilab/core/frame.hpp"
#include "csilab/core/rng.hpp"
#include "csilab/emulator/schedule.hpp"

namespace csilab::emulator {

enum class AgcKind { none, step_coarse, step_fine, random };

inline AgcKind parse_agc_kind(std::string_view s) {
  if (s == "none") return AgcKind::none;
  if (s == "step_coarse") return AgcKind::step_coarse;
  if (s == "step_fine") return AgcKind::step_fine;
  if (s == "random") return AgcKind::random;
  throw ConfigError("unknown agc kind '" + std::string(s) + "' (valid: none, step_coarse, step_fine, random)");
}

inline std::string_view to_string(AgcKind k) {
  switch (k) {
    case AgcKind::none: return "none";
    case AgcKind::step_coarse: return "step_coarse";
    case AgcKind::step_fine: return "step_fine";
    case AgcKind::random: return "random";
  }
  return "?";
}

/// Gain control. Step policies steer the mean per-tone output power towards `target_db`;
/// the random policy draws a gain uniformly within `spread_db` of it.
struct AgcPolicy {
  AgcKind kind = AgcKind::none;
  double step_db = 6.0;
  double hysteresis_db = 3.0;
  double spread_db = 6.0;
  double target_db = 0.0;

  static AgcPolicy none() { return {}; }
  static AgcPolicy step_coarse(double step_db = 6.0, double hysteresis_db = 3.0) {
    return {AgcKind::step_coarse, step_db, hysteresis_db, 6.0, 0.0};
  }
  static AgcPolicy step_fine(double step_db = 1.0) { return {AgcKind::step_fine, step_db, 0.0, 6.0, 0.0}; }
  static AgcPolicy random(double spread_db = 6.0) { return {AgcKind::random, 6.0, 3.0, spread_db, 0.0}; }

  bool operator==(const AgcPolicy&) const = default;
};

/// Smooth static per-tone distortion: a low-order Fourier series in tone index.
struct ProfileShape {
  bool enabled = true;
  int harmonics = 4;
  double amp_ripple = 0.10;
  double phase_ripple_rad = 0.30;
  std::uint64_t seed = 1;
};

struct PhaseRamp {
  double slope_max = 0.2;  // a[n] ~ U[-slope_max, slope_max] rad per tone index
  bool random_intercept = true;  // b[n] ~ U[-pi, pi)
};

/// Complex Gaussian noise. Unless `covariance` is given, Sigma_kl = 2 sigma^2 corr^|k-l|,
/// so `sigma` is the standard deviation of each real component.
struct NoiseModel {
  double sigma = 0.0;
  double corr = 0.0;
  std::optional<Eigen::MatrixXcd> covariance;
  double outlier_prob = 0.0;
  double outlier_scale = 20.0;

  bool active() const { return covariance ? covariance->cwiseAbs().maxCoeff() > 0.0 : sigma > 0.0; }

  Eigen::MatrixXcd covariance_for(std::size_t K) const {
    if (covariance) {
      if (static_cast<std::size_t>(covariance->rows()) != K || static_cast<std::size_t>(covariance->cols()) != K) {
        throw ConfigError("noise covariance is " + std::to_string(covariance->rows()) + "x" +
                          std::to_string(covariance->cols()) + ", grid has " + std::to_string(K) + " tones");
      }
      return *covariance;
    }
    Eigen::MatrixXcd s(K, K);
    for (std::size_t i = 0; i < K; ++i) {
      for (std::size_t j = 0; j < K; ++j) {
        const double lag = std::abs(static_cast<double>(i) - static_cast<double>(j));
        s(i, j) = 2.0 * sigma * sigma * (lag == 0.0 ? 1.0 : std::pow(corr, lag));
      }
    }
    return s;
  }
};

/// A parameterised receiver distortion chain.
struct ReceiverModel {
  std::string name = "receiver";
  AgcPolicy agc;
  ProfileShape profile;
  std::vector<double> profile_amp;    // explicit A_k; overrides `profile` when non-empty
  std::vector<double> profile_phase;  // explicit Phi_k
  PhaseRamp phase_ramp;
  NoiseModel noise;
  int smoothing_width = 1;
  ToneSubset reported_tones = ToneSubset::all;
  double rssi_quant_db = 1.0;
  double drop_prob = 0.0;
  double report_scale = 1.0;  // device-specific reporting unit
};

struct StaticProfile {
  std::vector<double> amp;
  std::vector<double> phase;
};

/// Materialises A_k and Phi_k for `grid`; the mean of A_k is exactly renormalised to 1.
inline StaticProfile static_profile(const ReceiverModel& model, const SubcarrierGrid& grid) {
  const std::size_t K = grid.size();
  StaticProfile p;
  if (!model.profile_amp.empty() || !model.profile_phase.empty()) {
    p.amp = model.profile_amp.empty() ? std::vector<double>(K, 1.0) : model.profile_amp;
    p.phase = model.profile_phase.empty() ? std::vector<double>(K, 0.0) : model.profile_phase;
    if (p.amp.size() != K || p.phase.size() != K) throw ConfigError("explicit profile length differs from grid");
  } else {
    p.amp.assign(K, 1.0);
    p.phase.assign(K, 0.0);
    const auto& shape = model.profile;
    if (shape.enabled && shape.harmonics > 0) {
      Engine eng = make_engine(substream(shape.seed, "profile"));
      std::uniform_real_distribution<double> coef(-1.0, 1.0);
      std::uniform_real_distribution<double> phase0(0.0, 2.0 * kPi);
      const double span = static_cast<double>(grid.indices.back() - grid.indices.front() + 1);
      std::vector<double> ra(K, 0.0), rp(K, 0.0);
      for (int h = 1; h <= shape.harmonics; ++h) {
        const double ca = coef(eng), pa = phase0(eng);
        const double cp = coef(eng), pp = phase0(eng);
        for (std::size_t k = 0; k < K; ++k) {
          const double x = 2.0 * kPi * h * (grid.indices[k] - grid.indices.front()) / span;
          ra[k] += ca * std::cos(x + pa);
          rp[k] += cp * std::cos(x + pp);
        }
      }
      // scale each shape so its peak deviation equals the configured ripple
      auto peak = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
      };
      const double pa = peak(ra), pp = peak(rp);
      for (std::size_t k = 0; k < K; ++k) {
        if (pa > 0.0) p.amp[k] += shape.amp_ripple * ra[k] / pa;
        if (pp > 0.0) p.phase[k] += shape.phase_ripple_rad * rp[k] / pp;
      }
    }
  }
  double mean = 0.0;
  for (double a : p.amp) {
    if (!(a > 0.0)) throw ConfigError("profile amplitude must be positive");
    mean += a;
  }
  mean /= static_cast<double>(K);
  for (double& a : p.amp) a /= mean;
  return p;
}

inline void validate_model(const ReceiverModel& m) {
  if (m.smoothing_width < 1 || m.smoothing_width % 2 == 0) {
    throw ConfigError("smoothing_width must be an odd integer >= 1");
  }
  if (!(m.noise.outlier_prob >= 0.0 && m.noise.outlier_prob <= 1.0)) throw ConfigError("outlier_prob outside [0,1]");
  if (!(m.drop_prob >= 0.0 && m.drop_prob < 1.0)) throw ConfigError("drop_prob outside [0,1)");
  if (!(m.noise.sigma >= 0.0)) throw ConfigError("noise sigma must be nonnegative");
  if (!(std::abs(m.noise.corr) < 1.0)) throw ConfigError("noise corr must lie in (-1, 1)");
  if (!(m.rssi_quant_db >= 0.0)) throw ConfigError("rssi_quant_db must be nonnegative");
  if (!(m.report_scale > 0.0)) throw ConfigError("report_scale must be positive");
  if (m.agc.kind != AgcKind::none && m.agc.kind != AgcKind::random && !(m.agc.step_db > 0.0)) {
    throw ConfigError("agc step_db must be positive");
  }
  if (m.noise.covariance) {
    const auto& s = *m.noise.covariance;
    if (s.rows() != s.cols()) throw ConfigError("noise covariance must be square");
    if ((s - s.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, s.cwiseAbs().maxCoeff())) {
      throw ConfigError("noise covariance must be Hermitian");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(s, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff())) {
      throw ConfigError("noise covariance must be positive semidefinite");
    }
  }
}

/// 10 log10(sum_k |H_k|^2), quantised to `quant_db` (0 disables quantisation).
inline double compute_rssi(std::span<const cplx> pre_agc, double quant_db = 0.0) {
  double p = 0.0;
  for (const auto& h : pre_agc) p += std::norm(h);
  if (!(p > 0.0)) throw DegenerateError("rssi of an all-zero frame");
  double r = 10.0 * std::log10(p);
  if (quant_db > 0.0) r = std::round(r / quant_db) * quant_db;
  return r;
}

namespace detail {

class Agc {
 public:
  explicit Agc(AgcPolicy p) : p_(p) {}

  double gain_db(double input_db, Engine& eng) {
    switch (p_.kind) {
      case AgcKind::none: return 0.0;
      case AgcKind::random: return p_.target_db + std::uniform_real_distribution<double>(-p_.spread_db, p_.spread_db)(eng);
      case AgcKind::step_fine: return quantised(input_db);
      case AgcKind::step_coarse: {
        if (!gain_ || std::abs(input_db + *gain_ - p_.target_db) > p_.hysteresis_db) gain_ = quantised(input_db);
        return *gain_;
      }
    }
    return 0.0;
  }

 private:
  double quantised(double input_db) const { return std::round((p_.target_db - input_db) / p_.step_db) * p_.step_db; }

  AgcPolicy p_;
  std::optional<double> gain_;
};

/// Edge-truncated complex moving average across tone positions.
inline CsiVector moving_average(const CsiVector& x, int width) {
  if (width <= 1) return x;
  const auto K = static_cast<std::ptrdiff_t>(x.size());
  const std::ptrdiff_t h = width / 2;
  CsiVector y(x.size());
  for (std::ptrdiff_t k = 0; k < K; ++k) {
    const auto lo = std::max<std::ptrdiff_t>(0, k - h), hi = std::min<std::ptrdiff_t>(K - 1, k + h);
    cplx acc{};
    for (auto j = lo; j <= hi; ++j) acc += x[j];
    y[k] = acc / static_cast<double>(hi - lo + 1);
  }
  return y;
}

inline Eigen::MatrixXcd covariance_factor(const Eigen::MatrixXcd& sigma) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(sigma);
  Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

}  // namespace detail

/// Runs the ideal stream through the receiver. Per packet: AGC gain, static profile, random
/// linear phase, additive (possibly outlier) noise, tone smoothing, decimation, RSSI.
/// Every random draw comes from a (seed, purpose, packet) substream.
inline CsiSeries distort(const IdealStream& ideal, const ReceiverModel& model, std::uint64_t seed) {
  validate_model(model);
  if (!ideal.grid) throw ConfigError("ideal stream has no grid");
  const auto& grid = *ideal.grid;
  const std::size_t K = grid.size();
  const auto profile = static_profile(model, grid);
  const auto keep = subset_positions(grid, model.reported_tones);
  auto out_grid = make_grid(decimate(grid, model.reported_tones));

  const bool noisy = model.noise.active();
  Eigen::MatrixXcd factor;
  bool diagonal = false;
  double diag_scale = 0.0;
  if (noisy) {
    const auto sigma = model.noise.covariance_for(K);
    diagonal = !model.noise.covariance && model.noise.corr == 0.0;
    if (diagonal) {
      diag_scale = std::sqrt(2.0) * model.noise.sigma;
    } else {
      factor = detail::covariance_factor(sigma);
    }
  }

  detail::Agc agc(model.agc);
  CsiSeries series;
  series.meta["receiver"] = model.name;
  series.meta["seed"] = std::to_string(seed);
  series.frames.reserve(ideal.size());

  CsiVector x(K);
  Eigen::VectorXcd z(K);
  for (std::size_t n = 0; n < ideal.size(); ++n) {
    const auto& in = ideal.packets[n];
    if (in.size() != K) throw ValidationError("ideal packet length differs from grid");

    double p_in = 0.0;
    for (const auto& h : in) p_in += std::norm(h);
    p_in /= static_cast<double>(K);
    const double input_db = p_in > 0.0 ? 10.0 * std::log10(p_in) : -300.0;

    Engine agc_eng = make_engine(substream(seed, "agc", n));
    const double g = std::pow(10.0, agc.gain_db(input_db, agc_eng) / 20.0);

    Engine ramp_eng = make_engine(substream(seed, "phase_ramp", n));
    const double slope = model.phase_ramp.slope_max > 0.0
                             ? std::uniform_real_distribution<double>(-model.phase_ramp.slope_max,
                                                                      model.phase_ramp.slope_max)(ramp_eng)
                             : 0.0;
    const double intercept =
        model.phase_ramp.random_intercept ? std::uniform_real_distribution<double>(-kPi, kPi)(ramp_eng) : 0.0;

    for (std::size_t k = 0; k < K; ++k) {
      const double phase = profile.phase[k] + slope * grid.indices[k] + intercept;
      x[k] = in[k] * g * profile.amp[k] * std::polar(1.0, phase);
    }

    if (noisy) {
      Engine noise_eng = make_engine(substream(seed, "noise", n));
      std::normal_distribution<double> unit(0.0, std::sqrt(0.5));
      const bool outlier =
          model.noise.outlier_prob > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(noise_eng) <
                                                model.noise.outlier_prob;
      const double scale = outlier ? model.noise.outlier_scale : 1.0;
      for (std::size_t k = 0; k < K; ++k) z[k] = cplx{unit(noise_eng), unit(noise_eng)};
      if (diagonal) {
        for (std::size_t k = 0; k < K; ++k) x[k] += scale * diag_scale * z[k];
      } else {
        Eigen::VectorXcd eta = factor * z;
        for (std::size_t k = 0; k < K; ++k) x[k] += scale * eta[k];
      }
    }

    if (model.drop_prob > 0.0) {
      Engine drop_eng = make_engine(substream(seed, "drop", n));
      if (std::uniform_real_distribution<double>(0.0, 1.0)(drop_eng) < model.drop_prob) continue;
    }

    const CsiVector smoothed = detail::moving_average(x, model.smoothing_width);
    CsiFrame f;
    f.receiver_id = model.name;
    f.seq = n;
    f.ts_us = ideal.ts_us[n];
    f.rssi_db = compute_rssi(in, model.rssi_quant_db);
    f.grid = out_grid;
    f.csi.resize(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) f.csi[i] = smoothed[keep[i]] * model.report_scale;
    series.frames.push_back(std::move(f));
  }
  return series;
}

/// Per-packet outlier inflation leaves the overall amplitude std at `target`.
inline double base_sigma_for(double target, double outlier_prob, double outlier_scale) {
  return target / std::sqrt(1.0 + outlier_prob * (outlier_scale * outlier_scale - 1.0));
}

/// Gain the policy applies to a unit-power (0 dB) input; for the random policy, the centre.
inline double nominal_gain_db(const AgcPolicy& p) {
  switch (p.kind) {
    case AgcKind::none: return 0.0;
    case AgcKind::random: return p.target_db;
    case AgcKind::step_fine:
    case AgcKind::step_coarse: return std::round(p.target_db / p.step_db) * p.step_db;
  }
  return 0.0;
}

/// Noise sigma that makes `measured` the amplitude std of a unit-power channel after gain
/// normalisation. Accounts for the AGC gain (noise enters after it), random-gain spread,
/// tone smoothing and outlier packets.
inline double sigma_for_measured(double measured, const ReceiverModel& m) {
  double s = measured * std::pow(10.0, nominal_gain_db(m.agc) / 20.0);
  if (m.agc.kind == AgcKind::random && m.agc.spread_db > 0.0) {
    const double a = m.agc.spread_db / 10.0;
    const double inv_power = (std::pow(10.0, a) - std::pow(10.0, -a)) / (2.0 * a * std::log(10.0));
    s /= std::sqrt(inv_power);
  }
  if (m.smoothing_width > 1) {
    double sum = 0.0;
    for (int i = 0; i < m.smoothing_width; ++i)
      for (int j = 0; j < m.smoothing_width; ++j) sum += std::pow(m.noise.corr, std::abs(i - j));
    s /= std::sqrt(sum) / m.smoothing_width;
  }
  return base_sigma_for(s, m.noise.outlier_prob, m.noise.outlier_scale);
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"ideal", "x310", "ax210", "iwl5300", "qca",
                                                 "asus1", "asus2", "esp1", "esp2"};
  return names;
}

/// Receiver models loosely shaped after common CSI-capable hardware. Noise levels follow
/// measured amplitude std of equalized CSI; AGC behaviour is qualitative.
inline ReceiverModel preset(std::string_view name) {
  ReceiverModel m;
  m.name = std::string(name);
  m.profile.seed = csilab::detail::fnv1a(name);
  if (name == "ideal") {
    m.profile.enabled = false;
    m.phase_ramp = {0.0, false};
    m.rssi_quant_db = 0.0;
  } else if (name == "x310") {
    m.profile.amp_ripple = 0.02;
    m.profile.phase_ripple_rad = 0.05;
    m.phase_ramp.slope_max = 0.05;
    m.noise.sigma = 0.003;
  } else if (name == "ax210") {
    m.agc = AgcPolicy::step_fine();
    m.agc.target_db = 6.0;
    m.noise.sigma = 0.004;
    m.smoothing_width = 3;
    m.phase_ramp.slope_max = 0.05;
  } else if (name == "iwl5300") {
    m.agc = AgcPolicy::step_fine();
    m.agc.target_db = 3.0;
    m.noise.sigma = 0.013;
    m.reported_tones = ToneSubset::grouped30;
  } else if (name == "qca") {
    m.agc = AgcPolicy::random(6.0);
    m.agc.target_db = -4.0;
    m.noise.sigma = 0.015;
    m.noise.corr = 0.6;
  } else if (name == "asus1" || name == "asus2") {
    const bool first = name == "asus1";
    m.agc = AgcPolicy::step_coarse();
    m.agc.target_db = -2.0;
    m.profile.harmonics = 12;
    m.profile.amp_ripple = 0.3;
    m.profile.phase_ripple_rad = 1.0;
    m.noise.corr = 0.6;
    m.noise.outlier_prob = first ? 1e-3 : 5e-4;
    m.noise.sigma = first ? 0.015 : 0.017;
  } else if (name == "esp1" || name == "esp2") {
    m.agc = AgcPolicy::random(6.0);
    m.noise.sigma = name == "esp1" ? 0.035 : 0.037;
    m.report_scale = 20.0;
    m.rssi_quant_db = 1.0;
  } else {
    std::string valid;
    for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown receiver preset '" + std::string(name) + "' (valid: " + valid + ")");
  }
  m.noise.sigma = sigma_for_measured(m.noise.sigma, m);
  return m;
}

}  // namespace csilab::emulator
