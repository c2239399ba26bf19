#pragma once

#include <algorithm>
#include <cmath>
#include <tuple>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "csilab/core/error.hpp"

namespace csilab::preprocess {

/// Dense examples x time x tone tensor, row-major.
struct Tensor3 {
  std::size_t n = 0, t = 0, k = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(std::size_t n_, std::size_t t_, std::size_t k_, double fill = 0.0)
      : n(n_), t(t_), k(k_), data(n_ * t_ * k_, fill) {}

  double& operator()(std::size_t i, std::size_t j, std::size_t l) { return data[(i * t + j) * k + l]; }
  double operator()(std::size_t i, std::size_t j, std::size_t l) const { return data[(i * t + j) * k + l]; }
  std::size_t example_size() const noexcept { return t * k; }
  bool same_shape_per_example(const Tensor3& o) const noexcept { return t == o.t && k == o.k; }
};

enum class Stat { minmax, zscore };
enum class Scope { global, window, subcarrier, feature };

inline Stat parse_stat(std::string_view s) {
  if (s == "minmax") return Stat::minmax;
  if (s == "zscore") return Stat::zscore;
  throw ConfigError("unknown standardization stat '" + std::string(s) + "' (valid: minmax, zscore)");
}

inline Scope parse_scope(std::string_view s) {
  if (s == "global") return Scope::global;
  if (s == "window") return Scope::window;
  if (s == "subcarrier") return Scope::subcarrier;
  if (s == "feature") return Scope::feature;
  throw ConfigError("unknown standardization scope '" + std::string(s) + "' (valid: global, window, subcarrier, feature)");
}

inline std::string_view to_string(Stat s) { return s == Stat::minmax ? "minmax" : "zscore"; }
inline std::string_view to_string(Scope s) {
  switch (s) {
    case Scope::global: return "global";
    case Scope::window: return "window";
    case Scope::subcarrier: return "subcarrier";
    case Scope::feature: return "feature";
  }
  return "?";
}

struct StandardizationSpec {
  Stat stat = Stat::zscore;
  Scope scope = Scope::feature;
};

namespace detail {

struct Acc {
  double sum = 0, sum2 = 0, lo = INFINITY, hi = -INFINITY;
  std::size_t count = 0;
  void add(double v) {
    sum += v;
    sum2 += v * v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    ++count;
  }
};

}  // namespace detail

/// Fitted (center, scale) per unit; y = (x - center) / scale.
/// Window scope has no fitted state: every example is scaled by its own statistics.
class FittedTransform {
 public:
  StandardizationSpec spec;
  std::size_t t = 0, k = 0;
  std::vector<double> center, scale;
  std::size_t degenerate_units = 0;  // zero-spread units mapped to 0 with unit scale

  Tensor3 apply(const Tensor3& x) const {
    if (x.t != t || x.k != k) throw ValidationError("tensor shape differs from the fitted shape");
    Tensor3 y = x;
    if (spec.scope == Scope::window) {
      for (std::size_t i = 0; i < x.n; ++i) {
        const double* b = &x.data[i * x.example_size()];
        detail::Acc a;
        for (std::size_t j = 0; j < x.example_size(); ++j) a.add(b[j]);
        const auto [c, s] = unit_stats(a, nullptr);
        for (std::size_t j = 0; j < x.example_size(); ++j) y.data[i * x.example_size() + j] = (b[j] - c) / s;
      }
      return y;
    }
    for (std::size_t i = 0; i < x.n; ++i) {
      for (std::size_t j = 0; j < t; ++j) {
        for (std::size_t l = 0; l < k; ++l) {
          const std::size_t u = unit(j, l);
          y(i, j, l) = (x(i, j, l) - center[u]) / scale[u];
        }
      }
    }
    return y;
  }

  Tensor3 inverse(const Tensor3& y) const {
    if (spec.scope == Scope::window) throw ConfigError("window-scope standardization has no stored inverse");
    if (y.t != t || y.k != k) throw ValidationError("tensor shape differs from the fitted shape");
    Tensor3 x = y;
    for (std::size_t i = 0; i < y.n; ++i) {
      for (std::size_t j = 0; j < t; ++j) {
        for (std::size_t l = 0; l < k; ++l) {
          const std::size_t u = unit(j, l);
          x(i, j, l) = y(i, j, l) * scale[u] + center[u];
        }
      }
    }
    return x;
  }

  std::size_t unit(std::size_t j, std::size_t l) const {
    switch (spec.scope) {
      case Scope::global: return 0;
      case Scope::subcarrier: return l;
      case Scope::feature: return j * k + l;
      case Scope::window: return 0;
    }
    return 0;
  }

  std::pair<double, double> unit_stats(const detail::Acc& a, std::size_t* degenerate) const {
    double c, s;
    if (spec.stat == Stat::minmax) {
      c = a.lo;
      s = a.hi - a.lo;
      if (!(s > 0.0)) c = a.hi;
    } else {
      c = a.sum / static_cast<double>(a.count);
      s = std::sqrt(std::max(0.0, a.sum2 / static_cast<double>(a.count) - c * c));
      if (s <= 1e-12 * std::max(1.0, std::abs(c))) s = 0.0;
    }
    if (!(s > 0.0)) {
      s = 1.0;
      if (degenerate) ++*degenerate;
    }
    return {c, s};
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["stat"] = to_string(spec.stat);
    j["scope"] = to_string(spec.scope);
    j["time"] = t;
    j["tones"] = k;
    j["center"] = center;
    j["scale"] = scale;
    j["degenerate_units"] = degenerate_units;
    return j;
  }

  static FittedTransform from_json(const nlohmann::json& j) {
    FittedTransform f;
    f.spec = {parse_stat(j.at("stat").get<std::string>()), parse_scope(j.at("scope").get<std::string>())};
    f.t = j.at("time").get<std::size_t>();
    f.k = j.at("tones").get<std::size_t>();
    f.center = j.at("center").get<std::vector<double>>();
    f.scale = j.at("scale").get<std::vector<double>>();
    f.degenerate_units = j.at("degenerate_units").get<std::size_t>();
    return f;
  }
};

/// Fits the transform on `train` only. Population statistics; zero-spread units pass through centred.
inline FittedTransform fit_standardizer(const Tensor3& train, StandardizationSpec spec) {
  if (train.n == 0 || train.example_size() == 0) throw DegenerateError("standardization fit on an empty tensor");
  FittedTransform f;
  f.spec = spec;
  f.t = train.t;
  f.k = train.k;
  if (spec.scope == Scope::window) return f;
  const std::size_t units = spec.scope == Scope::global ? 1 : spec.scope == Scope::subcarrier ? train.k : train.t * train.k;
  std::vector<detail::Acc> acc(units);
  for (std::size_t i = 0; i < train.n; ++i) {
    for (std::size_t j = 0; j < train.t; ++j) {
      for (std::size_t l = 0; l < train.k; ++l) acc[f.unit(j, l)].add(train(i, j, l));
    }
  }
  f.center.resize(units);
  f.scale.resize(units);
  if (spec.stat == Stat::zscore) {
    // two-pass variance for accuracy
    std::vector<double> ss(units, 0.0);
    for (std::size_t u = 0; u < units; ++u) f.center[u] = acc[u].sum / static_cast<double>(acc[u].count);
    for (std::size_t i = 0; i < train.n; ++i) {
      for (std::size_t j = 0; j < train.t; ++j) {
        for (std::size_t l = 0; l < train.k; ++l) {
          const auto u = f.unit(j, l);
          const double d = train(i, j, l) - f.center[u];
          ss[u] += d * d;
        }
      }
    }
    for (std::size_t u = 0; u < units; ++u) {
      double s = std::sqrt(ss[u] / static_cast<double>(acc[u].count));
      if (s <= 1e-12 * std::max(1.0, std::abs(f.center[u]))) {
        s = 1.0;
        ++f.degenerate_units;
      }
      f.scale[u] = s;
    }
    return f;
  }
  for (std::size_t u = 0; u < units; ++u) std::tie(f.center[u], f.scale[u]) = f.unit_stats(acc[u], &f.degenerate_units);
  return f;
}

inline Tensor3 standardize(const Tensor3& x, StandardizationSpec spec) { return fit_standardizer(x, spec).apply(x); }

}  // namespace csilab::preprocess
