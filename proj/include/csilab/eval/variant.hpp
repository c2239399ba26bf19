#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "csilab/eval/dataset.hpp"
#include "csilab/preprocess/filters.hpp"
#include "csilab/preprocess/gain.hpp"
#include "csilab/preprocess/standardize.hpp"

namespace csilab::eval {

/// A preprocessing chain such as "raw", "zscore-feature" or "l1+median+zscore-feature":
/// optional per-frame gain step, optional temporal filter, optional fitted standardization.
struct Variant {
  std::string name = "raw";
  preprocess::GainMethod gain = preprocess::GainMethod::none;
  std::optional<preprocess::FilterSpec> filter;
  std::optional<preprocess::StandardizationSpec> standardize;
};

inline Variant parse_variant(std::string_view text) {
  Variant v;
  v.name = std::string(text);
  if (text == "raw") return v;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find('+', start), text.size());
    const auto part = text.substr(start, end - start);
    if (part == "l1" || part == "l2" || part == "rssi") {
      v.gain = preprocess::parse_gain(part);
    } else if (part == "median" || part == "savgol" || part == "hampel") {
      v.filter = preprocess::parse_filter(part);
    } else if (auto dash = part.find('-'); dash != std::string_view::npos) {
      v.standardize = preprocess::StandardizationSpec{preprocess::parse_stat(part.substr(0, dash)),
                                                      preprocess::parse_scope(part.substr(dash + 1))};
    } else {
      throw ConfigError("unknown preprocessing step '" + std::string(part) +
                        "' (valid: raw, l1, l2, rssi, median, savgol, hampel, <minmax|zscore>-<scope>)");
    }
    start = end + 1;
  }
  return v;
}

/// Per-example steps (gain and filter) that need no fitting.
inline Tensor3 apply_frame_steps(const LabeledDataset& d, const Variant& v) {
  Tensor3 x = d.features;
  if (v.gain != preprocess::GainMethod::none) {
    for (std::size_t i = 0; i < x.n; ++i) {
      for (std::size_t t = 0; t < x.t; ++t) {
        double* row = &x(i, t, 0);
        double denom = 0.0;
        switch (v.gain) {
          case preprocess::GainMethod::l1:
            for (std::size_t k = 0; k < x.k; ++k) denom += row[k];
            denom /= static_cast<double>(x.k);
            break;
          case preprocess::GainMethod::l2:
            for (std::size_t k = 0; k < x.k; ++k) denom += row[k] * row[k];
            denom = std::sqrt(denom / static_cast<double>(x.k));
            break;
          case preprocess::GainMethod::rssi: {
            double p = 0.0;
            for (std::size_t k = 0; k < x.k; ++k) p += row[k] * row[k];
            if (d.rssi_db.empty()) throw ConfigError("rssi variant needs per-frame rssi");
            denom = std::sqrt(p / std::pow(10.0, d.rssi_db[i * x.t + t] / 10.0));
            break;
          }
          default:
            throw ConfigError("gain method not available on amplitude features");
        }
        if (!(denom > 0.0)) throw DegenerateError("zero gain denominator in feature frame");
        for (std::size_t k = 0; k < x.k; ++k) row[k] /= denom;
      }
    }
  }
  if (v.filter) {
    std::vector<double> col(x.t);
    for (std::size_t i = 0; i < x.n; ++i) {
      for (std::size_t k = 0; k < x.k; ++k) {
        for (std::size_t t = 0; t < x.t; ++t) col[t] = x(i, t, k);
        const auto y = preprocess::apply_filter(col, *v.filter);
        for (std::size_t t = 0; t < x.t; ++t) x(i, t, k) = y[t];
      }
    }
  }
  return x;
}

enum class FitMode {
  train_only,     // statistics from the training partition, applied to both
  per_partition,  // each partition standardized on its own statistics
};

struct Prepared {
  Tensor3 train;
  Tensor3 test;
};

inline Prepared prepare(const LabeledDataset& train, const LabeledDataset& test, const Variant& v, FitMode mode) {
  Prepared p{apply_frame_steps(train, v), apply_frame_steps(test, v)};
  if (!p.train.same_shape_per_example(p.test)) throw ValidationError("train and test feature shapes differ");
  if (v.standardize) {
    const auto f = preprocess::fit_standardizer(p.train, *v.standardize);
    const auto test_fit = mode == FitMode::train_only ? f : preprocess::fit_standardizer(p.test, *v.standardize);
    p.train = f.apply(p.train);
    p.test = test_fit.apply(p.test);
  }
  return p;
}

}  // namespace csilab::eval
