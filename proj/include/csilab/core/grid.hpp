#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "csilab/core/error.hpp"

namespace csilab {

inline constexpr double kToneSpacingHz = 312'500.0;
inline constexpr double kSpeedOfLight = 299'792'458.0;
inline constexpr double kPi = 3.14159265358979323846;

enum class Standard { ht20 };

/// Tone subsets a receiver may report.
enum class ToneSubset {
  all,
  /// 30-tone grouping reported by Intel 5300-class cards on 20 MHz:
  /// -28,-26,...,-2,-1,1,3,...,27,28.
  grouped30,
};

inline constexpr std::array<int, 30> kGrouped30Tones = {-28, -26, -24, -22, -20, -18, -16, -14, -12, -10,
                                                        -8,  -6,  -4,  -2,  -1,  1,   3,   5,   7,   9,
                                                        11,  13,  15,  17,  19,  21,  23,  25,  27,  28};

/// Ordered set of OFDM tone indices with their absolute frequencies.
struct SubcarrierGrid {
  double bandwidth_hz = 0.0;
  double center_freq_hz = 0.0;
  std::vector<int> indices;
  std::vector<double> freqs_hz;

  std::size_t size() const noexcept { return indices.size(); }

  /// Builds a grid, checking that indices are strictly increasing.
  static SubcarrierGrid from_indices(double center_freq_hz, double bandwidth_hz, std::vector<int> indices) {
    if (!(center_freq_hz > 0.0) || !std::isfinite(center_freq_hz)) {
      throw ConfigError("center frequency must be positive");
    }
    if (indices.empty()) throw ConfigError("grid needs at least one tone");
    for (std::size_t i = 1; i < indices.size(); ++i) {
      if (indices[i] <= indices[i - 1]) throw ConfigError("tone indices must be strictly increasing");
    }
    SubcarrierGrid g;
    g.bandwidth_hz = bandwidth_hz;
    g.center_freq_hz = center_freq_hz;
    g.freqs_hz.reserve(indices.size());
    for (int m : indices) g.freqs_hz.push_back(center_freq_hz + m * kToneSpacingHz);
    g.indices = std::move(indices);
    return g;
  }

  std::optional<std::size_t> position_of(int index) const {
    auto it = std::lower_bound(indices.begin(), indices.end(), index);
    if (it == indices.end() || *it != index) return std::nullopt;
    return static_cast<std::size_t>(it - indices.begin());
  }

  /// Most frequent gap between neighbouring indices (1 for HT20, 2 for the 30-tone grouping).
  int nominal_step() const {
    if (indices.size() < 2) return 1;
    std::map<int, int> counts;
    for (std::size_t i = 1; i < indices.size(); ++i) ++counts[indices[i] - indices[i - 1]];
    return std::max_element(counts.begin(), counts.end(),
                            [](const auto& a, const auto& b) { return a.second < b.second; })
        ->first;
  }

  /// Delay span before a delay-domain transform over this grid wraps around.
  double unambiguous_delay_s() const { return 1.0 / (nominal_step() * kToneSpacingHz); }

  bool is_grouped30() const {
    return indices.size() == kGrouped30Tones.size() &&
           std::equal(indices.begin(), indices.end(), kGrouped30Tones.begin());
  }

  friend bool operator==(const SubcarrierGrid& a, const SubcarrierGrid& b) {
    return a.indices == b.indices && a.center_freq_hz == b.center_freq_hz && a.bandwidth_hz == b.bandwidth_hz;
  }
};

using GridPtr = std::shared_ptr<const SubcarrierGrid>;

inline bool same_grid(const GridPtr& a, const GridPtr& b) {
  if (a == b) return true;
  return a && b && *a == *b;
}

inline Standard parse_standard(std::string_view tag) {
  if (tag == "ht20") return Standard::ht20;
  throw ConfigError("unknown standard '" + std::string(tag) + "' (valid: ht20)");
}

/// The 56-tone 802.11n 20 MHz grid, indices -28..-1, 1..28.
inline SubcarrierGrid standard_grid(Standard standard, double center_freq_hz) {
  switch (standard) {
    case Standard::ht20: {
      std::vector<int> idx;
      idx.reserve(56);
      for (int m = -28; m <= 28; ++m) {
        if (m != 0) idx.push_back(m);
      }
      return SubcarrierGrid::from_indices(center_freq_hz, 20e6, std::move(idx));
    }
  }
  throw ConfigError("unknown standard");
}

inline SubcarrierGrid standard_grid(std::string_view tag, double center_freq_hz) {
  return standard_grid(parse_standard(tag), center_freq_hz);
}

inline GridPtr make_grid(SubcarrierGrid g) { return std::make_shared<const SubcarrierGrid>(std::move(g)); }

inline ToneSubset parse_tone_subset(std::string_view s) {
  if (s == "all") return ToneSubset::all;
  if (s == "grouped30") return ToneSubset::grouped30;
  throw ConfigError("unknown tone subset '" + std::string(s) + "' (valid: all, grouped30)");
}

inline std::string_view to_string(ToneSubset s) { return s == ToneSubset::all ? "all" : "grouped30"; }

/// Positions (into `grid`) of the tones kept by `subset`.
inline std::vector<std::size_t> subset_positions(const SubcarrierGrid& grid, ToneSubset subset) {
  std::vector<std::size_t> pos;
  if (subset == ToneSubset::all) {
    pos.resize(grid.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
    return pos;
  }
  for (int m : kGrouped30Tones) {
    auto p = grid.position_of(m);
    if (!p) throw ConfigError("grid lacks tone " + std::to_string(m) + " required by the 30-tone subset");
    pos.push_back(*p);
  }
  return pos;
}

inline SubcarrierGrid decimate(const SubcarrierGrid& grid, ToneSubset subset) {
  if (subset == ToneSubset::all) return grid;
  std::vector<int> idx;
  for (std::size_t p : subset_positions(grid, subset)) idx.push_back(grid.indices[p]);
  return SubcarrierGrid::from_indices(grid.center_freq_hz, grid.bandwidth_hz, std::move(idx));
}

}  // namespace csilab
