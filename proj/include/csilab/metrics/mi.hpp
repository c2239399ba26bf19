#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

#include "csilab/core/error.hpp"
#include "csilab/core/rng.hpp"

namespace csilab::metrics {

/// Row-major sample matrix: n samples of dimension d.
struct Samples {
  std::size_t n = 0, d = 0;
  std::vector<double> v;

  double operator()(std::size_t i, std::size_t j) const { return v[i * d + j]; }
  static Samples column(const std::vector<double>& x) { return {x.size(), 1, x}; }
};

namespace detail {

/// Points sorted along their first coordinate for max-norm neighbour sweeps.
class SweepIndex {
 public:
  explicit SweepIndex(const Samples& s) : s_(s), order_(s.n), rank_(s.n) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return s(a, 0) < s(b, 0); });
    for (std::size_t r = 0; r < s.n; ++r) rank_[order_[r]] = r;
  }

  double dist(std::size_t a, std::size_t b) const {
    double m = 0.0;
    for (std::size_t j = 0; j < s_.d; ++j) m = std::max(m, std::abs(s_(a, j) - s_(b, j)));
    return m;
  }

  /// Number of points j != i with max-norm distance strictly below eps.
  std::size_t count_within(std::size_t i, double eps) const {
    std::size_t c = 0;
    const double x0 = s_(i, 0);
    for (std::size_t r = rank_[i] + 1; r < s_.n && s_(order_[r], 0) - x0 < eps; ++r) c += dist(i, order_[r]) < eps;
    for (std::size_t r = rank_[i]; r-- > 0 && x0 - s_(order_[r], 0) < eps;) c += dist(i, order_[r]) < eps;
    return c;
  }

  /// Distance to the k-th nearest neighbour of i (excluding i).
  double kth_distance(std::size_t i, std::size_t k) const {
    std::vector<double> best;  // max-heap of the k smallest distances
    best.reserve(k + 1);
    auto bound = [&] { return best.size() < k ? INFINITY : best.front(); };
    auto offer = [&](double d) {
      if (best.size() < k) {
        best.push_back(d);
        std::push_heap(best.begin(), best.end());
      } else if (d < best.front()) {
        std::pop_heap(best.begin(), best.end());
        best.back() = d;
        std::push_heap(best.begin(), best.end());
      }
    };
    const double x0 = s_(i, 0);
    std::size_t up = rank_[i] + 1, down = rank_[i];
    while (true) {
      const double du = up < s_.n ? s_(order_[up], 0) - x0 : INFINITY;
      const double dd = down > 0 ? x0 - s_(order_[down - 1], 0) : INFINITY;
      if (std::min(du, dd) > bound() || (du == INFINITY && dd == INFINITY)) break;
      if (du <= dd) {
        offer(dist(i, order_[up++]));
      } else {
        offer(dist(i, order_[--down]));
      }
    }
    return best.front();
  }

 private:
  const Samples& s_;
  std::vector<std::size_t> order_, rank_;
};

inline Samples join(const Samples& x, const Samples& y) {
  Samples z{x.n, x.d + y.d, std::vector<double>(x.n * (x.d + y.d))};
  for (std::size_t i = 0; i < x.n; ++i) {
    for (std::size_t j = 0; j < x.d; ++j) z.v[i * z.d + j] = x(i, j);
    for (std::size_t j = 0; j < y.d; ++j) z.v[i * z.d + x.d + j] = y(i, j);
  }
  return z;
}

/// Adds uniform noise of 1e-10 x (per-column spread) to break ties between duplicate samples.
inline void jitter(Samples& s, Engine& eng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t j = 0; j < s.d; ++j) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < s.n; ++i) {
      lo = std::min(lo, s(i, j));
      hi = std::max(hi, s(i, j));
    }
    const double scale = 1e-10 * std::max({hi - lo, std::abs(hi), std::abs(lo), 1e-300});
    for (std::size_t i = 0; i < s.n; ++i) s.v[i * s.d + j] += scale * u(eng);
  }
}

}  // namespace detail

/// Kraskov-Stoegbauer-Grassberger estimator (first variant), in nats, clamped at 0.
inline double mutual_information_knn(Samples x, Samples y, std::size_t k = 4, std::uint64_t seed = 0) {
  if (x.n != y.n) throw ConfigError("mutual information needs paired samples");
  if (x.n < 100) throw DegenerateError("mutual information needs at least 100 samples");
  if (k < 1 || k >= x.n) throw ConfigError("neighbour count k out of range");
  Engine eng = make_engine(substream(seed, "mi_jitter"));
  detail::jitter(x, eng);
  detail::jitter(y, eng);
  const Samples z = detail::join(x, y);
  const detail::SweepIndex iz(z), ix(x), iy(y);
  using boost::math::digamma;
  double acc = 0.0;
  for (std::size_t i = 0; i < z.n; ++i) {
    const double eps = iz.kth_distance(i, k);
    acc += digamma(static_cast<double>(ix.count_within(i, eps) + 1)) +
           digamma(static_cast<double>(iy.count_within(i, eps) + 1));
  }
  const double mi = digamma(static_cast<double>(k)) + digamma(static_cast<double>(z.n)) - acc / static_cast<double>(z.n);
  return std::max(0.0, mi);
}

inline double mutual_information_knn(const std::vector<double>& x, const std::vector<double>& y, std::size_t k = 4,
                                     std::uint64_t seed = 0) {
  return mutual_information_knn(Samples::column(x), Samples::column(y), k, seed);
}

inline constexpr double nats_to_bits(double nats) { return nats / 0.69314718055994530942; }

}  // namespace csilab::metrics
