#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "csilab/emulator/channel.hpp"
#include "csilab/emulator/receiver.hpp"
#include "csilab/metrics/deviation.hpp"
#include "csilab/metrics/mahalanobis.hpp"
#include "csilab/metrics/mi.hpp"
#include "csilab/metrics/noise.hpp"
#include "csilab/preprocess/profile.hpp"

using namespace csilab;
using namespace csilab::metrics;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

GridPtr ht20() { return make_grid(standard_grid(Standard::ht20, 5.18e9)); }

CsiSeries series_from(const GridPtr& g, const std::vector<CsiVector>& rows) {
  CsiSeries s;
  for (std::size_t n = 0; n < rows.size(); ++n) {
    CsiFrame f;
    f.receiver_id = "t";
    f.seq = n;
    f.ts_us = static_cast<std::int64_t>(n) * 2000;
    f.grid = g;
    f.csi = rows[n];
    s.frames.push_back(std::move(f));
  }
  return s;
}

CsiSeries emulate(const emulator::ReceiverModel& m, emulator::ScheduleKind kind, std::size_t n, std::uint64_t seed,
                  const emulator::ScheduleParams& p = {}) {
  using namespace emulator;
  const auto g = ht20();
  return distort(apply_precoding(flat_channel(g), make_schedule(kind, p, n, 500.0, g, seed)), m, seed);
}

emulator::ReceiverModel noise_only(double sigma, double corr = 0.0) {
  auto m = emulator::preset("ideal");
  m.noise.sigma = sigma;
  m.noise.corr = corr;
  return m;
}

std::pair<std::vector<double>, std::vector<double>> gaussian_pair(double rho, std::size_t n, std::uint64_t seed) {
  Engine eng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = nd(eng), b = nd(eng);
    x[i] = a;
    y[i] = rho * a + std::sqrt(1.0 - rho * rho) * b;
  }
  return {x, y};
}

}  // namespace

TEST_CASE("noise moments") {
  const auto g2 = make_grid(SubcarrierGrid::from_indices(5e9, 20e6, {1, 2}));
  SECTION("constant series") {
    const auto r = noise_stats(series_from(g2, std::vector<CsiVector>(20, CsiVector{{1, 0}, {2, 1}})));
    for (const auto& row : r.amplitude) {
      CHECK(row.std == 0.0);
      CHECK(row.iqr == 0.0);
      CHECK(row.skewness == 0.0);
      CHECK(row.excess_kurtosis == 0.0);
      CHECK(row.degenerate);
    }
  }
  SECTION("gaussian amplitudes") {
    Engine eng(31);
    std::normal_distribution<double> nd;
    std::vector<CsiVector> rows(100'000);
    for (auto& r : rows) r = {{5.0 + nd(eng), 0.0}, {7.0 + 2.0 * nd(eng), 0.0}};
    const auto r = noise_stats(series_from(g2, rows));
    CHECK_THAT(r.amplitude[0].std, WithinRel(1.0, 0.01));
    CHECK_THAT(r.amplitude[1].std, WithinRel(2.0, 0.01));
    CHECK_THAT(r.amplitude[0].iqr, WithinRel(1.34898, 0.02));
    for (const auto& row : r.amplitude) {
      CHECK_THAT(row.skewness, WithinAbs(0.0, 0.03));
      CHECK_THAT(row.excess_kurtosis, WithinAbs(0.0, 0.06));
    }
  }
  SECTION("shift and scale") {
    Engine eng(32);
    std::exponential_distribution<double> ex;
    std::vector<double> x(500);
    for (auto& v : x) v = ex(eng);
    auto shifted = x, scaled = x;
    for (auto& v : shifted) v += 3.0;
    for (auto& v : scaled) v *= 2.5;
    const auto a = moment_row(x), b = moment_row(shifted), c = moment_row(scaled);
    CHECK_THAT(b.std, WithinRel(a.std, 1e-9));
    CHECK_THAT(b.iqr, WithinRel(a.iqr, 1e-9));
    CHECK_THAT(b.skewness, WithinRel(a.skewness, 1e-9));
    CHECK_THAT(b.excess_kurtosis, WithinRel(a.excess_kurtosis, 1e-9));
    CHECK_THAT(c.std, WithinRel(2.5 * a.std, 1e-12));
    CHECK_THAT(c.iqr, WithinRel(2.5 * a.iqr, 1e-12));
    CHECK_THAT(c.skewness, WithinRel(a.skewness, 1e-9));
    CHECK_THAT(c.excess_kurtosis, WithinRel(a.excess_kurtosis, 1e-9));
  }
  SECTION("too few samples") {
    CHECK_THROWS_AS(noise_stats(series_from(g2, std::vector<CsiVector>(7, CsiVector{{1, 0}, {1, 0}}))), DegenerateError);
  }
}

TEST_CASE("heavy-tailed receiver") {
  const auto s = emulate(emulator::preset("asus1"), emulator::ScheduleKind::constant, 10'000, 3);
  const auto r = noise_stats(s);
  CHECK(r.amplitude_mean.excess_kurtosis > 10.0);

  const auto f = mahalanobis_filter(s, chi2_quantile(56, 0.999));
  CHECK(f.removed > 0);
  CHECK(f.removed < 100);
  CHECK(noise_stats(f.kept).amplitude_mean.excess_kurtosis < 1.0);
}

TEST_CASE("mahalanobis filter on clean data") {
  const auto s = emulate(noise_only(0.01), emulator::ScheduleKind::constant, 10'000, 4);
  const auto f = mahalanobis_filter(s, chi2_quantile(56, 0.999));
  CHECK(f.removed <= 20);
  CHECK(f.kept.size() + f.removed == s.size());

  const auto all = mahalanobis_filter(s, std::numeric_limits<double>::infinity());
  CHECK(all.removed == 0);
  CHECK(all.kept.size() == s.size());
  CHECK(all.kept.frames[17].csi == s.frames[17].csi);
}

TEST_CASE("noise correlation") {
  SECTION("diagonal covariance") {
    const auto c = noise_correlation(emulate(noise_only(0.01), emulator::ScheduleKind::constant, 10'000, 5));
    CHECK((c.rho - c.rho.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (Eigen::Index i = 0; i < c.rho.rows(); ++i) {
      CHECK(c.rho(i, i) == 1.0);
      for (Eigen::Index j = 0; j < c.rho.cols(); ++j)
        if (i != j) CHECK(std::abs(c.rho(i, j)) < 0.05);
    }
  }
  SECTION("band correlation") {
    const auto c = noise_correlation(emulate(noise_only(0.01, 0.6), emulator::ScheduleKind::constant, 10'000, 6));
    CHECK_THAT(c.mean_at_lag(1), WithinAbs(0.6, 0.03));
    CHECK(c.rho.maxCoeff() <= 1.0);
    CHECK(c.rho.minCoeff() >= -1.0);
  }
  SECTION("identical noise on every tone") {
    Engine eng(7);
    std::normal_distribution<double> nd;
    std::vector<CsiVector> rows(200);
    for (auto& r : rows) r.assign(56, cplx{1.0 + 0.1 * nd(eng), 0.0});
    const auto c = noise_correlation(series_from(ht20(), rows));
    CHECK((c.rho.array() - 1.0).abs().maxCoeff() < 1e-12);
  }
  SECTION("flat tone is flagged") {
    Engine eng(8);
    std::normal_distribution<double> nd;
    std::vector<CsiVector> rows(50);
    for (auto& r : rows) {
      r.assign(56, cplx{1.0, 0.0});
      for (std::size_t k = 1; k < 56; ++k) r[k] += nd(eng) * 0.1;
    }
    const auto c = noise_correlation(series_from(ht20(), rows));
    REQUIRE(c.flagged_tones.size() == 1);
    CHECK(c.flagged_tones[0] == -28);
    CHECK(c.rho.row(0).sum() == 1.0);
  }
}

TEST_CASE("response deviation") {
  using namespace emulator;
  const auto g = ht20();
  ScheduleParams p;
  p.tone = 3;
  const auto sched = make_schedule(ScheduleKind::single_tone, p, 1000, 500.0, g, 1);
  auto run = [&](const ReceiverModel& m) {
    return distort(apply_precoding(flat_channel(g), sched), m, 2);
  };

  SECTION("ideal receiver") {
    const auto r = response_deviation(calibrate_for_deviation(run(preset("ideal")), preprocess::unit_profile(g)), sched);
    for (std::size_t k = 0; k < r.amp.size(); ++k) {
      CHECK(r.amp[k] < 1e-12);
      CHECK(r.phase[k] < 1e-12);
    }
  }
  SECTION("smoothing leaks into the precoded tone") {
    auto m = preset("ideal");
    m.smoothing_width = 3;
    const auto r = response_deviation(calibrate_for_deviation(run(m), preprocess::unit_profile(g)), sched);
    CHECK(r.amp[*g->position_of(3)] > 1e-3);
  }
  SECTION("exact inverse of a noiseless distortion chain") {
    auto m = preset("asus1");
    m.noise.sigma = 0.0;
    const auto calib = distort(apply_precoding(flat_channel(g), make_schedule(ScheduleKind::constant, {}, 100, 500.0, g, 1)), m, 9);
    const auto profile = preprocess::extract_profile(calib, 100);
    const auto r = response_deviation(calibrate_for_deviation(run(m), profile), sched);
    for (std::size_t k = 0; k < r.amp.size(); ++k) {
      CHECK(r.amp[k] < 1e-9);
      CHECK(r.phase[k] < 1e-9);
    }
  }
  SECTION("noise only: folded-normal mean") {
    const double sigma = 0.01;
    const auto c = make_schedule(ScheduleKind::constant, {}, 10'000, 500.0, g, 1);
    const auto s = distort(apply_precoding(flat_channel(g), c), noise_only(sigma), 3);
    const auto r = response_deviation(calibrate_for_deviation(s, preprocess::unit_profile(g)), c);
    double mean = 0.0;
    for (double a : r.amp) mean += a / r.amp.size();
    CHECK_THAT(mean, WithinRel(sigma * std::sqrt(2.0 / kPi), 0.05));
  }
  SECTION("zero factor carries no phase") {
    REQUIRE(sched.factors[0][*g->position_of(3)] == cplx{});
    const auto r = response_deviation(calibrate_for_deviation(run(preset("ideal")), preprocess::unit_profile(g)), sched);
    CHECK(r.phase[*g->position_of(3)] < 1e-12);
  }
  SECTION("empty anchor set") {
    auto none = sched;
    none.anchor_set.clear();
    CHECK_THROWS_AS(response_deviation(run(preset("ideal")), none), ConfigError);
  }
}

TEST_CASE("kraskov mutual information") {
  SECTION("bivariate gaussian") {
    for (double rho : {0.0, 0.5, 0.9}) {
      const auto [x, y] = gaussian_pair(rho, 10'000, 40 + static_cast<std::uint64_t>(rho * 10));
      const double mi = mutual_information_knn(x, y);
      const double truth = -0.5 * std::log(1.0 - rho * rho);
      CHECK_THAT(mi, WithinAbs(truth, 0.05));
      if (rho == 0.0) CHECK(mi < 0.02);
    }
  }
  SECTION("symmetry and monotone reparameterisation") {
    const auto [x, y] = gaussian_pair(0.7, 10'000, 50);
    const double a = mutual_information_knn(x, y);
    CHECK_THAT(mutual_information_knn(y, x), WithinAbs(a, 1e-9));
    auto cubed = x;
    for (auto& v : cubed) v = v * v * v;
    CHECK_THAT(mutual_information_knn(cubed, y), WithinAbs(a, 0.05));
  }
  SECTION("information grows as noise shrinks") {
    Engine eng(60);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    std::normal_distribution<double> nd;
    std::vector<double> x(5000), e(5000);
    for (auto& v : x) v = u(eng);
    for (auto& v : e) v = nd(eng);
    double prev = -1.0;
    for (double sigma : {0.3, 0.1, 0.03, 0.01}) {
      Samples y{x.size(), 2, std::vector<double>(2 * x.size())};
      for (std::size_t i = 0; i < x.size(); ++i) {
        y.v[2 * i] = std::cos(x[i]) + sigma * e[i];
        y.v[2 * i + 1] = std::sin(x[i]) + sigma * e[(i + 1) % e.size()];
      }
      const double mi = mutual_information_knn(Samples::column(x), y);
      CHECK(mi > prev);
      prev = mi;
    }
    CHECK(prev > 2.0);
  }
  SECTION("duplicates and bad input") {
    std::vector<double> x(200), y(200);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = static_cast<double>(i % 4);
      y[i] = static_cast<double>(i % 4);
    }
    const double mi = mutual_information_knn(x, y);
    CHECK(std::isfinite(mi));
    CHECK(mi > 0.5);
    CHECK_THROWS_AS(mutual_information_knn(std::vector<double>(50), std::vector<double>(50)), DegenerateError);
    CHECK_THROWS_AS(mutual_information_knn(x, std::vector<double>(199)), ConfigError);
  }
  CHECK_THAT(nats_to_bits(std::log(2.0)), WithinRel(1.0, 1e-15));
}
