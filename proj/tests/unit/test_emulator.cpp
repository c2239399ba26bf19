#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include <Eigen/Dense>

#include "csilab/core/stats.hpp"
#include "csilab/emulator/channel.hpp"
#include "csilab/emulator/receiver.hpp"
#include "csilab/emulator/schedule.hpp"
#include "csilab/preprocess/gain.hpp"

using namespace csilab;
using namespace csilab::emulator;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

GridPtr ht20() { return make_grid(standard_grid(Standard::ht20, 5.18e9)); }

ReceiverModel clean(std::string name = "clean") {
  auto m = preset("ideal");
  m.name = std::move(name);
  m.rssi_quant_db = 0.0;
  return m;
}

IdealStream constant_stream(const GridPtr& g, std::size_t n) {
  return apply_precoding(flat_channel(g), make_schedule(ScheduleKind::constant, {}, n, 500.0, g, 1));
}

}  // namespace

TEST_CASE("multipath channel") {
  const auto g = ht20();
  SECTION("unit path at zero delay") {
    for (const auto& h : multipath_channel({Path{}}, g).response) CHECK(h == cplx{1.0, 0.0});
  }
  SECTION("phase advance per tone") {
    const double tau = 56.14e-9;
    const auto ch = multipath_channel({Path{{1.0, 0.0}, tau}}, g);
    for (std::size_t k = 1; k < g->size(); ++k) {
      if (g->indices[k] - g->indices[k - 1] != 1) continue;
      const double d = std::arg(ch.response[k] / ch.response[k - 1]);
      CHECK_THAT(d, WithinAbs(-2.0 * kPi * 312'500.0 * tau, 1e-9));
      CHECK_THAT(d, WithinAbs(-0.1102, 1e-4));
    }
  }
  SECTION("destructive interference") {
    const std::size_t k0 = 40;
    const double tau2 = 0.5 / g->freqs_hz[k0];
    const auto ch = multipath_channel({Path{}, Path{{1.0, 0.0}, tau2}}, g);
    CHECK(std::abs(ch.response[k0]) < 1e-9);
  }
  SECTION("errors") {
    CHECK_THROWS_AS(multipath_channel({}, g), ConfigError);
    CHECK_THROWS_AS(multipath_channel({Path{{1.0, 0.0}, 4e-6}}, g), ConfigError);
  }
}

TEST_CASE("doppler schedule") {
  const auto g = ht20();
  const ScheduleParams p;
  const auto s = make_schedule(ScheduleKind::two_path_doppler, p, packets_for(50.0, 500.0), 500.0, g, 1);
  REQUIRE(s.size() == 25'000);
  CHECK(s.ts_us[1] == 2000);
  CHECK(s.ts_us.back() == 24'999 * 2000);

  const double dt = 1.0 / 500.0;
  for (std::size_t n : {0ul, 1234ul, 24'998ul}) {
    for (std::size_t k : {0ul, 27ul, 55ul}) {
      const cplx d0 = s.factors[n][k] - p.a;
      const cplx d1 = s.factors[n + 1][k] - p.a;
      const double expect = -2.0 * kPi * g->freqs_hz[k] * p.velocity_mps * dt / kSpeedOfLight;
      CHECK_THAT(std::arg(d1 / d0), WithinAbs(expect, 1e-9));
      CHECK_THAT(std::abs(d0), WithinAbs(p.b, 1e-12));
    }
  }
}

TEST_CASE("tof schedule delay range") {
  const auto g = ht20();
  const auto s = make_schedule(ScheduleKind::two_path_tof, {}, packets_for(50.0, 500.0), 500.0, g, 1);
  CHECK_THAT(s.delta_m.front() / kSpeedOfLight, WithinAbs(333.6e-9, 0.05e-9));
  CHECK_THAT(s.delta_m.back() / kSpeedOfLight, WithinAbs(1000.7e-9, 0.05e-9));
}

TEST_CASE("schedule validation") {
  const auto g = ht20();
  ScheduleParams p;
  p.a = 0.8;
  CHECK_THROWS_AS(make_schedule(ScheduleKind::two_path_doppler, p, 10, 500.0, g, 1), ConfigError);
  ScheduleParams far;
  far.delta_end_m = 2000.0;
  CHECK_THROWS_AS(make_schedule(ScheduleKind::two_path_tof, far, 10, 500.0, g, 1), ConfigError);
  far.allow_alias = true;
  CHECK_NOTHROW(make_schedule(ScheduleKind::two_path_tof, far, 10, 500.0, g, 1));
  CHECK_THROWS_AS(make_schedule(ScheduleKind::constant, {}, 10, 0.0, g, 1), ConfigError);
  ScheduleParams off;
  off.tone = 0;
  CHECK_THROWS_AS(make_schedule(ScheduleKind::single_tone, off, 10, 500.0, g, 1), ConfigError);
}

TEST_CASE("tone schedules keep anchors disjoint") {
  const auto g = ht20();
  const auto s = make_schedule(ScheduleKind::tone_block, {}, 4, 500.0, g, 1);
  CHECK(s.modified_tones.size() == 20);
  CHECK(s.anchor_set.size() == 36);
  for (int m : s.modified_tones) CHECK(std::find(s.anchor_set.begin(), s.anchor_set.end(), m) == s.anchor_set.end());
  const auto c = make_schedule(ScheduleKind::constant, {}, 3, 500.0, g, 1);
  for (const auto& row : c.factors)
    for (const auto& v : row) CHECK(v == cplx{1.0, 0.0});
}

TEST_CASE("precoding is a Hadamard product") {
  const auto g = ht20();
  const auto ch = multipath_channel({Path{{0.8, 0.1}, 50e-9}, Path{{0.3, -0.2}, 400e-9}}, g);
  const auto s = make_schedule(ScheduleKind::two_path_doppler, {}, 20, 500.0, g, 1);
  const auto x = apply_precoding(ch, s);
  for (std::size_t n = 0; n < x.size(); ++n)
    for (std::size_t k = 0; k < g->size(); ++k)
      CHECK(std::abs(x.packets[n][k] / ch.response[k] - s.factors[n][k]) < 1e-12);

  const auto flat = apply_precoding(flat_channel(g), s);
  CHECK(flat.packets == s.factors);
  const auto c = apply_precoding(ch, make_schedule(ScheduleKind::constant, {}, 3, 500.0, g, 1));
  for (const auto& row : c.packets) CHECK(row == ch.response);

  const auto other = make_grid(standard_grid(Standard::ht20, 2.412e9));
  CHECK_THROWS_AS(apply_precoding(flat_channel(other), s), ConfigError);
}

TEST_CASE("rssi") {
  CHECK_THAT(compute_rssi(std::vector<cplx>{{1.0, 0.0}}), WithinAbs(0.0, 1e-15));
  const std::vector<cplx> two = {{1.0, 0.0}, {0.0, 1.0}};
  CHECK_THAT(compute_rssi(two), WithinAbs(3.0103, 1e-4));
  CHECK(compute_rssi(two, 1.0) == 3.0);
  CHECK_THROWS_AS(compute_rssi(std::vector<cplx>(4)), DegenerateError);
}

TEST_CASE("static profile is mean-one") {
  const auto g = ht20();
  for (const auto& name : preset_names()) {
    const auto p = static_profile(preset(name), *g);
    CHECK_THAT(stats::mean(p.amp), WithinAbs(1.0, 1e-9));
  }
}

TEST_CASE("x310-like receiver adds small noise only") {
  const auto g = ht20();
  auto m = preset("x310");
  m.profile.enabled = false;
  m.phase_ramp = {0.0, false};
  const auto out = distort(constant_stream(g, 10'000), m, 3);
  std::vector<double> amp;
  for (const auto& f : out.frames) amp.push_back(std::abs(f.csi[20]));
  CHECK_THAT(stats::mean(amp), WithinAbs(1.0, 1e-3));
  CHECK_THAT(stats::stddev(amp), WithinRel(0.003, 0.1));
}

TEST_CASE("smoothing smears block edges") {
  const auto g = ht20();
  auto m = clean();
  m.smoothing_width = 3;
  const auto s = make_schedule(ScheduleKind::tone_block, {}, 2, 500.0, g, 1);
  const auto out = distort(apply_precoding(flat_channel(g), s), m, 1);
  const auto& f = out.frames[0];
  for (int edge : {-11, 11}) {
    const double a = std::abs(f.csi[*g->position_of(edge)]);
    CHECK(a > 1.0);
    CHECK(a < 2.0);
  }
  CHECK_THAT(std::abs(f.csi[*g->position_of(5)]), WithinAbs(2.0, 1e-12));
  CHECK_THAT(std::abs(f.csi[*g->position_of(-20)]), WithinAbs(1.0, 1e-12));
}

TEST_CASE("coarse AGC produces plateaus") {
  const auto g = ht20();
  auto m = clean();
  m.agc = AgcPolicy::step_coarse();
  ScheduleParams p;
  const auto s = make_schedule(ScheduleKind::gain_sweep, p, packets_for(40.0, 50.0), 50.0, g, 1);
  const auto ideal = apply_precoding(flat_channel(g), s);
  const auto out = distort(ideal, m, 1);
  std::set<long> levels;
  std::size_t changes = 0;
  double prev = 0.0;
  for (std::size_t n = 0; n < out.size(); ++n) {
    const double gain_db = 20.0 * std::log10(std::abs(out.frames[n].csi[0]) / std::abs(ideal.packets[n][0]));
    CHECK_THAT(std::remainder(gain_db, 6.0), WithinAbs(0.0, 1e-9));
    levels.insert(std::lround(gain_db));
    if (n && std::abs(gain_db - prev) > 1e-9) ++changes;
    prev = gain_db;
  }
  CHECK(levels.size() >= 3);
  CHECK(changes < out.size() / 20);
}

TEST_CASE("distort is deterministic and drops leave seq gaps") {
  const auto g = ht20();
  auto m = preset("asus1");
  m.drop_prob = 0.1;
  const auto ideal = constant_stream(g, 500);
  const auto a = distort(ideal, m, 9);
  const auto b = distort(ideal, m, 9);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.frames[i].seq == b.frames[i].seq);
    CHECK(a.frames[i].csi == b.frames[i].csi);
  }
  CHECK(a.size() < 500);
  CHECK(a.size() > 400);
  const auto c = distort(ideal, m, 10);
  CHECK(c.frames[0].csi != a.frames[0].csi);
}

TEST_CASE("30-tone receivers report the grouped subset") {
  const auto g = ht20();
  const auto out = distort(constant_stream(g, 3), preset("iwl5300"), 1);
  CHECK(out.grid()->is_grouped30());
  CHECK(out.frames[0].size() == 30);
}

TEST_CASE("AGC is neutral under l1") {
  const auto g = ht20();
  const auto s = make_schedule(ScheduleKind::gain_sweep, {}, 300, 10.0, g, 1);
  const auto ideal = apply_precoding(multipath_channel({Path{}, Path{{0.4, 0.2}, 300e-9}}, g), s);
  auto base = preset("asus1");
  base.noise.sigma = 0.0;
  base.rssi_quant_db = 0.0;
  const auto ref = preprocess::normalize_gain(distort(ideal, base, 4), preprocess::GainOptions{});
  for (const auto& agc : {AgcPolicy::step_coarse(), AgcPolicy::step_fine(), AgcPolicy::random(6.0)}) {
    auto m = base;
    m.agc = agc;
    m.agc.target_db = -3.0;
    const auto out = preprocess::normalize_gain(distort(ideal, m, 4), preprocess::GainOptions{});
    for (std::size_t n = 0; n < out.size(); ++n)
      for (std::size_t k = 0; k < g->size(); ++k)
        CHECK(std::abs(out.frames[n].csi[k] - ref.frames[n].csi[k]) <= 1e-12 * std::abs(ref.frames[n].csi[k]));
  }
}

TEST_CASE("noise covariance converges") {
  const auto g = ht20();
  const std::size_t K = g->size();
  auto m = clean();
  m.noise.sigma = 0.02;
  m.noise.corr = 0.6;
  const std::size_t N = 100'000;
  const auto out = distort(constant_stream(g, N), m, 21);
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(K, K);
  Eigen::VectorXcd e(K);
  for (const auto& f : out.frames) {
    for (std::size_t k = 0; k < K; ++k) e[k] = f.csi[k] - 1.0;
    c.noalias() += e * e.adjoint();
  }
  c /= static_cast<double>(N);
  const Eigen::MatrixXcd sigma = m.noise.covariance_for(K);
  CHECK((c - sigma).norm() / sigma.norm() < 0.05);
}

TEST_CASE("invalid models are rejected") {
  auto m = clean();
  m.smoothing_width = 2;
  CHECK_THROWS_AS(validate_model(m), ConfigError);
  m = clean();
  m.noise.outlier_prob = 1.5;
  CHECK_THROWS_AS(validate_model(m), ConfigError);
  m = clean();
  m.noise.covariance = Eigen::MatrixXcd::Identity(56, 56) * -1.0;
  CHECK_THROWS_AS(validate_model(m), ConfigError);
  CHECK_THROWS_AS(preset("nokia"), ConfigError);
}
