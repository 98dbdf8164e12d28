#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "cwdd/analysis.hpp"
#include "cwdd/dressed.hpp"
#include "cwdd/experiments.hpp"

using namespace cwdd;

namespace {

ExperimentConfig noiseless() {
  ExperimentConfig c;
  c.noise.sigma_b = 0;
  c.trajectories = 1;
  return c;
}

ExperimentConfig small_noisy(std::size_t n = 6) {
  ExperimentConfig c;
  c.noise.sigma_eps = 0.02;
  c.trajectories = n;
  return c;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
  return v;
}

void check_bounded(const TimeSeries& s) {
  for (double m : s.mean) {
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
  }
}

}  // namespace

TEST_CASE("defaults follow the reference drive") {
  const ExperimentConfig c;
  CHECK(c.drive.delta == 0.4);
  CHECK(c.drive.omega == 1.6);
  CHECK(c.ramps.t1 == 50.0);
  CHECK(c.ramps.t2 == 50.0);
  CHECK(c.constants.B_z == 12.0);
  CHECK(c.noise.sigma_b == doctest::Approx(0.08637).epsilon(1e-4));
  CHECK(c.noise.quasi_static());
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config validation") {
  ExperimentConfig c;
  c.trajectories = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.ramps.t1 = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.readout.contrast = 1.5;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.nuclear = {NuclearMode::single, 2};
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("nuclear projections") {
  const NuclearConfig automatic;
  CHECK(automatic.projections(true).size() == 3);
  CHECK(automatic.projections(false) == std::vector<std::pair<int, double>>{{0, 1.0}});
  const NuclearConfig single{NuclearMode::single, -1};
  CHECK(single.projections(true) == std::vector<std::pair<int, double>>{{-1, 1.0}});
  const NuclearConfig mix{NuclearMode::mixture, 0};
  double total = 0;
  for (const auto& [m, w] : mix.projections(false)) total += w;
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("scan grids") {
  CHECK(ScanGrid{0.0, 1.0, 3}.values() == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(ScanGrid{2.0, 5.0, 1}.values() == std::vector<double>{2.0});
  CHECK_THROWS_AS((ScanGrid{0.0, 1.0, 0}.values()), ValidationError);
}

TEST_CASE("worker count resolution") {
  CHECK(resolve_threads(3) == 3);
  setenv("DSIM_THREADS", "5", 1);
  CHECK(resolve_threads(0) == 5);
  setenv("DSIM_THREADS", "junk", 1);
  CHECK(resolve_threads(0) >= 1);
  unsetenv("DSIM_THREADS");
}

TEST_CASE("pi pulse calibration") {
  ExperimentConfig c;
  const double s = rf_matrix_element(0.4, 1.6);
  CHECK(calibrate_pi_pulse(c) == doctest::Approx(1.0 / (2 * 2.802 * c.rf.b_rf * s)));
  CHECK(calibrate_pi_pulse(c) == doctest::Approx(4.0).epsilon(1e-3));

  c.drive.omega = 0;
  CHECK_THROWS_AS(calibrate_pi_pulse(c), ValidationError);
  c = {};
  c.rf.b_rf = 0;
  CHECK_THROWS_AS(calibrate_pi_pulse(c), ValidationError);
}

TEST_CASE("pi pulse transfer: complete for weak RF, limited by d-e leakage at the default") {
  ExperimentConfig c;
  const double s = rf_matrix_element(0.4, 1.6);
  c.rf.b_rf = 1.0 / (2 * 2.802 * 23.0 * s);
  CHECK(pi_pulse_transfer(c, calibrate_pi_pulse(c)) >= 0.999);

  const ExperimentConfig standard;
  const double p = pi_pulse_transfer(standard, calibrate_pi_pulse(standard));
  CHECK(p > 0.9);
  CHECK(p < 0.99);
  CHECK_THROWS_AS(pi_pulse_transfer(standard, 0.0), ValidationError);
}

TEST_CASE("noiseless bare Rabi follows cos^2") {
  const ExperimentConfig c = noiseless();
  const auto t = linspace(0.0, 2.0, 41);
  const TimeSeries s = run_rabi(c, t, Mode::bare);
  CHECK(s.abscissa_name == "duration_us");
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double p1 = std::pow(std::sin(std::numbers::pi * c.bare.pulse_omega * t[k]), 2);
    CHECK(std::abs(s.mean[k] - (1 - c.readout.contrast * p1)) < 1e-10);
    CHECK(s.stderr_[k] == 0.0);
  }
}

TEST_CASE("noiseless bare Ramsey matches the explicit pulse product") {
  ExperimentConfig c = noiseless();
  const double omega = c.bare.hard_pulse_omega, th = 1 / (4 * omega), det = 3.0;
  const std::vector<double> delays{0.0, 0.1, 0.37, 1.0};
  const TimeSeries s = run_fid_bare(c, delays, det);
  // Two-level oracle in {|0>, |-1>} with the hyperfine shift averaged over m_I.
  for (std::size_t k = 0; k < delays.size(); ++k) {
    double expected = 0;
    for (int m : {-1, 0, 1}) {
      Eigen::Matrix2cd hp, hf;
      const double d = det - c.constants.A_hf * m;
      hp << 0, omega / 2, omega / 2, d;
      hf << 0, 0, 0, d;
      const std::complex<double> a(0, -kTwoPi);
      const Eigen::Matrix2cd u = (a * th * hp).exp() * (a * delays[k] * hf).exp() * (a * th * hp).exp();
      expected += (1 - c.readout.contrast * (1 - std::norm(u(0, 0)))) / 3;
    }
    CHECK(std::abs(s.mean[k] - expected) < 1e-10);
  }
}

TEST_CASE("noiseless ODMR shows the hyperfine triplet") {
  ExperimentConfig c = noiseless();
  const double w01 = bare_spectrum(c.constants).w_01, step = 0.05;
  std::vector<double> f;
  for (double x = w01 - 3.5; x <= w01 + 3.5 + 1e-9; x += step) f.push_back(x);
  const auto dips = find_dips(run_odmr(c, f, 1.0));
  REQUIRE(dips.size() == 3);
  for (int m = -1; m <= 1; ++m)
    CHECK(std::abs(dips[static_cast<std::size_t>(m + 1)].center - (w01 + m * c.constants.A_hf)) < step);
}

TEST_CASE("noiseless dressed spectroscopy dips at w_dg") {
  ExperimentConfig c = noiseless();
  const double w = dressed_spectrum(0.4, 1.6, 0.0).w_dg;
  const auto f = linspace(w - 0.15, w + 0.15, 31);
  const auto dips = find_dips(run_rf_spectrum(c, f, 20.0));
  REQUIRE(!dips.empty());
  // Sinc sidelobes of the pi-pulse lineshape are shallower dips.
  const Dip deepest = *std::max_element(dips.begin(), dips.end(),
                                        [](const Dip& a, const Dip& b) { return a.depth < b.depth; });
  CHECK(std::abs(deepest.center - w) < 0.01);
  CHECK(deepest.depth > 0.25);
}

TEST_CASE("noiseless CWDD Ramsey fringes run at the RF offset") {
  ExperimentConfig c = noiseless();
  const auto delays = linspace(0.0, 20.0, 41);
  const TimeSeries s = run_fid_cwdd(c, delays, 0.25);
  const FitResult r = fit_damped_cosine(s);
  CHECK(r.value("f") == doctest::Approx(0.25).epsilon(0.01));
  check_bounded(s);
}

TEST_CASE("NOT trains without noise") {
  const ExperimentConfig c = noiseless();
  const NotGateTrain bare = run_not_gate_train(c, 25, Mode::bare);
  CHECK(bare.pi_time == doctest::Approx(1 / (2 * c.bare.pulse_omega)));
  REQUIRE(bare.gate_count.size() == 26);
  for (double f : bare.indicator.mean) CHECK(std::abs(f - 1.0) < 1e-6);

  const NotGateTrain dressed = run_not_gate_train(c, 6, Mode::cwdd);
  CHECK(dressed.pi_time == doctest::Approx(calibrate_pi_pulse(c)));
  for (double f : dressed.indicator.mean) CHECK(f > 0.93);
  CHECK(dressed.indicator.x[3] == doctest::Approx(3 * dressed.pi_time));

  const NotGateTrain empty = run_not_gate_train(c, 0, Mode::bare);
  CHECK(empty.indicator.mean == std::vector<double>{1.0});
  CHECK_THROWS_AS(run_not_gate_train(c, -1, Mode::bare), ValidationError);
}

TEST_CASE("T2' scan: no decay without noise, Ramsey limit for a weak drive") {
  const auto delays = t2prime_delays(30.0, 40);
  const auto quiet = run_t2prime_scan(noiseless(), std::vector<double>{1.0}, delays);
  REQUIRE(quiet.size() == 1);
  CHECK_FALSE(quiet[0].decayed);
  CHECK(std::isinf(quiet[0].t2_prime));
  for (double f : quiet[0].coherence.mean) CHECK(f == doctest::Approx(1.0).epsilon(1e-9));

  ExperimentConfig c;
  c.trajectories = 400;
  const auto weak = run_t2prime_scan(c, std::vector<double>{0.02}, delays);
  CHECK(weak[0].decayed);
  CHECK(weak[0].t2_prime == doctest::Approx(0.93).epsilon(0.1));
}

TEST_CASE("t2prime delay grid") {
  const auto d = t2prime_delays(300.0, 90);
  CHECK(d.size() == 91);
  CHECK(d.front() == 0.0);
  CHECK(d[1] == doctest::Approx(0.05));
  CHECK(d.back() == doctest::Approx(300.0));
  CHECK_THROWS_AS(t2prime_delays(0.01, 10), ValidationError);
}

TEST_CASE("property: ensembles are bit-identical for any worker count") {
  ExperimentConfig c = small_noisy(7);
  const auto t = linspace(0.0, 6.0, 13);
  c.threads = 1;
  const TimeSeries one = run_rabi(c, t, Mode::cwdd);
  c.threads = 3;
  const TimeSeries three = run_rabi(c, t, Mode::cwdd);
  CHECK(one.mean == three.mean);
  CHECK(one.stderr_ == three.stderr_);

  c.threads = 4;
  const auto delays = linspace(0.0, 2.0, 11);
  const TimeSeries a = run_fid_bare(c, delays, 3.0);
  c.threads = 2;
  const TimeSeries b = run_fid_bare(c, delays, 3.0);
  CHECK(a.mean == b.mean);

  c.noise.master_seed = 99;
  CHECK(run_fid_bare(c, delays, 3.0).mean != a.mean);
}

TEST_CASE("property: every signal lies in [0, 1], with or without shot noise") {
  ExperimentConfig c = small_noisy(4);
  const auto t = linspace(0.0, 3.0, 16);
  for (std::uint64_t shots : {0ull, 50ull}) {
    c.readout.shots = shots;
    check_bounded(run_rabi(c, t, Mode::bare));
    check_bounded(run_fid_bare(c, t, 3.0));
    check_bounded(run_odmr(c, linspace(2900, 2907, 15), 1.0));
  }
}

TEST_CASE("shot noise widens the error bars") {
  ExperimentConfig c = small_noisy(4);
  const auto t = linspace(0.0, 1.0, 5);
  const TimeSeries clean = run_rabi(c, t, Mode::bare);
  c.readout.shots = 100;
  const TimeSeries noisy = run_rabi(c, t, Mode::bare);
  for (std::size_t k = 0; k < t.size(); ++k) CHECK(noisy.stderr_[k] > clean.stderr_[k]);
}

TEST_CASE("grid errors") {
  const ExperimentConfig c = noiseless();
  const std::vector<double> empty;
  const std::vector<double> backwards{1.0, 0.5};
  CHECK_THROWS_AS(run_rabi(c, empty, Mode::bare), ValidationError);
  CHECK_THROWS_AS(run_fid_bare(c, backwards, 3.0), ValidationError);
  CHECK_THROWS_AS(run_fid_cwdd(c, std::vector<double>{-1.0, 1.0}, 0.2), ValidationError);
  CHECK_THROWS_AS(run_odmr(c, std::vector<double>{2900.0}, 0.0), ValidationError);
  CHECK_THROWS_AS(run_odmr(c, empty, 1.0), ValidationError);
  CHECK_THROWS_AS(run_t2prime_scan(c, empty), ValidationError);
  CHECK_THROWS_AS(run_t2prime_scan(c, std::vector<double>{-1.0}), ValidationError);
}
