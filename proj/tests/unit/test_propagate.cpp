#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

#include "cwdd/dressed.hpp"
#include "cwdd/propagate.hpp"
#include "generators.hpp"

using namespace cwdd;

namespace {

Operator oracle_exp(const Operator& h, double t) {
  const Operator a = std::complex<double>(0.0, -kTwoPi * t) * h;
  return a.exp();
}

PulseSegment mw2_pulse(double omega, double duration) {
  PulseSegment s;
  s.duration = duration;
  s.mw2 = MwTone{omega, omega, 0.0};
  return s;
}

Environment quiet(double duration) {
  Environment env;
  env.noise = quiet_trajectory(duration);
  return env;
}

}  // namespace

TEST_CASE("property: step propagator equals the matrix exponential and is unitary") {
  gen::Source g(21);
  for (int i = 0; i < 300; ++i) {
    const Operator h = g.hermitian(g.uniform(0.1, 5.0));
    const double dt = g.uniform(0.001, 1.0);
    const Operator u = step_propagator(h, dt);
    CHECK((u - oracle_exp(h, dt)).norm() < 1e-11);
    CHECK((u.adjoint() * u - Operator::Identity()).norm() < 1e-13);
  }
}

TEST_CASE("property: resonant and detuned Rabi oscillation of one tone") {
  gen::Source g(22);
  for (int i = 0; i < 50; ++i) {
    const double omega = g.uniform(0.2, 5.0), detuning = g.uniform(-2.0, 2.0), t = g.uniform(0.1, 3.0);
    PulseSequence seq;
    seq.frame = {0.0, detuning};
    seq.segments.push_back(mw2_pulse(omega, t));
    const State psi = evolve(basis_state(kZero), compile_sequence(seq, quiet(t)));
    const double w = std::sqrt(omega * omega + detuning * detuning);
    const double expected = omega * omega / (w * w) * std::pow(std::sin(std::numbers::pi * w * t), 2);
    CHECK(std::abs(std::norm(psi(kMinus)) - expected) < 1e-10);
    CHECK(std::norm(psi(kPlus)) < 1e-20);
  }
}

TEST_CASE("constant segments compile to the exact Hamiltonian") {
  PulseSequence seq;
  seq.frame = {0.3, -0.2};
  PulseSegment s = hold_segment(1.2, 2.0);
  seq.segments.push_back(s);
  const Schedule sched = compile_sequence(seq, quiet(2.0));
  CHECK(sched.size() == 20);
  const Operator h = frame_hamiltonian(0.3, -0.2, Tone<double>{1.2, 0}, Tone<double>{1.2, 0}, 0.0);
  for (const Step& st : sched) CHECK((st.H - h).norm() == 0.0);
  const State psi = evolve(basis_state(kZero), sched);
  CHECK((psi - oracle_exp(h, 2.0) * basis_state(kZero)).norm() < 1e-11);
}

TEST_CASE("bath field and hyperfine shift enter as a Zeeman term") {
  PulseSequence seq;
  PulseSegment wait;
  wait.duration = 1.0;
  seq.segments.push_back(wait);
  Environment env;
  env.m_I = -1;
  env.noise = static_trajectory(1.0, 0.05);
  const Schedule sched = compile_sequence(seq, env);
  const double shift = env.constants.gamma_e * 0.05 - env.constants.A_hf;
  CHECK(sched.front().H(kPlus, kPlus).real() == doctest::Approx(shift));
  CHECK(sched.front().H(kMinus, kMinus).real() == doctest::Approx(-shift));
}

TEST_CASE("amplitude noise scales the microwaves but not the RF") {
  PulseSequence seq;
  seq.frame = {0.4, 0.4};
  seq.segments.push_back(hold_segment(1.6, 0.5, RfDrive{0.1, 1.3, 0.2}));
  Environment scaled;
  scaled.noise = static_trajectory(0.5, 0.0, 0.5);
  const Schedule a = compile_sequence(seq, quiet(0.5));
  const Schedule b = compile_sequence(seq, scaled);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(b[k].omega_plus_mid == doctest::Approx(0.5 * a[k].omega_plus_mid));
    CHECK(a[k].H.diagonal().isApprox(b[k].H.diagonal(), 1e-12));
  }
}

TEST_CASE("linear ramps interpolate the tone amplitude") {
  PulseSequence seq;
  seq.dt_max = 0.25;
  seq.segments.push_back(ramp_segment(0.0, 2.0, 1.0));
  const Schedule sched = compile_sequence(seq, quiet(1.0));
  REQUIRE(sched.size() == 4);
  CHECK(sched[0].omega_plus_mid == doctest::Approx(0.25));
  CHECK(sched[3].omega_minus_mid == doctest::Approx(1.75));
}

TEST_CASE("RF segments converge at fourth order in the step") {
  const DressedSpectrum ds = dressed_spectrum(0.4, 1.6, 0.0);
  auto run = [&](double dt) {
    PulseSequence seq;
    seq.frame = {0.4, 0.4};
    seq.dt_max = dt;
    seq.segments.push_back(hold_segment(1.6, 3.0, RfDrive{0.07, ds.w_dg, 0.0}));
    return evolve(ds.g, compile_sequence(seq, quiet(3.0)));
  };
  const State reference = run(0.00125);
  const double e1 = (run(0.02) - reference).norm();
  const double e2 = (run(0.01) - reference).norm();
  CHECK(e2 < 1e-6);
  CHECK(e1 / e2 > 12.0);
  CHECK(e1 / e2 < 20.0);
}

TEST_CASE("compile errors") {
  PulseSequence seq;
  CHECK_THROWS_AS(compile_sequence(seq, quiet(1.0)), ValidationError);

  seq.segments.push_back(mw2_pulse(1.0, 0.0));
  CHECK_THROWS_AS(compile_sequence(seq, quiet(1.0)), ValidationError);

  seq.segments = {mw2_pulse(-1.0, 1.0)};
  CHECK_THROWS_AS(compile_sequence(seq, quiet(1.0)), ValidationError);

  // RF at 2 MHz needs dt <= 0.025 us.
  seq.segments = {hold_segment(1.0, 1.0, RfDrive{0.1, 2.0, 0.0})};
  seq.dt_max = 0.05;
  CHECK_THROWS_AS(compile_sequence(seq, quiet(1.0)), ResolutionError);
  seq.dt_max = 0.025;
  CHECK_NOTHROW(compile_sequence(seq, quiet(1.0)));

  // A time-varying bath must cover the whole sequence.
  NoiseModel m;
  m.sigma_b = 0.1;
  m.tau_c = 1.0;
  Environment env;
  env.noise = sample_field_trajectory(m, 0.5, 0.05, 0);
  seq.dt_max = 0;
  CHECK_THROWS_AS(compile_sequence(seq, env), ValidationError);
}

TEST_CASE("segment boundaries reproduce the states of truncated sequences") {
  PulseSequence seq;
  seq.frame = {0.4, 0.4};
  seq.segments = {ramp_segment(0, 1.6, 2.0), hold_segment(1.6, 1.3, RfDrive{0.1, 1.35, 0.0}),
                  hold_segment(1.6, 0.7)};
  const Environment env = quiet(4.0);
  const auto states = evolve_segments(basis_state(kZero), compile_sequence(seq, env), 3);
  REQUIRE(states.size() == 4);
  CHECK(states[0] == basis_state(kZero));
  PulseSequence partial = seq;
  for (std::size_t k = 1; k <= 3; ++k) {
    partial.segments.assign(seq.segments.begin(), seq.segments.begin() + static_cast<long>(k));
    CHECK((states[k] - evolve(basis_state(kZero), compile_sequence(partial, env))).norm() < 1e-13);
  }
  const Operator u = propagator(compile_sequence(seq, env));
  CHECK((u * basis_state(kZero) - states[3]).norm() < 1e-12);
}

TEST_CASE("norm is conserved over long time-dependent evolutions") {
  PulseSequence seq;
  seq.frame = {0.4, 0.4};
  seq.dt_max = 0.01;
  seq.segments.push_back(hold_segment(1.6, 100.0, RfDrive{0.07, 1.35, 0.0}));
  const State psi = evolve(basis_state(kZero), compile_sequence(seq, quiet(100.0)));
  CHECK(std::abs(psi.norm() - 1.0) < 1e-11);
}

TEST_CASE("adiabatic preparation") {
  double previous = 0.0;
  for (double t : {1.0, 5.0, 10.0, 25.0, 50.0}) {
    const PreparedState p = adiabatic_prepare(0.4, 1.6, t);
    CHECK(p.fidelity > previous);
    previous = p.fidelity;
  }
  CHECK(previous >= 0.99);

  const PreparedState off = adiabatic_prepare(0.4, 0.0, 10.0);
  CHECK(off.fidelity == 1.0);
  CHECK(off.state == basis_state(kZero));

  const PreparedState sudden = adiabatic_prepare(0.4, 1.6, 0.0);
  CHECK(sudden.fidelity == doctest::Approx(std::norm(dressed_spectrum(0.4, 1.6, 0).g(kZero))));

  CHECK_THROWS_AS(adiabatic_prepare(0.4, 1.6, -1.0), ValidationError);
  CHECK_THROWS_AS(adiabatic_prepare(0.4, -1.0, 1.0), ValidationError);
}

TEST_CASE("readout maps |0> population through the contrast") {
  CHECK(contrast_signal(1.0, 0.3) == 1.0);
  CHECK(contrast_signal(0.0, 0.3) == doctest::Approx(0.7));
  ReadoutContext ctx;
  CHECK(readout_map(basis_state(kMinus), ctx) == doctest::Approx(0.7));

  // The reverse ramp is applied before projection.
  Operator swap = Operator::Zero();
  swap(kZero, kMinus) = swap(kMinus, kZero) = swap(kPlus, kPlus) = 1.0;
  ctx.reverse_ramp = swap;
  CHECK(readout_map(basis_state(kMinus), ctx) == doctest::Approx(1.0));
}

TEST_CASE("property: shot noise is unbiased with Poisson variance") {
  CHECK(shot_noised(0.8, 0, 1) == 0.8);
  const std::uint64_t shots = 500;
  const std::size_t n = 4000;
  double sum = 0, sum2 = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    const double v = shot_noised(0.8, shots, i);
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n, var = sum2 / n - mean * mean;
  CHECK(mean == doctest::Approx(0.8).epsilon(0.002));
  CHECK(var == doctest::Approx(0.8 / shots).epsilon(0.08));
}
