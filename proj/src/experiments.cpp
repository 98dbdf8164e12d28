#include "cwdd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>

#include "cwdd/dressed.hpp"
#include "ensemble.hpp"

namespace cwdd {

namespace {

constexpr std::uint64_t kShotStream = 2;

void require_sorted(std::span<const double> v, const char* what) {
  if (v.empty()) throw ValidationError(std::string(what) + ": empty grid");
  if (v.front() < 0) throw ValidationError(std::string(what) + ": negative entry");
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) throw ValidationError(std::string(what) + ": grid must increase");
}

FieldTrajectory draw_noise(const ExperimentConfig& c, double duration, std::size_t index) {
  const NoiseModel& m = c.noise;
  const bool frozen = m.quasi_static() || m.sigma_b == 0.0;
  const double dt = frozen ? duration : std::min(0.05, m.tau_c / 20.0);
  return sample_field_trajectory(m, duration, dt, index);
}

Environment environment(const ExperimentConfig& c, FieldTrajectory noise, int m_I) {
  Environment env;
  env.constants = c.constants;
  env.m_I = m_I;
  env.noise = std::move(noise);
  return env;
}

void apply_shot_noise(const ExperimentConfig& c, TimeSeries& s) {
  if (c.readout.shots == 0) return;
  const double n = static_cast<double>(c.readout.shots);
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double mean = s.mean[k];
    s.mean[k] = std::clamp(
        shot_noised(mean, c.readout.shots, trajectory_seed(c.noise.master_seed, k, kShotStream)),
        0.0, 1.0);
    s.stderr_[k] = std::sqrt(s.stderr_[k] * s.stderr_[k] + std::max(mean, 0.0) / n);
  }
}

TimeSeries finish(const ExperimentConfig& c, std::string abscissa, std::span<const double> x,
                  const std::vector<std::vector<double>>& rows) {
  TimeSeries s = detail::aggregate(std::move(abscissa), {x.begin(), x.end()}, rows);
  apply_shot_noise(c, s);
  return s;
}

// Increments between consecutive grid points as hold-type segments; a
// leading zero maps to the initial state.
std::vector<double> increments(std::span<const double> grid) {
  std::vector<double> out;
  double prev = 0.0;
  for (double g : grid) {
    if (g > prev) out.push_back(g - prev);
    prev = g;
  }
  return out;
}

// Index into evolve_segments output for each grid point.
std::vector<std::size_t> boundary_index(std::span<const double> grid) {
  std::vector<std::size_t> out;
  std::size_t k = 0;
  double prev = 0.0;
  for (double g : grid) {
    if (g > prev) ++k;
    out.push_back(k);
    prev = g;
  }
  return out;
}

double p0(const State& psi) { return std::norm(psi(kZero)) / psi.squaredNorm(); }

// Ramp-up / hold / ramp-down building blocks of the CWDD protocols.
struct CwddProtocol {
  const ExperimentConfig& c;
  double f_rf;

  PulseSequence sequence(double t_start) const {
    PulseSequence seq;
    seq.frame = {c.drive.delta, c.drive.delta};
    seq.t_start = t_start;
    return seq;
  }

  State prepare(const Environment& env) const {
    PulseSequence seq = sequence(0.0);
    seq.segments.push_back(ramp_segment(0.0, c.drive.omega, c.ramps.t1));
    return evolve(basis_state(kZero), compile_sequence(seq, env));
  }

  Operator unmap(const Environment& env, double t_start) const {
    PulseSequence seq = sequence(t_start);
    seq.segments.push_back(ramp_segment(c.drive.omega, 0.0, c.ramps.t2));
    return propagator(compile_sequence(seq, env));
  }

  PulseSegment hold(double duration, double b_rf, double f) const {
    if (b_rf == 0.0) return hold_segment(c.drive.omega, duration);
    return hold_segment(c.drive.omega, duration, RfDrive{b_rf, f, 0.0});
  }

  State run(const State& psi, const Environment& env, double t_start,
            std::vector<PulseSegment> segments) const {
    PulseSequence seq = sequence(t_start);
    seq.segments = std::move(segments);
    return evolve(psi, compile_sequence(seq, env));
  }
};

// Reverse-ramp propagators keyed by start time; quasi-static noise makes
// them identical, so one is computed and reused.
class Unmapper {
 public:
  Unmapper(const CwddProtocol& p, const Environment& env) : p_(p), env_(env) {}
  const Operator& at(double t_start) {
    if (!cached_ || (!env_.noise.constant && t_start != t_cached_)) {
      cached_ = p_.unmap(env_, t_start);
      t_cached_ = t_start;
    }
    return *cached_;
  }

 private:
  const CwddProtocol& p_;
  const Environment& env_;
  std::optional<Operator> cached_;
  double t_cached_ = 0.0;
};

}  // namespace

std::vector<std::pair<int, double>> NuclearConfig::projections(bool mixture_default) const {
  const bool mix = mode == NuclearMode::mixture || (mode == NuclearMode::automatic && mixture_default);
  if (mix) return {{-1, 1.0 / 3}, {0, 1.0 / 3}, {1, 1.0 / 3}};
  return {{mode == NuclearMode::single ? m_I : 0, 1.0}};
}

std::vector<double> ScanGrid::values() const {
  if (points == 0) throw ValidationError("scan: points must be >= 1");
  if (points == 1) return {start};
  std::vector<double> v(points);
  for (std::size_t k = 0; k < points; ++k)
    v[k] = start + (stop - start) * static_cast<double>(k) / static_cast<double>(points - 1);
  return v;
}

NoiseModel ExperimentConfig::default_noise() {
  NoiseModel m;
  m.sigma_b = calibrate_bath(0.93, PhysicalConstants{});
  return m;
}

void ExperimentConfig::validate() const {
  constants.validate();
  noise.validate();
  if (!(drive.delta >= 0)) throw ValidationError("drive: delta must be >= 0");
  if (!(drive.omega >= 0)) throw ValidationError("drive: omega must be >= 0");
  if (!(ramps.t1 > 0 && ramps.t2 > 0)) throw ValidationError("ramps: t1 and t2 must be > 0");
  if (!(rf.b_rf >= 0)) throw ValidationError("rf: b_rf must be >= 0");
  if (rf.f_rf && !(*rf.f_rf > 0)) throw ValidationError("rf: f_rf must be > 0");
  if (nuclear.mode == NuclearMode::single && std::abs(nuclear.m_I) > 1)
    throw ValidationError("nuclear: m_I must be -1, 0 or 1");
  if (!(bare.pulse_omega > 0 && bare.hard_pulse_omega > 0))
    throw ValidationError("bare: pulse amplitudes must be > 0");
  if (!(readout.contrast > 0 && readout.contrast <= 1))
    throw ValidationError("readout: contrast must lie in (0, 1]");
  if (trajectories == 0) throw ValidationError("run: trajectories must be >= 1");
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DSIM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

double rf_frequency(const ExperimentConfig& c) {
  if (c.rf.f_rf) return *c.rf.f_rf;
  return dressed_spectrum(c.drive.delta, c.drive.omega, 0.0, c.constants.gamma_e).w_dg;
}

double calibrate_pi_pulse(const ExperimentConfig& c) {
  if (!(c.rf.b_rf > 0)) throw ValidationError("calibrate_pi_pulse: b_rf must be > 0");
  const double s = rf_matrix_element(c.drive.delta, c.drive.omega);
  if (!(s > 1e-9)) throw ValidationError("calibrate_pi_pulse: vanishing RF matrix element");
  return 1.0 / (2.0 * c.constants.gamma_e * c.rf.b_rf * s);
}

double pi_pulse_transfer(const ExperimentConfig& c, double t_pi) {
  if (!(t_pi > 0)) throw ValidationError("pi_pulse_transfer: t_pi must be > 0");
  const DressedSpectrum ds = dressed_spectrum(c.drive.delta, c.drive.omega, 0.0, c.constants.gamma_e);
  const CwddProtocol p{c, rf_frequency(c)};
  const Environment env = environment(c, quiet_trajectory(t_pi), 0);
  const State psi = p.run(ds.g, env, 0.0, {p.hold(t_pi, c.rf.b_rf, p.f_rf)});
  return std::norm(ds.d.dot(psi));
}

TimeSeries run_odmr(const ExperimentConfig& c, std::span<const double> freqs, double probe_length) {
  c.validate();
  if (freqs.empty()) throw ValidationError("run_odmr: empty frequency grid");
  if (!(probe_length > 0)) throw ValidationError("run_odmr: probe length must be > 0");
  const double w01 = bare_spectrum(c.constants).w_01;
  const double omega = 1.0 / (2.0 * probe_length);
  const auto nuclei = c.nuclear.projections(true);

  auto rows = detail::run_rows(c.trajectories, resolve_threads(c.threads), [&](std::size_t i) {
    const FieldTrajectory noise = draw_noise(c, probe_length, i);
    std::vector<double> row(freqs.size(), 0.0);
    for (const auto& [m_I, weight] : nuclei) {
      const Environment env = environment(c, noise, m_I);
      for (std::size_t k = 0; k < freqs.size(); ++k) {
        PulseSequence seq;
        seq.frame = {w01 - freqs[k], 0.0};
        PulseSegment seg;
        seg.duration = probe_length;
        seg.mw1 = MwTone{omega, omega, 0.0};
        seq.segments.push_back(seg);
        const State psi = evolve(basis_state(kZero), compile_sequence(seq, env));
        row[k] += weight * contrast_signal(p0(psi), c.readout.contrast);
      }
    }
    return row;
  });
  return finish(c, "freq_MHz", freqs, rows);
}

TimeSeries run_rf_spectrum(const ExperimentConfig& c, std::span<const double> freqs,
                           double probe_length) {
  c.validate();
  if (freqs.empty()) throw ValidationError("run_rf_spectrum: empty frequency grid");
  if (!(probe_length > 0)) throw ValidationError("run_rf_spectrum: probe length must be > 0");
  const double s = rf_matrix_element(c.drive.delta, c.drive.omega);
  if (!(s > 1e-9)) throw ValidationError("run_rf_spectrum: vanishing RF matrix element");
  const double b_probe = 1.0 / (2.0 * c.constants.gamma_e * s * probe_length);
  const CwddProtocol p{c, 0.0};
  const int m_I = c.nuclear.projections(false).front().first;
  const double total = c.ramps.t1 + probe_length + c.ramps.t2;

  auto rows = detail::run_rows(c.trajectories, resolve_threads(c.threads), [&](std::size_t i) {
    const Environment env = environment(c, draw_noise(c, total, i), m_I);
    const State prepared = p.prepare(env);
    Unmapper unmap(p, env);
    std::vector<double> row(freqs.size());
    for (std::size_t k = 0; k < freqs.size(); ++k) {
      const State psi = p.run(prepared, env, c.ramps.t1, {p.hold(probe_length, b_probe, freqs[k])});
      const State out = unmap.at(c.ramps.t1 + probe_length) * psi;
      row[k] = contrast_signal(p0(out), c.readout.contrast);
    }
    return row;
  });
  return finish(c, "freq_MHz", freqs, rows);
}

TimeSeries run_fid_bare(const ExperimentConfig& c, std::span<const double> delays, double detuning) {
  c.validate();
  require_sorted(delays, "run_fid_bare");
  const double omega = c.bare.hard_pulse_omega;
  const double t_half = 1.0 / (4.0 * omega);
  const auto nuclei = c.nuclear.projections(true);
  const double total = 2 * t_half + delays.back();

  PulseSegment pulse;
  pulse.duration = t_half;
  pulse.mw2 = MwTone{omega, omega, 0.0};

  auto rows = detail::run_rows(c.trajectories, resolve_threads(c.threads), [&](std::size_t i) {
    const FieldTrajectory noise = draw_noise(c, total, i);
    std::vector<double> row(delays.size(), 0.0);
    for (const auto& [m_I, weight] : nuclei) {
      const Environment env = environment(c, noise, m_I);
      for (std::size_t k = 0; k < delays.size(); ++k) {
        PulseSequence seq;
        seq.frame = {0.0, detuning};
        seq.segments.push_back(pulse);
        if (delays[k] > 0) {
          PulseSegment wait;
          wait.duration = delays[k];
          seq.segments.push_back(wait);
        }
        seq.segments.push_back(pulse);
        const State psi = evolve(basis_state(kZero), compile_sequence(seq, env));
        row[k] += weight * contrast_signal(p0(psi), c.readout.contrast);
      }
    }
    return row;
  });
  return finish(c, "delay_us", delays, rows);
}

TimeSeries run_fid_cwdd(const ExperimentConfig& c, std::span<const double> delays, double offset) {
  c.validate();
  require_sorted(delays, "run_fid_cwdd");
  const double t_pi = calibrate_pi_pulse(c);
  const double t_half = t_pi / 2;
  const CwddProtocol p{c, rf_frequency(c) + offset};
  const int m_I = c.nuclear.projections(false).front().first;
  const double t1 = c.ramps.t1;
  const double total = t1 + t_pi + delays.back() + c.ramps.t2;

  auto rows = detail::run_rows(c.trajectories, resolve_threads(c.threads), [&](std::size_t i) {
    const Environment env = environment(c, draw_noise(c, total, i), m_I);
    const State first = p.run(p.prepare(env), env, t1, {p.hold(t_half, c.rf.b_rf, p.f_rf)});
    Unmapper unmap(p, env);
    std::vector<double> row(delays.size());
    State waited = first;
    double waited_until = 0.0;
    for (std::size_t k = 0; k < delays.size(); ++k) {
      // Free evolution is extended incrementally from the previous delay.
      if (delays[k] > waited_until) {
        waited = p.run(waited, env, t1 + t_half + waited_until,
                       {p.hold(delays[k] - waited_until, 0.0, 0.0)});
        waited_until = delays[k];
      }
      const double t2_start = t1 + t_half + delays[k];
      const State second = p.run(waited, env, t2_start, {p.hold(t_half, c.rf.b_rf, p.f_rf)});
      const State out = unmap.at(t2_start + t_half) * second;
      row[k] = contrast_signal(p0(out), c.readout.contrast);
    }
    return row;
  });
  return finish(c, "delay_us", delays, rows);
}

TimeSeries run_rabi(const ExperimentConfig& c, std::span<const double> durations, Mode mode) {
  c.validate();
  require_sorted(durations, "run_rabi");
  const auto steps = increments(durations);
  const auto index = boundary_index(durations);
  const int m_I = c.nuclear.projections(false).front().first;

  if (mode == Mode::bare) {
    const double omega = c.bare.pulse_omega;
    auto rows = detail::run_rows(c.trajectories, resolve_threads(c.threads), [&](std::size_t i) {
      const Environment env = environment(c, draw_noise(c, durations.back(), i), m_I);
      std::vector<State> states(1, basis_state(kZero));
      if (!steps.empty()) {
        PulseSequence seq;
        for (double d : steps) {
          PulseSegment seg;
          seg.duration = d;
          seg.mw2 = MwTone{omega, omega, 0.0};
          seq.segments.push_back(seg);
        }
        states = evolve_segments(basis_state(kZero), compile_sequence(seq, env), steps.size());
      }
      std::vector<double> row(durations.size());
      for (std::size_t k = 0; k < durations.size(); ++k)
        row[k] = contrast_signal(p0(states[index[k]]), c.readout.contrast);
      return row;
    });
    return finish(c, "duration_us", durations, rows);
  }

  if (!(c.rf.b_rf > 0)) throw ValidationError("run_rabi: b_rf must be > 0 for CWDD");
  const CwddProtocol p{c, rf_frequency(c)};
  const double t1 = c.ramps.t1;
  const double total = t1 + durations.back() + c.ramps.t2;
  auto rows = detail::run_rows(c.trajectories, resolve_threads(c.threads), [&](std::size_t i) {
    const Environment env = environment(c, draw_noise(c, total, i), m_I);
    const State prepared = p.prepare(env);
    std::vector<State> states(1, prepared);
    if (!steps.empty()) {
      PulseSequence seq = p.sequence(t1);
      for (double d : steps) seq.segments.push_back(p.hold(d, c.rf.b_rf, p.f_rf));
      states = evolve_segments(prepared, compile_sequence(seq, env), steps.size());
    }
    Unmapper unmap(p, env);
    std::vector<double> row(durations.size());
    for (std::size_t k = 0; k < durations.size(); ++k) {
      const State out = unmap.at(t1 + durations[k]) * states[index[k]];
      row[k] = contrast_signal(p0(out), c.readout.contrast);
    }
    return row;
  });
  return finish(c, "duration_us", durations, rows);
}

NotGateTrain run_not_gate_train(const ExperimentConfig& c, int n_max, Mode mode) {
  c.validate();
  if (n_max < 0) throw ValidationError("run_not_gate_train: n_max must be >= 0");
  const int m_I = c.nuclear.projections(false).front().first;
  const auto n = static_cast<std::size_t>(n_max);

  NotGateTrain train;
  std::vector<double> times(n + 1);
  train.gate_count.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) train.gate_count[k] = static_cast<int>(k);

  if (mode == Mode::bare) {
    const double omega = c.bare.pulse_omega;
    train.pi_time = 1.0 / (2.0 * omega);
    for (std::size_t k = 0; k <= n; ++k) times[k] = train.pi_time * static_cast<double>(k);
    auto rows = detail::run_rows(c.trajectories, resolve_threads(c.threads), [&](std::size_t i) {
      const Environment env = environment(c, draw_noise(c, std::max(times.back(), train.pi_time), i), m_I);
      std::vector<State> states(1, basis_state(kZero));
      if (n > 0) {
        PulseSequence seq;
        PulseSegment seg;
        seg.duration = train.pi_time;
        seg.mw2 = MwTone{omega, omega, 0.0};
        seq.segments.assign(n, seg);
        states = evolve_segments(basis_state(kZero), compile_sequence(seq, env), n);
      }
      std::vector<double> row(n + 1);
      for (std::size_t k = 0; k <= n; ++k)
        row[k] = std::norm(states[k](k % 2 == 0 ? kZero : kMinus));
      return row;
    });
    train.indicator = detail::aggregate("t_us", times, rows);
    return train;
  }

  train.pi_time = calibrate_pi_pulse(c);
  for (std::size_t k = 0; k <= n; ++k) times[k] = train.pi_time * static_cast<double>(k);
  const CwddProtocol p{c, rf_frequency(c)};
  const DressedSpectrum reference =
      dressed_spectrum(c.drive.delta, c.drive.omega, 0.0, c.constants.gamma_e);
  const double t1 = c.ramps.t1;

  auto rows = detail::run_rows(c.trajectories, resolve_threads(c.threads), [&](std::size_t i) {
    const Environment env = environment(c, draw_noise(c, t1 + times.back() + train.pi_time, i), m_I);
    const State prepared = p.prepare(env);
    std::vector<State> states(1, prepared);
    if (n > 0) {
      PulseSequence seq = p.sequence(t1);
      seq.segments.assign(n, p.hold(train.pi_time, c.rf.b_rf, p.f_rf));
      states = evolve_segments(prepared, compile_sequence(seq, env), n);
    }
    const double omega = env.noise.eps * c.drive.omega;
    std::vector<double> row(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
      // Target: this trajectory's own dressed state at the gate boundary.
      const double shift = c.constants.gamma_e * env.noise.at(t1 + times[k]) + c.constants.A_hf * m_I;
      const Operator h = frame_hamiltonian(c.drive.delta, c.drive.delta, Tone<double>{omega, 0.0},
                                           Tone<double>{omega, 0.0}, shift);
      const DressedSpectrum local = label_by_overlap(h, reference);
      row[k] = std::norm((k % 2 == 0 ? local.g : local.d).dot(states[k]));
    }
    return row;
  });
  train.indicator = detail::aggregate("t_us", times, rows);
  return train;
}

std::vector<double> t2prime_delays(double window, std::size_t points) {
  if (!(window > 0.05)) throw ValidationError("t2prime_delays: window must exceed 0.05 us");
  if (points < 2) throw ValidationError("t2prime_delays: needs at least 2 points");
  std::vector<double> out{0.0};
  const double lo = std::log(0.05), hi = std::log(window);
  for (std::size_t k = 0; k < points; ++k)
    out.push_back(std::exp(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1)));
  return out;
}

namespace {

// Gaussian fit seeded at the 1/e crossing of the decay; the default seeds
// assume uniform sampling and miss short decays on a log grid.
FitResult fit_coherence(const TimeSeries& s) {
  const double b = s.mean.back();
  const double a = s.mean.front() - b;
  double t_seed = s.x.back();
  for (std::size_t k = 1; k < s.size(); ++k) {
    if (s.mean[k] - b < a / std::exp(1.0)) {
      t_seed = s.x[k];
      break;
    }
  }
  FitResult best;
  double best_rms = std::numeric_limits<double>::infinity();
  for (double scale : {0.5, 1.0, 2.0}) {
    Eigen::VectorXd start(3);
    start << a, t_seed * scale, b;
    FitResult r = levenberg_marquardt(gaussian_decay_model(), s.x, s.mean, start);
    if (r.residual_rms < best_rms) {
      best_rms = r.residual_rms;
      best = std::move(r);
    }
  }
  best.values(1) = std::abs(best.values(1));
  return best;
}

}  // namespace

std::vector<T2PrimePoint> run_t2prime_scan(const ExperimentConfig& c, std::span<const double> omegas,
                                           std::span<const double> delays_in) {
  c.validate();
  if (omegas.empty()) throw ValidationError("run_t2prime_scan: empty omega grid");
  for (double w : omegas)
    if (!(w >= 0)) throw ValidationError("run_t2prime_scan: omega must be >= 0");
  const std::vector<double> default_delays = delays_in.empty() ? t2prime_delays() : std::vector<double>{};
  const std::span<const double> delays = delays_in.empty() ? std::span<const double>(default_delays) : delays_in;
  require_sorted(delays, "run_t2prime_scan");
  const auto steps = increments(delays);
  const auto index = boundary_index(delays);
  const auto nuclei = c.nuclear.projections(false);
  const State initial = (basis_state(kZero) + basis_state(kMinus)) / std::sqrt(2.0);
  const double window = delays.back();

  auto segments_for = [&](double omega) {
    PulseSequence seq;
    for (double d : steps) seq.segments.push_back(hold_segment(omega, d));
    return seq;
  };
  auto states_for = [&](double omega, const Environment& env) {
    if (steps.empty()) return std::vector<State>(1, initial);
    return evolve_segments(initial, compile_sequence(segments_for(omega), env), steps.size());
  };

  std::vector<T2PrimePoint> out;
  for (double omega : omegas) {
    const std::vector<State> ideal = states_for(omega, environment(c, quiet_trajectory(window), 0));
    auto rows = detail::run_rows(c.trajectories, resolve_threads(c.threads), [&](std::size_t i) {
      const FieldTrajectory noise = draw_noise(c, std::max(window, 1e-3), i);
      std::vector<double> row(delays.size(), 0.0);
      for (const auto& [m_I, weight] : nuclei) {
        const std::vector<State> noisy = states_for(omega, environment(c, noise, m_I));
        for (std::size_t k = 0; k < delays.size(); ++k)
          row[k] += weight * std::norm(ideal[index[k]].dot(noisy[index[k]]));
      }
      return row;
    });
    T2PrimePoint point;
    point.omega = omega;
    point.coherence = detail::aggregate("delay_us", {delays.begin(), delays.end()}, rows);
    try {
      const FitResult fit = fit_coherence(point.coherence);
      point.t2_prime = fit.value("T2");
      point.uncertainty = fit.uncertainty("T2");
      point.decayed = fit.converged && fit.value("A") > 0.01 && point.t2_prime < window;
    } catch (const FitError&) {
      point.decayed = false;
    }
    if (!point.decayed) point.t2_prime = std::numeric_limits<double>::infinity();
    out.push_back(std::move(point));
  }
  return out;
}

}  // namespace cwdd
