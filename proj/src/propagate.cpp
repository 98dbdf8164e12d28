#include "cwdd/propagate.hpp"

#include <cmath>
#include <random>

#include "cwdd/dressed.hpp"

namespace cwdd {

namespace {

// Gauss-Legendre nodes on [0, 1].
const double kNode1 = 0.5 - std::sqrt(3.0) / 6.0;
const double kNode2 = 0.5 + std::sqrt(3.0) / 6.0;
const double kMagnusWeight = std::numbers::pi * std::sqrt(3.0) / 6.0;

double segment_dt(const PulseSequence& seq, const PulseSegment& seg) {
  if (!seg.rf) return seq.dt_max > 0 ? seq.dt_max : kDefaultDt;
  const double bound = seg.rf->f_rf > 0 ? 1.0 / (20.0 * seg.rf->f_rf) : kDefaultDtRf;
  if (seq.dt_max > 0) {
    if (seq.dt_max > bound * (1 + 1e-12))
      throw ResolutionError("compile_sequence: dt_max exceeds 1/(20 f_rf) for an RF segment");
    return seq.dt_max;
  }
  return std::min(kDefaultDtRf, bound);
}

}  // namespace

double PulseSequence::duration() const {
  double total = 0;
  for (const auto& s : segments) total += s.duration;
  return total;
}

void PulseSequence::validate() const {
  if (segments.empty()) throw ValidationError("PulseSequence: no segments");
  if (dt_max < 0) throw ValidationError("PulseSequence: dt_max must be >= 0");
  for (const auto& s : segments) {
    if (!(s.duration > 0)) throw ValidationError("PulseSegment: duration must be > 0");
    for (const auto* tone : {&s.mw1, &s.mw2}) {
      if (*tone && ((*tone)->omega_start < 0 || (*tone)->omega_end < 0))
        throw ValidationError("PulseSegment: omega must be >= 0");
    }
    if (s.rf && s.rf->f_rf < 0) throw ValidationError("PulseSegment: f_rf must be >= 0");
  }
}

Schedule compile_sequence(const PulseSequence& seq, const Environment& env) {
  seq.validate();
  const double end = seq.t_start + seq.duration();
  if (!env.noise.constant && env.noise.duration() < end * (1 - 1e-12))
    throw ValidationError("compile_sequence: noise trajectory does not cover the sequence");

  const PhysicalConstants& c = env.constants;
  const Operator sz = spin_z();
  const double hyperfine = c.A_hf * env.m_I;
  const double amplitude = env.noise.eps;

  Schedule schedule;
  double t0 = seq.t_start;
  for (std::size_t si = 0; si < seq.segments.size(); ++si) {
    const PulseSegment& seg = seq.segments[si];
    const double dt_bound = segment_dt(seq, seg);
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(seg.duration / dt_bound - 1e-9)));
    const double h = seg.duration / static_cast<double>(n);

    auto hamiltonian = [&](std::size_t k, double node, double& om_plus, double& om_minus) {
      const double frac = (static_cast<double>(k) + node) / static_cast<double>(n);
      const double t = t0 + frac * seg.duration;
      om_plus = seg.mw1 ? amplitude * seg.mw1->omega_at(frac) : 0.0;
      om_minus = seg.mw2 ? amplitude * seg.mw2->omega_at(frac) : 0.0;
      const Tone<double> plus{om_plus, seg.mw1 ? seg.mw1->phase : 0.0};
      const Tone<double> minus{om_minus, seg.mw2 ? seg.mw2->phase : 0.0};
      const double shift = c.gamma_e * env.noise.at(t) + hyperfine;
      Operator H = frame_hamiltonian(seq.frame.delta_plus, seq.frame.delta_minus, plus, minus, shift);
      if (seg.rf && seg.rf->b_rf != 0.0)
        H += (c.gamma_e * seg.rf->b_rf * std::cos(kTwoPi * seg.rf->f_rf * t + seg.rf->phase)) * sz;
      return H;
    };

    for (std::size_t k = 0; k < n; ++k) {
      Step step;
      step.t_start = t0 + static_cast<double>(k) * h;
      step.dt = h;
      step.segment = static_cast<int>(si);
      double p1, m1, p2, m2, pm, mm;
      const Operator h1 = hamiltonian(k, kNode1, p1, m1);
      const Operator h2 = hamiltonian(k, kNode2, p2, m2);
      hamiltonian(k, 0.5, pm, mm);
      step.omega_plus_mid = pm;
      step.omega_minus_mid = mm;
      if (h1 == h2) {
        step.H = h1;
      } else {
        const Operator comm = h2 * h1 - h1 * h2;
        step.H = 0.5 * (h1 + h2) - std::complex<double>(0.0, kMagnusWeight * h) * comm;
      }
      schedule.push_back(std::move(step));
    }
    t0 += seg.duration;
  }
  return schedule;
}

Operator step_propagator(const Operator& h, double dt) {
  Eigen::SelfAdjointEigenSolver<Operator> solver(h);
  const Eigen::Vector3d& e = solver.eigenvalues();
  const Operator& v = solver.eigenvectors();
  Eigen::Vector3cd phases;
  for (int k = 0; k < 3; ++k) phases(k) = std::polar(1.0, -kTwoPi * e(k) * dt);
  return v * phases.asDiagonal() * v.adjoint();
}

namespace {

// Applies each step, reusing the last propagator while (H, dt) repeat.
template <typename Visit>
void for_each_step(const Schedule& schedule, Visit&& visit) {
  Operator u = Operator::Identity();
  const Step* cached = nullptr;
  for (const Step& step : schedule) {
    if (!cached || step.dt != cached->dt || step.H != cached->H) {
      u = step_propagator(step.H, step.dt);
      cached = &step;
    }
    visit(step, u);
  }
}

}  // namespace

State evolve(const State& initial, const Schedule& schedule) {
  State psi = initial;
  for_each_step(schedule, [&](const Step&, const Operator& u) { psi = u * psi; });
  return psi;
}

std::vector<State> evolve_segments(const State& initial, const Schedule& schedule,
                                   std::size_t segment_count) {
  std::vector<State> out;
  out.reserve(segment_count + 1);
  out.push_back(initial);
  State psi = initial;
  int current = 0;
  for_each_step(schedule, [&](const Step& step, const Operator& u) {
    while (step.segment > current) {
      out.push_back(psi);
      ++current;
    }
    psi = u * psi;
  });
  while (out.size() < segment_count + 1) out.push_back(psi);
  return out;
}

Operator propagator(const Schedule& schedule) {
  Operator total = Operator::Identity();
  for_each_step(schedule, [&](const Step&, const Operator& u) { total = u * total; });
  return total;
}

PulseSegment ramp_segment(double omega_from, double omega_to, double duration) {
  PulseSegment seg;
  seg.duration = duration;
  seg.mw1 = MwTone{omega_from, omega_to, 0.0};
  seg.mw2 = MwTone{omega_from, omega_to, 0.0};
  return seg;
}

PulseSegment hold_segment(double omega, double duration, std::optional<RfDrive> rf) {
  PulseSegment seg = ramp_segment(omega, omega, duration);
  seg.rf = rf;
  return seg;
}

PreparedState adiabatic_prepare(double delta, double omega_final, double t_ramp,
                                const PhysicalConstants& constants, double dt_max) {
  if (t_ramp < 0) throw ValidationError("adiabatic_prepare: t_ramp must be >= 0");
  if (omega_final < 0) throw ValidationError("adiabatic_prepare: omega_final must be >= 0");
  const State zero = basis_state(kZero);
  if (omega_final == 0.0) return {zero, 1.0};

  State psi = zero;
  if (t_ramp > 0) {
    PulseSequence seq;
    seq.frame = {delta, delta};
    seq.dt_max = dt_max;
    seq.segments.push_back(ramp_segment(0.0, omega_final, t_ramp));
    Environment env;
    env.constants = constants;
    psi = evolve(zero, compile_sequence(seq, env));
  }
  const DressedSpectrum s = dressed_spectrum(delta, omega_final, 0.0, constants.gamma_e);
  return {psi, std::norm(s.g.dot(psi))};
}

double contrast_signal(double p0, double contrast) { return 1.0 - contrast * (1.0 - p0); }

double readout_map(const State& final_state, const ReadoutContext& context) {
  const State mapped = context.reverse_ramp ? State(*context.reverse_ramp * final_state) : final_state;
  const double p0 = std::norm(mapped(kZero)) / mapped.squaredNorm();
  return contrast_signal(p0, context.contrast);
}

double shot_noised(double signal, std::uint64_t repetitions, std::uint64_t seed) {
  if (repetitions == 0) return signal;
  std::mt19937_64 rng(splitmix64(seed));
  std::poisson_distribution<std::uint64_t> poisson(static_cast<double>(repetitions) *
                                                   std::max(signal, 0.0));
  return static_cast<double>(poisson(rng)) / static_cast<double>(repetitions);
}

}  // namespace cwdd
