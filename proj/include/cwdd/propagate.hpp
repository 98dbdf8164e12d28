#pragma once

// Piecewise-constant Schroedinger propagation of the spin-1 state through
// pulse sequences written in the doubly rotating frame of the two MW tones.

#include <cstdint>
#include <optional>
#include <vector>

#include "cwdd/noise.hpp"
#include "cwdd/spin.hpp"

namespace cwdd {

// Linear amplitude ramp of one MW tone across a segment.
struct MwTone {
  double omega_start = 0.0;  // MHz
  double omega_end = 0.0;    // MHz
  double phase = 0.0;        // rad

  double omega_at(double fraction) const {
    return omega_start + (omega_end - omega_start) * fraction;
  }
};

// Oscillating axial RF field gamma_e * b_rf * cos(2 pi f_rf t + phase) Sz.
struct RfDrive {
  double b_rf = 0.0;   // Gauss
  double f_rf = 0.0;   // MHz
  double phase = 0.0;  // rad
};

struct PulseSegment {
  double duration = 0.0;      // us
  std::optional<MwTone> mw1;  // |0> <-> |+1>
  std::optional<MwTone> mw2;  // |0> <-> |-1>
  std::optional<RfDrive> rf;
};

// Rotating frame of the sequence: each |iota> level sits at delta_iota
// (tone frequency = b = 0, m_I = 0 transition frequency - delta_iota).
// Fixed for the whole sequence so that segments share one frame.
struct Frame {
  double delta_plus = 0.0;
  double delta_minus = 0.0;
};

struct PulseSequence {
  std::vector<PulseSegment> segments;
  Frame frame;
  double dt_max = 0.0;   // us; 0 selects 0.01 us with RF and 0.1 us without
  double t_start = 0.0;  // absolute time of the first segment (RF phase and noise clock)

  double duration() const;
  void validate() const;
};

// Environment seen by the sequence: constants, nuclear projection and one
// noise realisation.
struct Environment {
  PhysicalConstants constants;
  int m_I = 0;
  FieldTrajectory noise = quiet_trajectory(0.0);
};

struct Step {
  double t_start = 0.0;
  double dt = 0.0;
  Operator H = Operator::Zero();  // effective Hamiltonian of the step, MHz
  int segment = 0;
  double omega_plus_mid = 0.0;    // drive amplitudes at the step midpoint, MHz
  double omega_minus_mid = 0.0;
};

using Schedule = std::vector<Step>;

inline constexpr double kDefaultDt = 0.1;
inline constexpr double kDefaultDtRf = 0.01;

// Piecewise-constant schedule. Each step carries the fourth-order Magnus
// generator built from two Gauss-Legendre samples of H(t), so a step with
// time-independent H reduces to that H exactly.
Schedule compile_sequence(const PulseSequence& sequence, const Environment& env);

// exp(-2 pi i H dt) through the Hermitian eigendecomposition of H.
Operator step_propagator(const Operator& h, double dt);

State evolve(const State& initial, const Schedule& schedule);

// State at every segment boundary: element 0 is `initial`, element k the
// state after segment k-1.
std::vector<State> evolve_segments(const State& initial, const Schedule& schedule,
                                   std::size_t segment_count);

// Full time-ordered propagator of the schedule.
Operator propagator(const Schedule& schedule);

// Linear ramps of both tones (|0> -> |g>) or back.
PulseSegment ramp_segment(double omega_from, double omega_to, double duration);
PulseSegment hold_segment(double omega, double duration, std::optional<RfDrive> rf = {});

struct PreparedState {
  State state;
  double fidelity = 0.0;  // |<g|psi>|^2 at omega_final
};

// Noiseless linear ramp 0 -> omega_final at fixed delta starting from |0>.
PreparedState adiabatic_prepare(double delta, double omega_final, double t_ramp,
                                const PhysicalConstants& constants = {},
                                double dt_max = kDefaultDt);

struct ReadoutContext {
  double contrast = 0.3;
  // Propagator of the reverse ramp appended before projection (CWDD
  // sequences); absent for bare sequences.
  std::optional<Operator> reverse_ramp;
};

// Contrast-mapped |0> population: 1 - C (1 - p0).
double readout_map(const State& final_state, const ReadoutContext& context);
double contrast_signal(double p0, double contrast);

// Poisson photon-shot sample of a mean signal with N repetitions.
double shot_noised(double signal, std::uint64_t repetitions, std::uint64_t seed);

}  // namespace cwdd
