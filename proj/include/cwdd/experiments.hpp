#pragma once

// Protocol drivers: each runs an ensemble of noise trajectories through a
// pulse sequence and returns the averaged readout signal.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cwdd/analysis.hpp"
#include "cwdd/noise.hpp"
#include "cwdd/propagate.hpp"
#include "cwdd/series.hpp"
#include "cwdd/spin.hpp"

namespace cwdd {

enum class NuclearMode {
  automatic,  // equal mixture for ODMR and bare FID, m_I = 0 otherwise
  single,
  mixture,
};

struct NuclearConfig {
  NuclearMode mode = NuclearMode::automatic;
  int m_I = 0;

  // (m_I, weight) pairs; `mixture_default` resolves the automatic mode.
  std::vector<std::pair<int, double>> projections(bool mixture_default) const;
};

struct DriveConfig {
  double delta = 0.4;  // MHz
  double omega = 1.6;  // MHz
};

struct RampConfig {
  double t1 = 50.0;  // us, forward ramp
  double t2 = 50.0;  // us, reverse ramp
};

struct RfConfig {
  double b_rf = 0.06942;        // Gauss; dressed pi time ~4 us at the default drive
  std::optional<double> f_rf;   // MHz; unset = noiseless w_dg
};

// Parameters of the undriven (bare-qubit) MW manipulations.
struct BareConfig {
  double pulse_omega = 1.6;        // Rabi frequency of MW gates and Rabi drive, MHz
  double hard_pulse_omega = 20.0;  // FID pi/2 pulses, MHz
  double fid_detuning = 3.0;       // MHz
};

struct ReadoutConfig {
  double contrast = 0.3;
  std::uint64_t shots = 0;  // 0 = no shot noise
};

struct ScanGrid {
  double start = 0.0;
  double stop = 1.0;
  std::size_t points = 2;

  std::vector<double> values() const;
};

struct ExperimentConfig {
  PhysicalConstants constants;
  NoiseModel noise = default_noise();
  DriveConfig drive;
  RampConfig ramps;
  RfConfig rf;
  NuclearConfig nuclear;
  BareConfig bare;
  ReadoutConfig readout;
  std::size_t trajectories = 2000;
  std::optional<ScanGrid> scan;
  unsigned threads = 0;  // 0 = DSIM_THREADS or hardware concurrency

  void validate() const;
  static NoiseModel default_noise();
};

enum class Mode { bare, cwdd };

// Worker count: explicit value, else DSIM_THREADS, else hardware threads.
unsigned resolve_threads(unsigned requested);

// Weak single-tone probe of |0> <-> |+1> swept over absolute frequency.
TimeSeries run_odmr(const ExperimentConfig& config, std::span<const double> freqs_mhz,
                    double probe_length_us = 1.0);

// Weak RF probe of the protected |g> <-> |d> transition (CWDD on).
TimeSeries run_rf_spectrum(const ExperimentConfig& config, std::span<const double> freqs_mhz,
                           double probe_length_us = 20.0);

// Ramsey pi/2 - tau - pi/2 on |0> <-> |-1> with hard pulses.
TimeSeries run_fid_bare(const ExperimentConfig& config, std::span<const double> delays_us,
                        double mw_detuning_mhz);

// Ramp up, RF pi/2 - tau - RF pi/2 at w_dg + offset, ramp down.
TimeSeries run_fid_cwdd(const ExperimentConfig& config, std::span<const double> delays_us,
                        double rf_offset_mhz);

TimeSeries run_rabi(const ExperimentConfig& config, std::span<const double> durations_us,
                    Mode mode);

struct NotGateTrain {
  TimeSeries indicator;            // F against cumulative time (us)
  std::vector<int> gate_count;
  double pi_time = 0.0;            // us
};

NotGateTrain run_not_gate_train(const ExperimentConfig& config, int n_max, Mode mode);

struct T2PrimePoint {
  double omega = 0.0;
  double t2_prime = 0.0;  // us
  double uncertainty = 0.0;
  bool decayed = false;   // false: the fit did not see a decay inside the window
  TimeSeries coherence;
};

std::vector<double> t2prime_delays(double window_us = 300.0, std::size_t points = 90);

// Decay time of the ensemble fidelity between the noisy and noiseless
// evolution of (|0> + |-1>)/sqrt2 under both resonant tones of amplitude
// Omega.
std::vector<T2PrimePoint> run_t2prime_scan(const ExperimentConfig& config,
                                           std::span<const double> omegas_mhz,
                                           std::span<const double> delays_us = {});

// 1 / (2 gamma_e b_rf |<d|Sz|g>|). ValidationError when the matrix element
// vanishes.
double calibrate_pi_pulse(const ExperimentConfig& config);

// Noiseless full-simulation |<d|psi>|^2 after an RF pulse of length t_pi
// applied to |g> at the configured RF frequency.
double pi_pulse_transfer(const ExperimentConfig& config, double t_pi);

// RF carrier used by the CWDD protocols (configured or noiseless w_dg).
double rf_frequency(const ExperimentConfig& config);

}  // namespace cwdd
