#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "cwdd/spin.hpp"

namespace cwdd {

// Dephasing environment: an effective axial bath field b(t) and a
// quasi-static fractional error on the microwave amplitude.
struct NoiseModel {
  double sigma_b = 0.0;                                     // Gauss rms
  double tau_c = std::numeric_limits<double>::infinity();  // us; inf = quasi-static
  double sigma_eps = 0.0;                                   // fractional rms
  std::uint64_t master_seed = 1;

  bool quasi_static() const { return tau_c == std::numeric_limits<double>::infinity(); }
  void validate() const;
};

// One realisation of b(t) on a uniform grid plus the MW amplitude factor
// (1 + eps) for the same trajectory.
struct FieldTrajectory {
  std::vector<double> grid;    // us
  std::vector<double> values;  // Gauss
  double eps = 1.0;
  bool constant = true;        // b identical at every grid point

  // Linear interpolation; throws ValidationError outside the grid.
  double at(double t) const;
  double duration() const { return grid.empty() ? 0.0 : grid.back(); }
};

// A noiseless trajectory covering [0, duration].
FieldTrajectory quiet_trajectory(double duration);

// Quasi-static trajectory with fixed b and amplitude factor.
FieldTrajectory static_trajectory(double duration, double b, double amplitude_factor = 1.0);

// sigma_b whose quasi-static Ramsey envelope is exp[-(t/T2*)^2].
double calibrate_bath(double t2_star_target, const PhysicalConstants& c);

std::uint64_t splitmix64(std::uint64_t x);

// Deterministic per-trajectory seed; distinct streams decorrelate the bath
// draw from the amplitude draw of the same trajectory.
std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t index,
                              std::uint64_t stream);

FieldTrajectory sample_field_trajectory(const NoiseModel& model, double duration, double dt,
                                        std::uint64_t trajectory_index);

double sample_mw_amplitude_factor(const NoiseModel& model, std::uint64_t trajectory_index);

}  // namespace cwdd
