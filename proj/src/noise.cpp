#include "cwdd/noise.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cwdd {

namespace {
constexpr std::uint64_t kBathStream = 0;
constexpr std::uint64_t kAmplitudeStream = 1;
constexpr double kAmplitudeFloor = 0.01;
}  // namespace

void NoiseModel::validate() const {
  if (!(sigma_b >= 0)) throw ValidationError("noise: sigma_b must be >= 0");
  if (!(tau_c > 0)) throw ValidationError("noise: tau_c must be > 0 or inf");
  if (!(sigma_eps >= 0 && sigma_eps < 0.5))
    throw ValidationError("noise: sigma_eps must lie in [0, 0.5)");
}

double FieldTrajectory::at(double t) const {
  if (grid.empty()) throw ValidationError("FieldTrajectory: empty grid");
  // A held field has the same value at any time.
  if (constant) return values.front();
  const double slack = 1e-9 * std::max(1.0, grid.back());
  if (t < grid.front() - slack || t > grid.back() + slack)
    throw ValidationError("FieldTrajectory: time outside the sampled grid");
  const auto it = std::upper_bound(grid.begin(), grid.end(), t);
  if (it == grid.begin()) return values.front();
  if (it == grid.end()) return values.back();
  const auto k = static_cast<std::size_t>(it - grid.begin());
  const double w = (t - grid[k - 1]) / (grid[k] - grid[k - 1]);
  return (1 - w) * values[k - 1] + w * values[k];
}

FieldTrajectory static_trajectory(double duration, double b, double amplitude_factor) {
  FieldTrajectory tr;
  tr.grid = {0.0, std::max(duration, 0.0)};
  if (tr.grid[1] == 0.0) tr.grid.resize(1);
  tr.values.assign(tr.grid.size(), b);
  tr.eps = amplitude_factor;
  tr.constant = true;
  return tr;
}

FieldTrajectory quiet_trajectory(double duration) { return static_trajectory(duration, 0.0); }

double calibrate_bath(double t2_star_target, const PhysicalConstants& c) {
  if (!(t2_star_target > 0)) throw ValidationError("calibrate_bath: T2* must be > 0");
  if (std::isinf(t2_star_target)) return 0.0;
  return std::sqrt(2.0) / (kTwoPi * c.gamma_e * t2_star_target);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t index,
                              std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(master_seed) ^ index) + stream);
}

FieldTrajectory sample_field_trajectory(const NoiseModel& model, double duration, double dt,
                                        std::uint64_t trajectory_index) {
  if (!(duration > 0)) throw ValidationError("sample_field_trajectory: duration must be > 0");
  if (!(dt > 0)) throw ValidationError("sample_field_trajectory: dt must be > 0");
  model.validate();

  const auto n = static_cast<std::size_t>(std::ceil(duration / dt - 1e-12));
  FieldTrajectory tr;
  tr.grid.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) tr.grid[k] = static_cast<double>(k) * dt;
  tr.values.resize(n + 1);
  tr.eps = sample_mw_amplitude_factor(model, trajectory_index);

  std::mt19937_64 rng(trajectory_seed(model.master_seed, trajectory_index, kBathStream));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double b0 = model.sigma_b * normal(rng);

  if (model.quasi_static() || model.sigma_b == 0.0) {
    std::fill(tr.values.begin(), tr.values.end(), b0);
    tr.constant = true;
    return tr;
  }

  // Exact Ornstein-Uhlenbeck update on the grid.
  const double decay = std::exp(-dt / model.tau_c);
  const double kick = model.sigma_b * std::sqrt(1.0 - decay * decay);
  tr.values[0] = b0;
  for (std::size_t k = 1; k <= n; ++k) tr.values[k] = tr.values[k - 1] * decay + kick * normal(rng);
  tr.constant = false;
  return tr;
}

double sample_mw_amplitude_factor(const NoiseModel& model, std::uint64_t trajectory_index) {
  if (model.sigma_eps == 0.0) return 1.0;
  std::mt19937_64 rng(trajectory_seed(model.master_seed, trajectory_index, kAmplitudeStream));
  std::normal_distribution<double> normal(0.0, 1.0);
  return std::max(kAmplitudeFloor, 1.0 + model.sigma_eps * normal(rng));
}

}  // namespace cwdd
