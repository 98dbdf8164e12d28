#pragma once

// Least-squares fits of the decay models used for T2*, T2' and the
// NOT-train indicator, plus dip and tone extraction from spectra.

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cwdd/series.hpp"

namespace cwdd {

struct FitResult {
  std::string model;
  std::vector<std::string> names;
  Eigen::VectorXd values;
  Eigen::VectorXd uncertainties;  // 1 sigma
  double residual_rms = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> cost_history;  // cost after every accepted step

  double value(std::string_view name) const;
  double uncertainty(std::string_view name) const;
};

struct CurveModel {
  std::string name;
  std::vector<std::string> parameters;
  std::function<double(double, const Eigen::VectorXd&)> eval;
};

struct LmOptions {
  int max_iterations = 200;
  double cost_tolerance = 1e-14;  // relative cost change
  double step_tolerance = 1e-12;  // relative parameter change
};

// Damped Gauss-Newton (Levenberg-Marquardt, Nielsen damping update) with a
// central-difference Jacobian. Uncertainties from s^2 (J^T J)^-1 at the
// optimum with s^2 = RSS / (n - p).
FitResult levenberg_marquardt(const CurveModel& model, std::span<const double> x,
                              std::span<const double> y, const Eigen::VectorXd& initial,
                              const LmOptions& options = {});

// A exp[-(t/T2)^2] + B
CurveModel gaussian_decay_model();
// A exp[-(t/T2)^2] cos(2 pi f t + phi) + B
CurveModel damped_cosine_model();
// A exp[-(t'/T2)^2] (1/3) sum_k cos(2 pi (f + k split) t' + phi) + B, k = -1, 0, 1,
// t' = t + t0. The shared offset t0 absorbs the phase finite pulses add
// to every tone in proportion to its frequency.
CurveModel three_tone_model();

// Fits the Gaussian decay envelope. Oscillating inputs are fitted with the
// damped-cosine (one tone) or three-tone (beats) model; T2 and A then refer
// to the common envelope. FitError on constant input or < 6 points.
FitResult fit_gaussian_decay(const TimeSeries& series);

// Frequency seeded from the strongest spectral peak. FitError when two
// peaks are within 10% power, or fewer than 8 points.
FitResult fit_damped_cosine(const TimeSeries& series);

FitResult fit_three_tone(const TimeSeries& series);

struct SpectralPeak {
  double frequency = 0.0;  // cycles per abscissa unit
  double magnitude = 0.0;
};

// Local maxima of the zero-padded discrete spectrum of y - offset (offset =
// mean of the trailing 20% of points), strongest first. Peaks below
// `relative_threshold` of the strongest bin, and below one cycle per span,
// are dropped. Requires uniform spacing.
std::vector<SpectralPeak> spectral_peaks(std::span<const double> x, std::span<const double> y,
                                         double relative_threshold = 0.3);

struct Dip {
  double center = 0.0;
  double depth = 0.0;  // baseline - minimum
};

// Local minima below median - 3 stderr, refined with a three-point parabola.
std::vector<Dip> find_dips(const TimeSeries& spectrum);

}  // namespace cwdd
