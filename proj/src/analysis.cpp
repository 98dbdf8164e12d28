#include "cwdd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>

namespace cwdd {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::VectorXd params(std::initializer_list<double> v) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p(i++) = x;
  return p;
}

double span_of(std::span<const double> x) { return x.back() - x.front(); }

double tail_mean(std::span<const double> y) {
  const std::size_t n = std::max<std::size_t>(1, y.size() / 5);
  return std::accumulate(y.end() - static_cast<std::ptrdiff_t>(n), y.end(), 0.0) /
         static_cast<double>(n);
}

double wrap_phase(double phi) {
  phi = std::fmod(phi, 2 * kPi);
  if (phi > kPi) phi -= 2 * kPi;
  if (phi <= -kPi) phi += 2 * kPi;
  return phi;
}

void require_points(const TimeSeries& s, std::size_t n, const char* who) {
  s.validate();
  if (s.size() < n)
    throw FitError(std::string(who) + ": needs at least " + std::to_string(n) + " points");
  const auto [lo, hi] = std::minmax_element(s.mean.begin(), s.mean.end());
  if (*hi - *lo <= 1e-12 * std::max(1.0, std::abs(*hi)))
    throw FitError(std::string(who) + ": degenerate (constant) data");
}

// Lowest-cost converged fit among the candidate starting points.
FitResult best_of(const CurveModel& model, const TimeSeries& s,
                  const std::vector<Eigen::VectorXd>& starts) {
  FitResult best;
  double best_cost = std::numeric_limits<double>::infinity();
  bool have = false;
  for (const auto& p0 : starts) {
    FitResult r = levenberg_marquardt(model, s.x, s.mean, p0);
    const double cost = r.residual_rms;
    const bool better = !have || (r.converged && !best.converged) ||
                        (r.converged == best.converged && cost < best_cost);
    if (std::isfinite(cost) && better) {
      best = std::move(r);
      best_cost = cost;
      have = true;
    }
  }
  if (!have) throw FitError(model.name + ": no finite fit from any starting point");
  return best;
}

// Canonical sign conventions: A >= 0, T2 >= 0, phi in (-pi, pi].
void canonicalize(FitResult& r) {
  auto idx = [&](std::string_view n) -> Eigen::Index {
    for (std::size_t i = 0; i < r.names.size(); ++i)
      if (r.names[i] == n) return static_cast<Eigen::Index>(i);
    return -1;
  };
  const auto iT = idx("T2"), iA = idx("A"), iphi = idx("phi"), isplit = idx("split");
  if (iT >= 0) r.values(iT) = std::abs(r.values(iT));
  if (isplit >= 0) r.values(isplit) = std::abs(r.values(isplit));
  if (iA >= 0 && r.values(iA) < 0) {
    r.values(iA) = -r.values(iA);
    if (iphi >= 0) r.values(iphi) += kPi;
  }
  if (iphi >= 0) r.values(iphi) = wrap_phase(r.values(iphi));
}

}  // namespace

double FitResult::value(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return values(static_cast<Eigen::Index>(i));
  throw FitError("FitResult: no parameter " + std::string(name));
}

double FitResult::uncertainty(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return uncertainties(static_cast<Eigen::Index>(i));
  throw FitError("FitResult: no parameter " + std::string(name));
}

FitResult levenberg_marquardt(const CurveModel& model, std::span<const double> x,
                              std::span<const double> y, const Eigen::VectorXd& initial,
                              const LmOptions& options) {
  const auto n = static_cast<Eigen::Index>(x.size());
  const Eigen::Index np = initial.size();
  if (static_cast<std::size_t>(n) != y.size()) throw FitError("levenberg_marquardt: size mismatch");
  if (n < np) throw FitError("levenberg_marquardt: fewer points than parameters");

  auto residuals = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) r(i) = y[i] - model.eval(x[i], p);
    return r;
  };
  // Jacobian of the model (= -d residual / dp).
  auto jacobian = [&](const Eigen::VectorXd& p) {
    Eigen::MatrixXd J(n, np);
    for (Eigen::Index j = 0; j < np; ++j) {
      const double h = 1e-6 * (std::abs(p(j)) + 1e-6);
      Eigen::VectorXd up = p, dn = p;
      up(j) += h;
      dn(j) -= h;
      for (Eigen::Index i = 0; i < n; ++i)
        J(i, j) = (model.eval(x[i], up) - model.eval(x[i], dn)) / (2 * h);
    }
    return J;
  };

  FitResult out;
  out.model = model.name;
  out.names = model.parameters;

  Eigen::VectorXd p = initial;
  Eigen::VectorXd r = residuals(p);
  double cost = 0.5 * r.squaredNorm();
  Eigen::MatrixXd J = jacobian(p);
  Eigen::MatrixXd A = J.transpose() * J;
  Eigen::VectorXd g = J.transpose() * r;
  double lambda = 1e-3 * std::max(A.diagonal().maxCoeff(), 1e-300);
  double nu = 2.0;
  out.cost_history.push_back(cost);

  int it = 0;
  bool converged = cost <= 1e-30;
  for (; it < options.max_iterations && !converged; ++it) {
    Eigen::VectorXd scale = A.diagonal().cwiseMax(1e-12 * std::max(A.diagonal().maxCoeff(), 1e-300));
    Eigen::MatrixXd M = A;
    M.diagonal() += lambda * scale;
    const Eigen::VectorXd delta = M.ldlt().solve(g);
    if (!delta.allFinite()) break;
    const Eigen::VectorXd p_new = p + delta;
    const Eigen::VectorXd r_new = residuals(p_new);
    const double cost_new = 0.5 * r_new.squaredNorm();
    const double predicted = 0.5 * delta.dot(lambda * scale.cwiseProduct(delta) + g);
    if (std::isfinite(cost_new) && cost_new < cost) {
      const double rho = predicted > 0 ? (cost - cost_new) / predicted : 1.0;
      const double drop = cost - cost_new;
      const bool small_step =
          delta.norm() <= options.step_tolerance * (p.norm() + options.step_tolerance);
      p = p_new;
      r = r_new;
      cost = cost_new;
      out.cost_history.push_back(cost);
      J = jacobian(p);
      A = J.transpose() * J;
      g = J.transpose() * r;
      lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2 * rho - 1, 3));
      nu = 2.0;
      if (drop <= options.cost_tolerance * cost || small_step || cost <= 1e-30) converged = true;
    } else {
      lambda *= nu;
      nu *= 2;
      if (lambda > 1e30) {
        // No descent direction left: at a stationary point.
        converged = g.norm() <= 1e-8 * (1 + std::sqrt(2 * cost)) || cost <= 1e-30;
        break;
      }
    }
  }

  out.values = p;
  out.iterations = it;
  out.converged = converged;
  out.residual_rms = std::sqrt(2 * cost / static_cast<double>(n));
  const double dof = static_cast<double>(std::max<Eigen::Index>(n - np, 1));
  const double s2 = 2 * cost / dof;
  const Eigen::MatrixXd cov = s2 * A.completeOrthogonalDecomposition().pseudoInverse();
  out.uncertainties = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

CurveModel gaussian_decay_model() {
  return {"gaussian_decay", {"A", "T2", "B"}, [](double t, const Eigen::VectorXd& p) {
            const double u = t / p(1);
            return p(0) * std::exp(-u * u) + p(2);
          }};
}

CurveModel damped_cosine_model() {
  return {"damped_cosine", {"A", "T2", "f", "phi", "B"}, [](double t, const Eigen::VectorXd& p) {
            const double u = t / p(1);
            return p(0) * std::exp(-u * u) * std::cos(2 * kPi * p(2) * t + p(3)) + p(4);
          }};
}

CurveModel three_tone_model() {
  return {"three_tone",
          {"A", "T2", "f", "split", "phi", "B", "t0"},
          [](double t, const Eigen::VectorXd& p) {
            const double te = t + p(6);
            const double u = te / p(1);
            double tones = 0;
            for (int k = -1; k <= 1; ++k) tones += std::cos(2 * kPi * (p(2) + k * p(3)) * te + p(4));
            return p(0) * std::exp(-u * u) * tones / 3.0 + p(5);
          }};
}

std::vector<SpectralPeak> spectral_peaks(std::span<const double> x, std::span<const double> y,
                                         double relative_threshold) {
  const std::size_t n = x.size();
  if (n < 4 || y.size() != n) return {};
  const double dx = (x.back() - x.front()) / static_cast<double>(n - 1);
  if (!(dx > 0)) return {};
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs((x[i] - x[i - 1]) - dx) > 1e-6 * dx) return {};

  const double offset = tail_mean(y);
  const std::size_t m = std::max<std::size_t>(4096, 16 * n);
  const std::size_t half = m / 2;
  std::vector<double> mag(half + 1);
  for (std::size_t k = 0; k <= half; ++k) {
    const double w = -2 * kPi * static_cast<double>(k) / static_cast<double>(m);
    std::complex<double> acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += (y[i] - offset) * std::polar(1.0, w * static_cast<double>(i));
    mag[k] = std::abs(acc);
  }
  const double top = *std::max_element(mag.begin(), mag.end());
  if (!(top > 0)) return {};
  const double df = 1.0 / (static_cast<double>(m) * dx);
  const double f_min = 1.0 / (x.back() - x.front());

  std::vector<SpectralPeak> peaks;
  for (std::size_t k = 1; k < half; ++k) {
    if (!(mag[k] > mag[k - 1] && mag[k] >= mag[k + 1])) continue;
    if (mag[k] < relative_threshold * top) continue;
    const double a = mag[k - 1], b = mag[k], c = mag[k + 1];
    const double denom = a - 2 * b + c;
    const double shift = denom != 0 ? 0.5 * (a - c) / denom : 0.0;
    const double f = (static_cast<double>(k) + shift) * df;
    if (f < f_min) continue;
    peaks.push_back({f, b - 0.25 * (a - c) * shift});
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const SpectralPeak& l, const SpectralPeak& r) { return l.magnitude > r.magnitude; });
  return peaks;
}

FitResult fit_damped_cosine(const TimeSeries& s) {
  require_points(s, 8, "fit_damped_cosine");
  const auto peaks = spectral_peaks(s.x, s.mean);
  if (peaks.size() >= 2) {
    const double p1 = peaks[0].magnitude * peaks[0].magnitude;
    const double p2 = peaks[1].magnitude * peaks[1].magnitude;
    if (p2 >= 0.9 * p1) throw FitError("fit_damped_cosine: ambiguous frequency");
  }
  const double span = span_of(s.x);
  const double B = tail_mean(s.mean);
  const auto [lo, hi] = std::minmax_element(s.mean.begin(), s.mean.end());
  const double A = 0.5 * (*hi - *lo);
  std::vector<double> freqs;
  if (peaks.empty()) freqs = {0.0, 0.5 / span};
  else freqs = {peaks[0].frequency};

  std::vector<Eigen::VectorXd> starts;
  for (double f : freqs)
    for (double T : {span / 4, span / 2, span})
      for (double phi : {0.0, kPi / 2, kPi, -kPi / 2}) starts.push_back(params({A, T, f, phi, B}));
  FitResult r = best_of(damped_cosine_model(), s, starts);
  canonicalize(r);
  return r;
}

FitResult fit_three_tone(const TimeSeries& s) {
  require_points(s, 8, "fit_three_tone");
  auto peaks = spectral_peaks(s.x, s.mean);
  if (peaks.empty()) throw FitError("fit_three_tone: no oscillation found");
  if (peaks.size() > 3) peaks.resize(3);
  std::vector<double> f;
  for (const auto& p : peaks) f.push_back(p.frequency);
  std::sort(f.begin(), f.end());

  std::vector<std::pair<double, double>> seeds;  // (center, split)
  if (f.size() == 3) {
    seeds = {{f[1], f[2] - f[1]}, {f[1], 0.5 * (f[2] - f[0])}};
  } else if (f.size() == 2) {
    const double gap = f[1] - f[0];
    seeds = {{f[0], gap}, {f[1], gap}, {0.5 * (f[0] + f[1]), 0.5 * gap}};
  } else {
    seeds = {{f[0], 1.0 / span_of(s.x)}};
  }
  const double span = span_of(s.x);
  const double B = tail_mean(s.mean);
  const auto [lo, hi] = std::minmax_element(s.mean.begin(), s.mean.end());
  const double A = *hi - *lo;
  std::vector<Eigen::VectorXd> starts;
  for (const auto& [fc, split] : seeds)
    for (double T : {span / 8, span / 4, span / 2})
      for (double phi : {0.0, kPi / 2, kPi, -kPi / 2})
        starts.push_back(params({A, T, fc, split, phi, B, 0.0}));
  FitResult r = best_of(three_tone_model(), s, starts);
  canonicalize(r);
  return r;
}

FitResult fit_gaussian_decay(const TimeSeries& s) {
  require_points(s, 6, "fit_gaussian_decay");
  const auto peaks = spectral_peaks(s.x, s.mean);
  if (peaks.size() == 1) return fit_damped_cosine(s);
  if (peaks.size() >= 2) return fit_three_tone(s);

  const double span = span_of(s.x);
  const double B = tail_mean(s.mean);
  const double A = s.mean.front() - B;
  std::vector<Eigen::VectorXd> starts;
  for (double T : {span / 8, span / 4, span / 2, span}) starts.push_back(params({A, T, B}));
  FitResult r = best_of(gaussian_decay_model(), s, starts);
  canonicalize(r);
  return r;
}

std::vector<Dip> find_dips(const TimeSeries& s) {
  s.validate();
  const std::size_t n = s.size();
  if (n < 5) throw ValidationError("find_dips: needs at least 5 points");
  std::vector<double> sorted = s.mean;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n / 2), sorted.end());
  const double baseline = sorted[n / 2];

  std::vector<Dip> dips;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double y0 = s.mean[i - 1], y1 = s.mean[i], y2 = s.mean[i + 1];
    if (!(y1 < y0 && y1 <= y2)) continue;
    const double threshold = std::max(3 * s.stderr_[i], 1e-9 * std::max(1.0, std::abs(baseline)));
    if (!(y1 < baseline - threshold)) continue;
    // Vertex of the parabola through the three points.
    const double x0 = s.x[i - 1], x1 = s.x[i], x2 = s.x[i + 1];
    const double d01 = (y1 - y0) / (x1 - x0), d12 = (y2 - y1) / (x2 - x1);
    const double curvature = (d12 - d01) / (x2 - x0);
    double center = x1, ymin = y1;
    if (curvature > 0) {
      const double slope = d01 - curvature * (x0 + x1);
      center = std::clamp(-slope / (2 * curvature), x0, x2);
      ymin = y1 + d01 * (center - x1) + curvature * (center - x0) * (center - x1);
    }
    dips.push_back({center, baseline - ymin});
  }
  return dips;
}

}  // namespace cwdd
