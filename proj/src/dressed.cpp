#include "cwdd/dressed.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace cwdd {

namespace {

constexpr double kDegeneracyTolerance = 1e-9;  // MHz

struct Eigenpairs {
  Eigen::Vector3d values;
  Operator vectors;
};

Eigenpairs diagonalize(const Operator& h) {
  Eigen::SelfAdjointEigenSolver<Operator> solver(h);
  return {solver.eigenvalues(), solver.eigenvectors()};
}

double min_gap(const Eigen::Vector3d& ascending) {
  return std::min(ascending(1) - ascending(0), ascending(2) - ascending(1));
}

// Rotates v so that <ref|v> is real and non-negative.
State align_phase(const State& v, const State& ref) {
  const std::complex<double> overlap = ref.dot(v);
  if (std::abs(overlap) == 0.0) return v;
  return v * std::polar(1.0, -std::arg(overlap));
}

DressedSpectrum assemble(const Eigenpairs& ep, int ig, int id, int ie) {
  DressedSpectrum s;
  s.E_g = ep.values(ig);
  s.E_d = ep.values(id);
  s.E_e = ep.values(ie);
  s.w_dg = s.E_d - s.E_g;
  s.w_eg = s.E_e - s.E_g;
  s.g = ep.vectors.col(ig);
  s.d = ep.vectors.col(id);
  s.e = ep.vectors.col(ie);
  s.s_overlap = std::abs(symmetric_state().dot(s.g));
  return s;
}

// Labels at b = 0 (or for an undriven system) from the symmetric structure.
DressedSpectrum label_reference(double delta, double omega, double b, double gamma_e) {
  const Eigenpairs ep = diagonalize(driven_hamiltonian(delta, omega, b, gamma_e));
  if (min_gap(ep.values) < kDegeneracyTolerance)
    throw LabelingError("dressed_spectrum: degenerate eigenvalues, labels undefined");

  DressedSpectrum s;
  if (omega == 0.0) {
    // No drive: basis states, ordered by energy.
    s = assemble(ep, 0, 1, 2);
  } else {
    const State anti = antisymmetric_state();
    int id = 0;
    double best = -1;
    for (int k = 0; k < 3; ++k) {
      const double w = std::norm(anti.dot(ep.vectors.col(k)));
      if (w > best) {
        best = w;
        id = k;
      }
    }
    if (id == 0) throw LabelingError("dressed_spectrum: antisymmetric state is the lowest level");
    const int ie = id == 1 ? 2 : 1;
    s = assemble(ep, 0, id, ie);
  }
  // Phase convention: |0> component of g and e real positive, <A|d> real positive.
  const State zero = basis_state(kZero);
  if (std::abs(s.g(kZero)) > 1e-12) s.g = align_phase(s.g, zero);
  else s.g = align_phase(s.g, s.g.cwiseAbs().cast<std::complex<double>>());
  if (std::abs(s.e(kZero)) > 1e-12) s.e = align_phase(s.e, zero);
  else s.e = align_phase(s.e, s.e.cwiseAbs().cast<std::complex<double>>());
  s.d = align_phase(s.d, std::abs(antisymmetric_state().dot(s.d)) > 1e-12
                             ? antisymmetric_state()
                             : State(s.d.cwiseAbs().cast<std::complex<double>>()));
  return s;
}

}  // namespace

BareSpectrum bare_spectrum(const PhysicalConstants& c, double b, int m_I) {
  const Operator h = bare_hamiltonian(c, b, m_I);
  BareSpectrum s;
  s.E_plus = h(kPlus, kPlus).real();
  s.E_zero = h(kZero, kZero).real();
  s.E_minus = h(kMinus, kMinus).real();
  s.w_01 = s.E_plus - s.E_zero;
  s.w_0m1 = s.E_minus - s.E_zero;
  return s;
}

DressedSpectrum label_by_overlap(const Operator& h, const DressedSpectrum& reference) {
  const Eigenpairs ep = diagonalize(h);
  if (min_gap(ep.values) < kDegeneracyTolerance)
    throw LabelingError("label_by_overlap: degenerate eigenvalues");

  const std::array<const State*, 3> refs{&reference.g, &reference.d, &reference.e};
  Eigen::Matrix3d overlap;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) overlap(i, k) = std::norm(refs[i]->dot(ep.vectors.col(k)));

  std::array<int, 3> perm{0, 1, 2};
  std::array<int, 3> best_perm = perm;
  double best = -1, second = -1;
  do {
    const double score = overlap(0, perm[0]) + overlap(1, perm[1]) + overlap(2, perm[2]);
    if (score > best) {
      second = best;
      best = score;
      best_perm = perm;
    } else if (score > second) {
      second = score;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (best - second < 1e-12) throw LabelingError("label_by_overlap: ambiguous continuity");

  DressedSpectrum s = assemble(ep, best_perm[0], best_perm[1], best_perm[2]);
  s.g = align_phase(s.g, reference.g);
  s.d = align_phase(s.d, reference.d);
  s.e = align_phase(s.e, reference.e);
  return s;
}

DressedSpectrum dressed_spectrum(double delta, double omega, double b, double gamma_e) {
  if (omega < 0) throw ValidationError("dressed_spectrum: omega must be >= 0");
  if (omega == 0.0 && b == 0.0)
    throw LabelingError("dressed_spectrum: g/d labels degenerate at omega = 0, b = 0");
  if (omega == 0.0 || b == 0.0) return label_reference(delta, omega, b, gamma_e);

  // Follow the labels from b = 0 in steps small against the smallest gap.
  DressedSpectrum current = label_reference(delta, omega, 0.0, gamma_e);
  const double gap0 = std::min(current.w_dg, current.w_eg - current.w_dg);
  const double span = std::abs(gamma_e * b);
  const int steps = std::clamp(static_cast<int>(std::ceil(span / (0.05 * gap0))), 1, 100000);
  for (int k = 1; k <= steps; ++k) {
    const double bk = b * static_cast<double>(k) / steps;
    current = label_by_overlap(driven_hamiltonian(delta, omega, bk, gamma_e), current);
  }
  return current;
}

double gap_sensitivity(double delta, double omega, double b0, int order, double gamma_e,
                       double h) {
  if (order != 1 && order != 2) throw ValidationError("gap_sensitivity: order must be 1 or 2");
  if (!(h > 0)) throw ValidationError("gap_sensitivity: step must be > 0");
  auto w = [&](double b) { return dressed_spectrum(delta, omega, b, gamma_e).w_dg; };
  const double w0 = order == 2 ? w(b0) : 0.0;
  auto difference = [&](double step) {
    if (order == 1) return (w(b0 + step) - w(b0 - step)) / (2 * step);
    return (w(b0 + step) - 2 * w0 + w(b0 - step)) / (step * step);
  };
  const double coarse = difference(h);
  const double fine = difference(h / 2);
  return (4 * fine - coarse) / 3;
}

double find_sweet_spot_ratio(double delta, double gamma_e, double tolerance, double lo,
                             double hi) {
  if (!(delta > 0)) throw ValidationError("find_sweet_spot_ratio: delta must be > 0");
  auto curvature = [&](double ratio) {
    return gap_sensitivity(delta, ratio * delta, 0.0, 2, gamma_e);
  };
  double f_lo = curvature(lo);
  const double f_hi = curvature(hi);
  if (std::signbit(f_lo) == std::signbit(f_hi))
    throw BracketError("find_sweet_spot_ratio: curvature has no sign change on the bracket");
  while (hi - lo > tolerance) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = curvature(mid);
    if (f_mid == 0.0) return mid;
    if (std::signbit(f_mid) == std::signbit(f_lo)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double rf_matrix_element(double delta, double omega) {
  if (omega == 0.0) return 0.0;
  const DressedSpectrum s = dressed_spectrum(delta, omega, 0.0);
  return std::abs(s.d.dot(spin_z() * s.g));
}

}  // namespace cwdd
