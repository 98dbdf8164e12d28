#pragma once

#include "cwdd/spin.hpp"

namespace cwdd {

struct BareSpectrum {
  double E_plus = 0;
  double E_zero = 0;
  double E_minus = 0;
  double w_01 = 0;   // E_plus - E_zero
  double w_0m1 = 0;  // E_minus - E_zero
};

BareSpectrum bare_spectrum(const PhysicalConstants& c, double b = 0.0, int m_I = 0);

// Labelled eigenpairs of the driven Hamiltonian. |g> is the ground state,
// |d> the state continuously connected to the antisymmetric combination of
// |+1> and |-1>, |e> the remaining one.
struct DressedSpectrum {
  double E_g = 0;
  double E_d = 0;
  double E_e = 0;
  double w_dg = 0;
  double w_eg = 0;
  State g = State::Zero();
  State d = State::Zero();
  State e = State::Zero();
  double s_overlap = 0;  // |<symmetric|g>|
};

DressedSpectrum dressed_spectrum(double delta, double omega, double b,
                                 double gamma_e = PhysicalConstants{}.gamma_e);

// Diagonalises an arbitrary 3x3 Hermitian `h` and assigns g/d/e by maximal
// overlap with `reference`. Throws LabelingError if the assignment is not
// unique.
DressedSpectrum label_by_overlap(const Operator& h, const DressedSpectrum& reference);

// d^n w_dg / db^n at b0 (n = 1 or 2) by central differences with one
// Richardson step. MHz/G or MHz/G^2.
double gap_sensitivity(double delta, double omega, double b0, int order,
                       double gamma_e = PhysicalConstants{}.gamma_e, double h = 1e-3);

// Omega/Delta at which the b^2 term of w_dg vanishes. Bisection on the
// curvature over ratio in [lo, hi].
double find_sweet_spot_ratio(double delta, double gamma_e = PhysicalConstants{}.gamma_e,
                             double tolerance = 1e-10, double lo = 2.0, double hi = 8.0);

// |<d|Sz|g>| at b = 0.
double rf_matrix_element(double delta, double omega);

}  // namespace cwdd
