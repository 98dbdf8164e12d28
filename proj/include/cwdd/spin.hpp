#pragma once

// Spin-1 operator algebra over the ordered basis {|+1>, |0>, |-1>}.
//
// Hamiltonians are expressed in frequency units (MHz) so that a state
// evolves as exp(-2*pi*i*H*t) with t in microseconds.

#include <Eigen/Dense>

#include <complex>
#include <numbers>

#include "cwdd/errors.hpp"

namespace cwdd {

template <typename Scalar>
using Operator3 = Eigen::Matrix<std::complex<Scalar>, 3, 3>;
template <typename Scalar>
using State3 = Eigen::Matrix<std::complex<Scalar>, 3, 1>;

using Operator = Operator3<double>;
using State = State3<double>;

// Basis indices.
inline constexpr int kPlus = 0;
inline constexpr int kZero = 1;
inline constexpr int kMinus = 2;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct PhysicalConstants {
  double D = 2870.0;       // zero-field splitting, MHz
  double gamma_e = 2.802;  // MHz / Gauss
  double B_z = 12.0;       // Gauss
  double A_hf = 2.16;      // 14N axial hyperfine, MHz

  void validate() const {
    if (!(D > 0)) throw ValidationError("constants: D must be > 0");
    if (!(gamma_e > 0)) throw ValidationError("constants: gamma_e must be > 0");
    if (!(B_z >= 0)) throw ValidationError("constants: B_z must be >= 0");
    // Lowest hyperfine line of the |0> <-> |-1> transition must stay positive.
    if (!(D - gamma_e * B_z - std::abs(A_hf) > 0))
      throw ValidationError("constants: hyperfine splitting drives w_{0,-1} <= 0");
  }
};

template <typename Scalar = double>
Operator3<Scalar> spin_z() {
  Operator3<Scalar> sz = Operator3<Scalar>::Zero();
  sz(kPlus, kPlus) = Scalar(1);
  sz(kMinus, kMinus) = Scalar(-1);
  return sz;
}

template <typename Scalar = double>
Operator3<Scalar> spin_z_squared() {
  Operator3<Scalar> sz2 = Operator3<Scalar>::Zero();
  sz2(kPlus, kPlus) = Scalar(1);
  sz2(kMinus, kMinus) = Scalar(1);
  return sz2;
}

template <typename Scalar = double>
State3<Scalar> basis_state(int index) {
  State3<Scalar> v = State3<Scalar>::Zero();
  v(index) = Scalar(1);
  return v;
}

// (|+1> + |-1>)/sqrt2 and (|+1> - |-1>)/sqrt2.
template <typename Scalar = double>
State3<Scalar> symmetric_state() {
  const Scalar r = Scalar(1) / std::sqrt(Scalar(2));
  return State3<Scalar>(r, Scalar(0), r);
}

template <typename Scalar = double>
State3<Scalar> antisymmetric_state() {
  const Scalar r = Scalar(1) / std::sqrt(Scalar(2));
  return State3<Scalar>(r, Scalar(0), -r);
}

// D Sz^2 + gamma_e (B_z + b) Sz + A_hf m_I Sz, lab frame, MHz.
template <typename Scalar = double>
Operator3<Scalar> bare_hamiltonian(const PhysicalConstants& c, Scalar b, int m_I) {
  const Scalar zeeman = Scalar(c.gamma_e) * (Scalar(c.B_z) + b) + Scalar(c.A_hf) * Scalar(m_I);
  return Scalar(c.D) * spin_z_squared<Scalar>() + zeeman * spin_z<Scalar>();
}

// Amplitude and phase of one microwave tone on a |0> <-> |iota> transition.
template <typename Scalar = double>
struct Tone {
  Scalar omega = 0;  // Rabi frequency, MHz
  Scalar phase = 0;  // rad
};

// Rotating-frame Hamiltonian for two tones addressing |0> <-> |+1> and
// |0> <-> |-1>. `delta_*` is the frame offset of each |iota> level (tone
// frequency below the b = 0, m_I = 0 transition), `shift` the extra Zeeman
// shift gamma_e b + A_hf m_I in MHz, entering as shift * iota.
template <typename Scalar = double>
Operator3<Scalar> frame_hamiltonian(Scalar delta_plus, Scalar delta_minus,
                                    const Tone<Scalar>& plus, const Tone<Scalar>& minus,
                                    Scalar shift) {
  using C = std::complex<Scalar>;
  Operator3<Scalar> h = Operator3<Scalar>::Zero();
  h(kPlus, kPlus) = delta_plus + shift;
  h(kMinus, kMinus) = delta_minus - shift;
  const C cp = std::polar(plus.omega / Scalar(2), plus.phase);
  const C cm = std::polar(minus.omega / Scalar(2), minus.phase);
  h(kZero, kPlus) = cp;
  h(kPlus, kZero) = std::conj(cp);
  h(kZero, kMinus) = cm;
  h(kMinus, kZero) = std::conj(cm);
  return h;
}

// Symmetric double drive: both tones at detuning delta and Rabi frequency
// omega, field offset b in Gauss.
template <typename Scalar = double>
Operator3<Scalar> driven_hamiltonian(Scalar delta, Scalar omega, Scalar b,
                                     Scalar gamma_e = Scalar(PhysicalConstants{}.gamma_e),
                                     Scalar phase_plus = 0, Scalar phase_minus = 0) {
  return frame_hamiltonian<Scalar>(delta, delta, {omega, phase_plus}, {omega, phase_minus},
                                   gamma_e * b);
}

template <typename Derived>
double hermiticity_error(const Eigen::MatrixBase<Derived>& h) {
  const double scale = std::max(h.norm(), 1e-300);
  return (h - h.adjoint()).norm() / scale;
}

}  // namespace cwdd
