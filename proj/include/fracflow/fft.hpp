#pragma once

#include <complex>
#include <vector>

#include "fracflow/common.hpp"

namespace fracflow {

/// In-place radix-2 complex FFT (forward for sign=-1, inverse for sign=+1,
/// unnormalized).  Grid sizes are powers of two by the global contract, so a
/// dedicated radix-2 kernel is all we need; it keeps results bit-reproducible
/// across runs, which the determinism contract relies on.
inline void fft_radix2(std::vector<std::complex<double>>& a, int sign) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) throw SizeError("fft size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * two_pi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

/// Fourier coefficients c_k, k = 0..n-1 (mode e^{i k theta}, k >= n/2 aliased
/// to negatives), normalized so that u_j = sum_k c_k e^{i k theta_j}.
inline std::vector<std::complex<double>> fourier_coefficients(
    const std::vector<double>& u) {
  const std::size_t n = u.size();
  std::vector<std::complex<double>> a(n);
  for (std::size_t j = 0; j < n; ++j) a[j] = u[j];
  fft_radix2(a, -1);
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& c : a) c *= inv;
  return a;
}

/// Real samples from Fourier coefficients (inverse of fourier_coefficients).
inline std::vector<double> fourier_synthesis(
    std::vector<std::complex<double>> c) {
  fft_radix2(c, +1);
  std::vector<double> u(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) u[j] = c[j].real();
  return u;
}

/// Signed mode index for slot k of an n-point transform.
inline int signed_mode(std::size_t k, std::size_t n) {
  return k <= n / 2 ? static_cast<int>(k)
                    : static_cast<int>(k) - static_cast<int>(n);
}

/// Spectral angular derivative synthesized from precomputed coefficients
/// (one inverse transform).  The Nyquist mode is zeroed for odd orders (its
/// derivative is not representable as a real grid function).
inline std::vector<double> derivative_from_coeff(
    const std::vector<std::complex<double>>& coeff, int order) {
  auto c = coeff;
  const std::size_t n = c.size();
  for (std::size_t k = 0; k < n; ++k) {
    const int m = signed_mode(k, n);
    if (order % 2 == 1 && static_cast<std::size_t>(std::abs(m)) == n / 2) {
      c[k] = 0.0;
      continue;
    }
    std::complex<double> f(0.0, static_cast<double>(m));
    std::complex<double> p(1.0, 0.0);
    for (int l = 0; l < order; ++l) p *= f;
    c[k] *= p;
  }
  return fourier_synthesis(std::move(c));
}

/// Spectral angular derivative of given order on the periodic grid.
inline std::vector<double> spectral_derivative(const std::vector<double>& u,
                                               int order) {
  if (order == 0) return u;
  return derivative_from_coeff(fourier_coefficients(u), order);
}

/// Trigonometric interpolation of grid samples at an arbitrary angle.
/// O(n) per evaluation; used where spectral accuracy matters more than speed.
inline double trig_interpolate(const std::vector<std::complex<double>>& coeff,
                               double theta) {
  const std::size_t n = coeff.size();
  double acc = coeff[0].real();
  for (std::size_t k = 1; k < n / 2; ++k) {
    const double c = std::cos(static_cast<double>(k) * theta);
    const double s = std::sin(static_cast<double>(k) * theta);
    // pair k with n-k (conjugate modes): 2*Re(c_k e^{ik theta})
    acc += 2.0 * (coeff[k].real() * c - coeff[k].imag() * s);
  }
  // Nyquist mode: real for real input
  acc += coeff[n / 2].real() * std::cos(static_cast<double>(n / 2) * theta);
  return acc;
}

}  // namespace fracflow
