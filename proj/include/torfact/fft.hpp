// SPDX-License-Identifier: Apache-2.0
#ifndef TORFACT_FFT_HPP
#define TORFACT_FFT_HPP

#include <complex>
#include <vector>

#include "torfact/common.hpp"

namespace torfact::detail {

/// In-place iterative radix-2 FFT.  `sign = -1` forward, `+1` inverse
/// (inverse is unnormalized; callers divide by N).  Sizes are powers of two
/// by contract, which is all the grid types allow.
inline void fft_pow2(std::complex<double>* a, int n, int sign) {
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = sign * kTau / len;
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (int k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

/// Forward DFT of real samples laid out row-major on an n1 x n2 grid
/// (n2 == 1 for one dimension).  Output coefficients are unnormalized
/// complex DFT values, same layout.
inline std::vector<std::complex<double>> dft2_forward(
    const std::vector<double>& samples, int n1, int n2) {
  std::vector<std::complex<double>> c(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) c[i] = samples[i];
  std::vector<std::complex<double>> col(n1);
  // rows (axis 1)
  if (n2 > 1)
    for (int i = 0; i < n1; ++i) fft_pow2(c.data() + (size_t)i * n2, n2, -1);
  // columns (axis 0)
  if (n1 > 1) {
    for (int j = 0; j < n2; ++j) {
      for (int i = 0; i < n1; ++i) col[i] = c[(size_t)i * n2 + j];
      fft_pow2(col.data(), n1, -1);
      for (int i = 0; i < n1; ++i) c[(size_t)i * n2 + j] = col[i];
    }
  }
  return c;
}

/// Unnormalized inverse of dft2_forward: feed it coefficients already
/// divided by the grid size and it returns the real sample values.
inline std::vector<double> dft2_inverse_real(
    std::vector<std::complex<double>> c, int n1, int n2) {
  std::vector<std::complex<double>> col(n1);
  if (n1 > 1) {
    for (int j = 0; j < n2; ++j) {
      for (int i = 0; i < n1; ++i) col[i] = c[(size_t)i * n2 + j];
      fft_pow2(col.data(), n1, +1);
      for (int i = 0; i < n1; ++i) c[(size_t)i * n2 + j] = col[i];
    }
  }
  if (n2 > 1)
    for (int i = 0; i < n1; ++i) fft_pow2(c.data() + (size_t)i * n2, n2, +1);
  std::vector<double> out(c.size());
  for (size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
  return out;
}

/// Signed frequency of DFT bin k on an N-grid: 0,1,...,N/2,-N/2+1,...,-1.
inline int bin_freq(int k, int n) { return (k <= n / 2) ? k : k - n; }

}  // namespace torfact::detail

#endif  // TORFACT_FFT_HPP
