#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace nvr::fft {

// Direct-evaluation DFT. Every transform in this pipeline is either a
// length-200 trace (101 bins) or a short analysis window, so the O(n^2)
// evaluation costs microseconds and keeps results identical across builds.

// Real-input DFT, bins k = 0 .. n/2: X_k = sum_j x_j exp(-2*pi*i*j*k/n).
inline std::vector<std::complex<double>> rfft(std::span<const double> x) {
  const std::size_t n = x.size();
  const std::size_t n_bins = n / 2 + 1;
  // twiddle table w_m = exp(-2*pi*i*m/n), indexed by j*k mod n
  std::vector<std::complex<double>> w(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double phi = -2.0 * std::numbers::pi * static_cast<double>(m) /
                       static_cast<double>(n);
    w[m] = {std::cos(phi), std::sin(phi)};
  }
  std::vector<std::complex<double>> out(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    std::complex<double> acc{0.0, 0.0};
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += x[j] * w[m];
      m += k;
      if (m >= n) m -= n;
    }
    out[k] = acc;
  }
  return out;
}

inline std::vector<double> rfft_mag(std::span<const double> x) {
  const auto spec = rfft(x);
  std::vector<double> mag(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) mag[k] = std::abs(spec[k]);
  return mag;
}

// Magnitude spectrum of the mean-removed signal zero-padded to pad_len,
// used for fine-grained peak localization.
inline std::vector<double> rfft_mag_padded(std::span<const double> x,
                                           std::size_t pad_len) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  std::vector<double> padded(pad_len, 0.0);
  for (std::size_t j = 0; j < x.size(); ++j) padded[j] = x[j] - mean;
  return rfft_mag(padded);
}

}  // namespace nvr::fft
