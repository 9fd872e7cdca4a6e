#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "daif/errors.hpp"

namespace daif::spectral {

/// One-sided spectrum of a real series: the floor(T/2)+1 non-redundant
/// coefficients of the unnormalized forward DFT. The DC bin and, for even T,
/// the Nyquist bin are stored with exactly zero imaginary part.
struct Spectrum {
  std::vector<std::complex<double>> coefficients;
  std::size_t original_length = 0;

  std::size_t bins() const { return coefficients.size(); }
};

/// Forward transform, c_j = sum_t x_t * exp(-2*pi*i*j*t/T) for j = 0..T/2.
Spectrum rdft(const std::vector<double>& x);

/// Inverse transform with 1/T normalization; irdft(rdft(x)) == x within 1e-9.
std::vector<double> irdft(const Spectrum& s);

/// |c_j| per one-sided coefficient.
std::vector<double> amplitude(const Spectrum& s);

/// Indices of the k largest amplitudes, ties broken toward the lower
/// frequency index, returned in ascending index order.
std::vector<std::size_t> top_k_indices(const std::vector<double>& amps,
                                       std::size_t k);

/// Keeps only the k highest-amplitude frequency components of x and
/// reconstructs the series. With always_keep_dc the DC bin takes one of the
/// k slots unconditionally and the remaining k-1 are chosen among the rest.
std::vector<double> frequency_filter(const std::vector<double>& x,
                                     std::size_t k,
                                     bool always_keep_dc = false);

/// In-place complex FFT, unnormalized in both directions. Radix-2 for
/// power-of-two sizes, Bluestein otherwise.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

}  // namespace daif::spectral
