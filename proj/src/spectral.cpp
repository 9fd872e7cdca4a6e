#include "daif/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace daif::spectral {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Iterative radix-2 Cooley-Tukey; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// Bluestein chirp-z transform for arbitrary sizes. The chirp exponent is
// reduced mod 2n to keep sin/cos arguments small.
void fft_bluestein(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  const std::size_t m = next_power_of_two(2 * n - 1);
  const double sign = inverse ? 1.0 : -1.0;

  std::vector<std::complex<double>> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t k2 = (k * k) % (2 * n);
    const double angle = sign * kPi * static_cast<double>(k2) / static_cast<double>(n);
    chirp[k] = {std::cos(angle), std::sin(angle)};
  }

  std::vector<std::complex<double>> fa(m, {0.0, 0.0});
  std::vector<std::complex<double>> fb(m, {0.0, 0.0});
  for (std::size_t k = 0; k < n; ++k) fa[k] = a[k] * chirp[k];
  fb[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) {
    fb[k] = std::conj(chirp[k]);
    fb[m - k] = fb[k];
  }

  fft_radix2(fa, false);
  fft_radix2(fb, false);
  for (std::size_t k = 0; k < m; ++k) fa[k] *= fb[k];
  fft_radix2(fa, true);

  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = fa[k] * scale * chirp[k];
}

}  // namespace

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  if (a.empty()) return;
  if (is_power_of_two(a.size())) {
    fft_radix2(a, inverse);
  } else {
    fft_bluestein(a, inverse);
  }
}

Spectrum rdft(const std::vector<double>& x) {
  if (x.empty()) throw ContractError("rdft: empty input");
  const std::size_t t = x.size();
  std::vector<std::complex<double>> buf(t);
  for (std::size_t i = 0; i < t; ++i) buf[i] = {x[i], 0.0};
  fft_inplace(buf, false);

  Spectrum s;
  s.original_length = t;
  s.coefficients.assign(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(t / 2 + 1));
  s.coefficients.front().imag(0.0);
  if (t % 2 == 0) s.coefficients.back().imag(0.0);
  return s;
}

std::vector<double> irdft(const Spectrum& s) {
  const std::size_t t = s.original_length;
  if (t == 0 || s.coefficients.size() != t / 2 + 1) {
    throw ContractError("irdft: spectrum with " +
                        std::to_string(s.coefficients.size()) +
                        " coefficients is inconsistent with original length " +
                        std::to_string(t));
  }
  std::vector<std::complex<double>> full(t);
  for (std::size_t j = 0; j < s.coefficients.size(); ++j) full[j] = s.coefficients[j];
  for (std::size_t j = t / 2 + 1; j < t; ++j) full[j] = std::conj(full[t - j]);
  fft_inplace(full, true);
  std::vector<double> out(t);
  const double scale = 1.0 / static_cast<double>(t);
  for (std::size_t i = 0; i < t; ++i) out[i] = full[i].real() * scale;
  return out;
}

std::vector<double> amplitude(const Spectrum& s) {
  std::vector<double> amps(s.coefficients.size());
  for (std::size_t j = 0; j < amps.size(); ++j) amps[j] = std::abs(s.coefficients[j]);
  return amps;
}

std::vector<std::size_t> top_k_indices(const std::vector<double>& amps,
                                       std::size_t k) {
  if (k < 1 || k > amps.size()) {
    throw ContractError("top_k_indices: k=" + std::to_string(k) +
                        " out of range [1," + std::to_string(amps.size()) + "]");
  }
  std::vector<std::size_t> order(amps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (amps[a] != amps[b]) return amps[a] > amps[b];
    return a < b;
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<double> frequency_filter(const std::vector<double>& x,
                                     std::size_t k, bool always_keep_dc) {
  Spectrum s = rdft(x);
  const std::size_t bins = s.bins();
  if (k < 1 || k > bins) {
    throw ContractError("frequency_filter: k=" + std::to_string(k) +
                        " out of range [1," + std::to_string(bins) + "]");
  }
  std::vector<double> amps = amplitude(s);
  std::vector<std::size_t> keep;
  if (always_keep_dc) {
    keep.push_back(0);
    if (k > 1 && bins > 1) {
      std::vector<double> rest(amps.begin() + 1, amps.end());
      for (std::size_t idx : top_k_indices(rest, std::min(k - 1, rest.size())))
        keep.push_back(idx + 1);
    }
  } else {
    keep = top_k_indices(amps, k);
  }
  std::vector<bool> selected(bins, false);
  for (std::size_t idx : keep) selected[idx] = true;
  for (std::size_t j = 0; j < bins; ++j) {
    if (!selected[j]) s.coefficients[j] = {0.0, 0.0};
  }
  return irdft(s);
}

}  // namespace daif::spectral
