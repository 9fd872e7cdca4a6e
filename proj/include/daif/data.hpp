#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "daif/tensor.hpp"

namespace daif {

struct MultivariateSeries {
  Tensor values;  // T_total x N
  std::vector<std::string> variate_names;
  std::vector<std::string> timestamps;  // empty, or one string per row

  std::size_t length() const { return values.shape.empty() ? 0 : values.shape[0]; }
  std::size_t n_variates() const {
    return values.shape.size() < 2 ? 0 : values.shape[1];
  }
};

struct Window {
  Tensor x;  // T x N lookback
  Tensor y;  // S x N target
  std::vector<double> mean;    // per-variate lookback stats, set by standardize
  std::vector<double> stddev;  // floored at the eps used by standardize
  std::size_t index = 0;       // window position within its segment
};

enum class SplitMode { Ratio, EttMonths };

struct SplitSpec {
  SplitMode mode = SplitMode::Ratio;
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

struct SplitResult {
  MultivariateSeries train, val, test;
};

/// CSV contract: UTF-8, comma-separated, header row; optional leading "date"
/// column stored verbatim; remaining columns parsed as decimal floats.
MultivariateSeries load_csv(const std::string& path);
void write_csv(const MultivariateSeries& series, const std::string& path);

std::size_t window_count(std::size_t n, std::size_t lookback, std::size_t horizon,
                         std::size_t stride = 1);
Window window_at(const MultivariateSeries& segment, std::size_t i,
                 std::size_t lookback, std::size_t horizon, std::size_t stride = 1);
std::vector<Window> sliding_windows(const MultivariateSeries& segment,
                                    std::size_t lookback, std::size_t horizon,
                                    std::size_t stride = 1);

/// Per-variate lookback mean/std normalization; the same stats normalize y.
Window standardize(const Window& w, double eps = 1e-8);
/// Exact inverse of standardize using the stats stored in the window.
Window destandardize(const Window& w);
/// Maps an N x S normalized prediction back to data scale.
Tensor destandardize_prediction(const Tensor& pred, const Window& normalized);

/// Chronological split; val/test are prefixed with the last `lookback` rows
/// of the preceding split so their first target is predictable.
SplitResult split(const MultivariateSeries& series, const SplitSpec& spec,
                  std::size_t lookback);

struct SynthSpec {
  std::size_t n_variates = 4;
  std::size_t length = 4000;
  /// Sinusoid periods (in samples) per variate; defaults assign each variate
  /// two tones when empty.
  std::vector<std::vector<double>> periods;
  std::vector<std::vector<double>> amplitudes;
  double noise_sigma = 0.1;
  double trend_slope = 0.0;
  std::uint64_t seed = 1;
};

/// Seeded sum-of-sinusoids generator with Gaussian noise and optional linear
/// trend; hourly timestamps in the standard CSV layout.
MultivariateSeries synth_generate(const SynthSpec& spec);

}  // namespace daif
