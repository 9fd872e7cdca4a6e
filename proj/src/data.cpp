#include "daif/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "daif/rng.hpp"

namespace daif {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

MultivariateSeries slice_rows_series(const MultivariateSeries& s, std::size_t r0,
                                     std::size_t r1) {
  MultivariateSeries out;
  out.variate_names = s.variate_names;
  const std::size_t n = s.n_variates();
  out.values = Tensor::zeros({r1 - r0, n});
  std::copy(s.values.data.begin() + static_cast<std::ptrdiff_t>(r0 * n),
            s.values.data.begin() + static_cast<std::ptrdiff_t>(r1 * n),
            out.values.data.begin());
  if (!s.timestamps.empty()) {
    out.timestamps.assign(s.timestamps.begin() + static_cast<std::ptrdiff_t>(r0),
                          s.timestamps.begin() + static_cast<std::ptrdiff_t>(r1));
  }
  return out;
}

// Minutes between the first two timestamps, or 60 when undecidable.
// Timestamps follow the benchmark layout "YYYY-MM-DD hh:mm[:ss]".
int timestamp_step_minutes(const std::vector<std::string>& ts) {
  if (ts.size() < 2) return 60;
  auto parse_minutes = [](const std::string& s) -> long {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0;
    if (std::sscanf(s.c_str(), "%d-%d-%d %d:%d", &y, &mo, &d, &h, &mi) >= 4) {
      long days = static_cast<long>(y) * 372 + mo * 31 + d;
      return days * 24 * 60 + h * 60 + mi;
    }
    return -1;
  };
  const long a = parse_minutes(ts[0]);
  const long b = parse_minutes(ts[1]);
  if (a < 0 || b < 0 || b <= a) return 60;
  return static_cast<int>(b - a);
}

}  // namespace

MultivariateSeries load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("load_csv: " + path + " is empty");
  line = strip_cr(line);
  std::vector<std::string> header = split_line(line);
  if (header.empty()) throw DataError("load_csv: " + path + " has an empty header");

  const bool has_date = header.front() == "date";
  const std::size_t first_value_col = has_date ? 1 : 0;
  if (header.size() <= first_value_col) {
    throw DataError("load_csv: " + path + " has no value columns");
  }

  MultivariateSeries series;
  series.variate_names.assign(header.begin() + static_cast<std::ptrdiff_t>(first_value_col),
                              header.end());
  const std::size_t n = series.variate_names.size();

  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    ++row;
    std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      throw DataError("load_csv: row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    }
    if (has_date) series.timestamps.push_back(cells[0]);
    for (std::size_t c = first_value_col; c < cells.size(); ++c) {
      const std::string& cell = cells[c];
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        throw DataError("load_csv: non-numeric cell \"" + cell + "\" at row " +
                        std::to_string(row) + ", column \"" +
                        series.variate_names[c - first_value_col] + "\"");
      }
      if (!std::isfinite(v)) {
        throw DataError("load_csv: non-finite value at row " + std::to_string(row) +
                        ", column \"" + series.variate_names[c - first_value_col] +
                        "\"");
      }
      values.push_back(v);
    }
  }
  if (row == 0) throw DataError("load_csv: " + path + " has no data rows");

  series.values = Tensor({row, n}, std::move(values));
  return series;
}

void write_csv(const MultivariateSeries& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_csv: cannot open " + path + " for writing");

  const bool has_date = !series.timestamps.empty();
  if (has_date) out << "date";
  for (std::size_t c = 0; c < series.variate_names.size(); ++c) {
    if (has_date || c > 0) out << ',';
    out << series.variate_names[c];
  }
  out << '\n';

  char buf[40];
  for (std::size_t r = 0; r < series.length(); ++r) {
    if (has_date) out << series.timestamps[r];
    for (std::size_t c = 0; c < series.n_variates(); ++c) {
      if (has_date || c > 0) out << ',';
      std::snprintf(buf, sizeof(buf), "%.12g", series.values.at(r, c));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write_csv: failed writing " + path);
}

std::size_t window_count(std::size_t n, std::size_t lookback, std::size_t horizon,
                         std::size_t stride) {
  if (stride < 1) throw ContractError("window_count: stride must be >= 1");
  if (n < lookback + horizon) {
    throw ContractError("window_count: segment length " + std::to_string(n) +
                        " is shorter than lookback+horizon = " +
                        std::to_string(lookback + horizon));
  }
  return (n - lookback - horizon) / stride + 1;
}

Window window_at(const MultivariateSeries& segment, std::size_t i,
                 std::size_t lookback, std::size_t horizon, std::size_t stride) {
  const std::size_t count = window_count(segment.length(), lookback, horizon, stride);
  if (i >= count) {
    throw ContractError("window_at: index " + std::to_string(i) + " out of " +
                        std::to_string(count) + " windows");
  }
  const std::size_t n = segment.n_variates();
  const std::size_t start = i * stride;
  Window w;
  w.index = i;
  w.x = Tensor::zeros({lookback, n});
  w.y = Tensor::zeros({horizon, n});
  std::copy(segment.values.data.begin() + static_cast<std::ptrdiff_t>(start * n),
            segment.values.data.begin() + static_cast<std::ptrdiff_t>((start + lookback) * n),
            w.x.data.begin());
  std::copy(
      segment.values.data.begin() + static_cast<std::ptrdiff_t>((start + lookback) * n),
      segment.values.data.begin() +
          static_cast<std::ptrdiff_t>((start + lookback + horizon) * n),
      w.y.data.begin());
  return w;
}

std::vector<Window> sliding_windows(const MultivariateSeries& segment,
                                    std::size_t lookback, std::size_t horizon,
                                    std::size_t stride) {
  const std::size_t count = window_count(segment.length(), lookback, horizon, stride);
  std::vector<Window> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(window_at(segment, i, lookback, horizon, stride));
  return out;
}

Window standardize(const Window& w, double eps) {
  const std::size_t t = w.x.rows(), n = w.x.cols(), s = w.y.rows();
  Window out = w;
  out.mean.assign(n, 0.0);
  out.stddev.assign(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < t; ++r) mean += w.x.at(r, c);
    mean /= static_cast<double>(t);
    double var = 0.0;
    for (std::size_t r = 0; r < t; ++r) {
      const double d = w.x.at(r, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(t);
    const double sd = std::max(std::sqrt(var), eps);
    out.mean[c] = mean;
    out.stddev[c] = sd;
    for (std::size_t r = 0; r < t; ++r) out.x.at(r, c) = (w.x.at(r, c) - mean) / sd;
    for (std::size_t r = 0; r < s; ++r) out.y.at(r, c) = (w.y.at(r, c) - mean) / sd;
  }
  return out;
}

Window destandardize(const Window& w) {
  if (w.mean.size() != w.x.cols() || w.stddev.size() != w.x.cols()) {
    throw ContractError("destandardize: window carries no stats");
  }
  Window out = w;
  for (std::size_t c = 0; c < w.x.cols(); ++c) {
    for (std::size_t r = 0; r < w.x.rows(); ++r)
      out.x.at(r, c) = w.x.at(r, c) * w.stddev[c] + w.mean[c];
    for (std::size_t r = 0; r < w.y.rows(); ++r)
      out.y.at(r, c) = w.y.at(r, c) * w.stddev[c] + w.mean[c];
  }
  out.mean.clear();
  out.stddev.clear();
  return out;
}

Tensor destandardize_prediction(const Tensor& pred, const Window& normalized) {
  const std::size_t n = pred.rows(), s = pred.cols();
  if (normalized.mean.size() != n || normalized.stddev.size() != n) {
    throw ContractError("destandardize_prediction: prediction has " +
                        std::to_string(n) + " variates, window stats have " +
                        std::to_string(normalized.mean.size()));
  }
  Tensor out = pred.detached();
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t h = 0; h < s; ++h)
      out.at(v, h) = pred.at(v, h) * normalized.stddev[v] + normalized.mean[v];
  return out;
}

SplitResult split(const MultivariateSeries& series, const SplitSpec& spec,
                  std::size_t lookback) {
  const std::size_t len = series.length();
  std::size_t train_end = 0, val_end = 0, test_end = 0;

  if (spec.mode == SplitMode::Ratio) {
    const double sum = spec.train + spec.val + spec.test;
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError("split: ratios sum to " + std::to_string(sum) +
                        ", expected 1");
    }
    train_end = static_cast<std::size_t>(spec.train * static_cast<double>(len));
    val_end = train_end + static_cast<std::size_t>(spec.val * static_cast<double>(len));
    test_end = len;
  } else {
    const int step = timestamp_step_minutes(series.timestamps);
    const std::size_t rows_per_month =
        static_cast<std::size_t>(30 * 24 * 60 / std::max(step, 1));
    train_end = 12 * rows_per_month;
    val_end = train_end + 4 * rows_per_month;
    test_end = val_end + 4 * rows_per_month;
    if (test_end > len) {
      throw ContractError("split: series has " + std::to_string(len) +
                          " rows, ETT month split needs " + std::to_string(test_end));
    }
  }

  if (train_end <= lookback) {
    throw ContractError("split: train segment too short (" +
                        std::to_string(train_end) + " rows, lookback " +
                        std::to_string(lookback) + ")");
  }
  if (val_end <= train_end) throw ContractError("split: validation segment is empty");
  if (test_end <= val_end) throw ContractError("split: test segment is empty");

  SplitResult out;
  out.train = slice_rows_series(series, 0, train_end);
  out.val = slice_rows_series(series, train_end - lookback, val_end);
  out.test = slice_rows_series(series, val_end - lookback, test_end);
  return out;
}

MultivariateSeries synth_generate(const SynthSpec& spec) {
  if (spec.n_variates < 1 || spec.length < 1) {
    throw ContractError("synth_generate: n_variates and length must be positive");
  }
  if (spec.noise_sigma < 0.0) {
    throw ContractError("synth_generate: noise_sigma must be >= 0");
  }

  // Default tone table; periods divide 96 so a standard lookback window
  // holds a whole number of cycles per tone.
  static const std::vector<std::vector<double>> kDefaultPeriods = {
      {24.0, 12.0}, {16.0, 8.0}, {32.0, 48.0}, {96.0, 6.0}};
  static const std::vector<std::vector<double>> kDefaultAmps = {
      {1.0, 0.4}, {1.0, 0.4}, {1.0, 0.4}, {1.0, 0.4}};

  MultivariateSeries series;
  series.values = Tensor::zeros({spec.length, spec.n_variates});

  for (std::size_t v = 0; v < spec.n_variates; ++v) {
    const auto& periods = spec.periods.empty()
                              ? kDefaultPeriods[v % kDefaultPeriods.size()]
                              : spec.periods[v % spec.periods.size()];
    const auto& amps = spec.amplitudes.empty()
                           ? kDefaultAmps[v % kDefaultAmps.size()]
                           : spec.amplitudes[v % spec.amplitudes.size()];

    // Separate per-variate substreams so the clean signal does not depend
    // on whether noise is drawn.
    Rng phase_rng(substream_seed(spec.seed, v, 0x70686173ULL));
    Rng noise_rng(substream_seed(spec.seed, v, 0x6e6f6973ULL));
    std::vector<double> phases(periods.size());
    for (double& p : phases) p = phase_rng.uniform(0.0, 2.0 * kPi);

    for (std::size_t i = 0; i < spec.length; ++i) {
      double val = spec.trend_slope * static_cast<double>(i);
      for (std::size_t k = 0; k < periods.size(); ++k) {
        const double amp = k < amps.size() ? amps[k] : 1.0;
        val += amp * std::sin(2.0 * kPi * static_cast<double>(i) / periods[k] +
                              phases[k]);
      }
      if (spec.noise_sigma > 0.0) val += noise_rng.normal(0.0, spec.noise_sigma);
      series.values.at(i, v) = val;
    }
    series.variate_names.push_back("v" + std::to_string(v));
  }

  series.timestamps.reserve(spec.length);
  for (std::size_t i = 0; i < spec.length; ++i) {
    const std::size_t hour = i % 24;
    const std::size_t day = i / 24;
    char buf[32];
    // Rolling 30-day-month calendar starting 2020-01-01.
    const std::size_t month = day / 30;
    std::snprintf(buf, sizeof(buf), "%04zu-%02zu-%02zu %02zu:00:00",
                  2020 + month / 12, month % 12 + 1, day % 30 + 1, hour);
    series.timestamps.emplace_back(buf);
  }
  return series;
}

}  // namespace daif
