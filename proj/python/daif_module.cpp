// Python bindings for the core operations: spectral transforms, augmentation
// strategies, synthetic data, training and evaluation.

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "daif/harness.hpp"
#include "daif/spectral.hpp"

namespace py = pybind11;
using namespace daif;

namespace {

Tensor matrix_from_numpy(const py::array_t<double, py::array::c_style |
                                                       py::array::forcecast>& arr) {
  if (arr.ndim() != 2) throw ContractError("expected a 2-D array");
  const auto r = static_cast<std::size_t>(arr.shape(0));
  const auto c = static_cast<std::size_t>(arr.shape(1));
  Tensor t = Tensor::zeros({r, c});
  std::copy(arr.data(), arr.data() + r * c, t.data.begin());
  return t;
}

py::array_t<double> matrix_to_numpy(const Tensor& t) {
  py::array_t<double> out({t.rows(), t.cols()});
  std::copy(t.data.begin(), t.data.end(), out.mutable_data());
  return out;
}

py::array_t<double> vector_to_numpy(const std::vector<double>& v) {
  py::array_t<double> out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::array_t<std::complex<double>> cvector_to_numpy(
    const std::vector<std::complex<double>>& v) {
  py::array_t<std::complex<double>> out(
      std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<std::complex<double>> cvector_from_numpy(
    const py::array_t<std::complex<double>,
                      py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 1) throw ContractError("expected a 1-D complex array");
  return {arr.data(), arr.data() + arr.shape(0)};
}

std::vector<double> vector_from_numpy(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 1) throw ContractError("expected a 1-D array");
  return {arr.data(), arr.data() + arr.shape(0)};
}

AugmentationConfig config_from_kwargs(const std::string& strategy,
                                      std::size_t patch_len, std::size_t top_k,
                                      double jitter_sigma, double scaling_sigma,
                                      std::uint64_t rng_seed, bool ff_keep_dc) {
  AugmentationConfig cfg;
  cfg.strategy = augment_strategy_from_string(strategy);
  cfg.patch_len = patch_len;
  cfg.top_k = top_k;
  cfg.jitter_sigma = jitter_sigma;
  cfg.scaling_sigma = scaling_sigma;
  cfg.rng_seed = rng_seed;
  cfg.ff_keep_dc = ff_keep_dc;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_daif, m) {
  m.doc() = "Inverted-framework multivariate forecasting with on-the-fly "
            "augmentation";

  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_IOError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  // Spectral operations.
  m.def(
      "rdft",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
        return cvector_to_numpy(spectral::rdft(vector_from_numpy(x)).coefficients);
      },
      py::arg("x"),
      "One-sided unnormalized DFT of a real series (floor(T/2)+1 bins).");

  m.def(
      "irdft",
      [](const py::array_t<std::complex<double>,
                           py::array::c_style | py::array::forcecast>& coeffs,
         std::size_t length) {
        spectral::Spectrum s;
        s.original_length = length;
        s.coefficients = cvector_from_numpy(coeffs);
        return vector_to_numpy(spectral::irdft(s));
      },
      py::arg("coefficients"), py::arg("length"),
      "Inverse of rdft with 1/T normalization.");

  m.def(
      "amplitude",
      [](const py::array_t<std::complex<double>,
                           py::array::c_style | py::array::forcecast>& coeffs,
         std::size_t length) {
        spectral::Spectrum s;
        s.original_length = length;
        s.coefficients = cvector_from_numpy(coeffs);
        return vector_to_numpy(spectral::amplitude(s));
      },
      py::arg("coefficients"), py::arg("length"));

  m.def(
      "top_k_indices",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& amps,
         std::size_t k) { return spectral::top_k_indices(vector_from_numpy(amps), k); },
      py::arg("amplitudes"), py::arg("k"),
      "Indices of the k largest amplitudes (ties toward lower frequencies).");

  m.def(
      "frequency_filter",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         std::size_t k, bool always_keep_dc) {
        return vector_to_numpy(
            spectral::frequency_filter(vector_from_numpy(x), k, always_keep_dc));
      },
      py::arg("x"), py::arg("k"), py::arg("always_keep_dc") = false,
      "Reconstruction from the k highest-amplitude frequency components.");

  // Augmentation strategies. Windows are T x N (rows = timesteps).
  m.def(
      "cross_variation_patch",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         std::size_t patch_len) {
        return matrix_to_numpy(
            cross_variation_patch(matrix_from_numpy(x), patch_len).groups[0].tokens);
      },
      py::arg("window"), py::arg("patch_len"),
      "floor(T/P) tokens of length P*N, flattened time-major.");

  m.def(
      "frequency_filter_augment",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         std::size_t top_k, bool keep_dc) {
        const Tensor tokens =
            frequency_filter_augment(matrix_from_numpy(x), top_k, keep_dc)
                .groups[0]
                .tokens;
        // Return in the window layout (T x N).
        Tensor out = Tensor::zeros({tokens.cols(), tokens.rows()});
        for (std::size_t i = 0; i < tokens.rows(); ++i)
          for (std::size_t j = 0; j < tokens.cols(); ++j)
            out.at(j, i) = tokens.at(i, j);
        return matrix_to_numpy(out);
      },
      py::arg("window"), py::arg("top_k"), py::arg("keep_dc") = false,
      "Per-variate top-K frequency reconstruction, same shape as the input.");

  m.def(
      "augment",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         const std::string& strategy, std::size_t patch_len, std::size_t top_k,
         double jitter_sigma, double scaling_sigma, std::uint64_t rng_seed,
         bool ff_keep_dc) {
        const AugmentationConfig cfg =
            config_from_kwargs(strategy, patch_len, top_k, jitter_sigma,
                               scaling_sigma, rng_seed, ff_keep_dc);
        const AugmentedTokens aug = augment(matrix_from_numpy(x), cfg);
        py::list groups;
        for (const auto& g : aug.groups) {
          groups.append(py::make_tuple(to_string(g.tag), matrix_to_numpy(g.tokens)));
        }
        return groups;
      },
      py::arg("window"), py::arg("strategy"), py::arg("patch_len") = 16,
      py::arg("top_k") = 5, py::arg("jitter_sigma") = 0.1,
      py::arg("scaling_sigma") = 0.1, py::arg("rng_seed") = 0,
      py::arg("ff_keep_dc") = false,
      "Token groups for a strategy, as (tag, tokens) pairs with M x J tokens.");

  m.def(
      "correlation_matrix",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         const py::array_t<double, py::array::c_style | py::array::forcecast>&
             tokens) {
        TokenGroup g;
        g.tag = AugmentStrategy::FF;
        g.tokens = matrix_from_numpy(tokens);
        g.token_len = g.tokens.cols();
        const CorrelationResult res =
            correlation_matrix(matrix_from_numpy(x), g, {});
        return py::make_tuple(matrix_to_numpy(res.matrix), res.labels);
      },
      py::arg("window"), py::arg("tokens"),
      "Pearson correlations over [variates; tokens] rows.");

  // Data pipeline.
  m.def(
      "synth_generate",
      [](std::size_t n_variates, std::size_t length, double noise_sigma,
         double trend_slope, std::uint64_t seed) {
        SynthSpec spec;
        spec.n_variates = n_variates;
        spec.length = length;
        spec.noise_sigma = noise_sigma;
        spec.trend_slope = trend_slope;
        spec.seed = seed;
        const MultivariateSeries s = synth_generate(spec);
        return py::make_tuple(matrix_to_numpy(s.values), s.variate_names,
                              s.timestamps);
      },
      py::arg("n_variates") = 4, py::arg("length") = 4000,
      py::arg("noise_sigma") = 0.1, py::arg("trend_slope") = 0.0,
      py::arg("seed") = 1,
      "Seeded sum-of-sinusoids series: (values, names, timestamps).");

  m.def(
      "load_csv",
      [](const std::string& path) {
        const MultivariateSeries s = load_csv(path);
        return py::make_tuple(matrix_to_numpy(s.values), s.variate_names,
                              s.timestamps);
      },
      py::arg("path"), "Loads the standard CSV layout: (values, names, timestamps).");

  m.def(
      "write_csv",
      [](const std::string& path,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& values,
         const std::vector<std::string>& names,
         const std::vector<std::string>& timestamps) {
        MultivariateSeries s;
        s.values = matrix_from_numpy(values);
        s.variate_names = names;
        s.timestamps = timestamps;
        write_csv(s, path);
      },
      py::arg("path"), py::arg("values"), py::arg("names"),
      py::arg("timestamps") = std::vector<std::string>{});

  // Training, evaluation, prediction.
  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const ExperimentConfig cfg = parse_experiment_config(config_json);
        const TrainRunOutput out = cmd_train(cfg);
        py::list cells;
        for (const auto& cell : out.cells) {
          py::dict d;
          d["pred_len"] = cell.pred_len;
          d["seed"] = cell.seed;
          d["checkpoint"] = cell.checkpoint_path;
          d["history"] = cell.history_path;
          d["mse"] = cell.test_row.mse;
          d["mae"] = cell.test_row.mae;
          cells.append(d);
        }
        py::dict result;
        result["cells"] = cells;
        result["results_csv"] = out.results_path;
        return result;
      },
      py::arg("config_json"),
      "Trains one cell per (pred_len, seed) from an experiment config JSON "
      "string; returns checkpoint paths and test metrics.");

  m.def(
      "predict",
      [](const std::string& checkpoint_path,
         const py::array_t<double, py::array::c_style | py::array::forcecast>&
             window) {
        const Checkpoint ck = load_checkpoint(checkpoint_path);
        Window w;
        w.x = matrix_from_numpy(window);
        w.y = Tensor::zeros({ck.config.horizon, w.x.cols()});
        const Window norm = standardize(w);
        Tape tape;
        BoundParams bound = bind_constant(ck.params);
        const Tensor pred = forward(tape, bound, norm.x, ck.config);
        const Tensor scaled = destandardize_prediction(pred, norm);
        // S x N, matching the input layout.
        Tensor out = Tensor::zeros({ck.config.horizon, w.x.cols()});
        for (std::size_t v = 0; v < scaled.rows(); ++v)
          for (std::size_t h = 0; h < scaled.cols(); ++h)
            out.at(h, v) = scaled.at(v, h);
        return matrix_to_numpy(out);
      },
      py::arg("checkpoint"), py::arg("window"),
      "Forecasts S future steps from a raw T x N lookback window; returns "
      "S x N in data scale.");

  m.attr("__version__") = "0.1.0";
}
