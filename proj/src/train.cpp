#include "daif/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "daif/rng.hpp"

namespace daif {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Tensor transpose_to_tokens(const Tensor& y) {
  const std::size_t s = y.rows(), n = y.cols();
  Tensor out = Tensor::zeros({n, s});
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = y.at(i, j);
  return out;
}

// Deterministic Fisher-Yates shuffle.
void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = rng.next_u64() % i;
    std::swap(idx[i - 1], idx[j]);
  }
}

constexpr std::uint64_t kEvalStreamTag = 0x6576616cULL;  // "eval"

}  // namespace

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw ConfigError("train: learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (gradient_clip.has_value() && *gradient_clip <= 0.0) {
    throw ConfigError("train: gradient_clip must be > 0 when set");
  }
}

Tensor mse_loss(Tape& tape, const Tensor& pred, const Tensor& target) {
  if (pred.shape != target.shape) {
    throw ShapeError("mse_loss: shape mismatch " + shape_str(pred.shape) + " vs " +
                     shape_str(target.shape));
  }
  Tensor diff = tape.sub(pred, target);
  return tape.mean_all(tape.mul(diff, diff));
}

double mse_metric(const Tensor& pred, const Tensor& target) {
  if (pred.shape != target.shape) {
    throw ShapeError("mse_metric: shape mismatch " + shape_str(pred.shape) + " vs " +
                     shape_str(target.shape));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

double mae_metric(const Tensor& pred, const Tensor& target) {
  if (pred.shape != target.shape) {
    throw ShapeError("mae_metric: shape mismatch " + shape_str(pred.shape) + " vs " +
                     shape_str(target.shape));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    acc += std::abs(pred.data[i] - target.data[i]);
  }
  return acc / static_cast<double>(pred.size());
}

AdamState make_adam_state(const ModelParams& params) {
  AdamState st;
  st.m.resize(params.store.size());
  st.v.resize(params.store.size());
  for (std::size_t i = 0; i < params.store.size(); ++i) {
    st.m[i].assign(params.store.entries[i].value.size(), 0.0);
    st.v[i].assign(params.store.entries[i].value.size(), 0.0);
  }
  return st;
}

void adam_step(ModelParams& params, const std::vector<std::vector<double>>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps) {
  if (grads.size() != params.store.size() || state.m.size() != params.store.size()) {
    throw ContractError("adam_step: gradient/state count does not match parameters");
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(beta1, t);
  const double bc2 = 1.0 - std::pow(beta2, t);
  for (std::size_t p = 0; p < params.store.size(); ++p) {
    Tensor& w = params.store.entries[p].value;
    const auto& g = grads[p];
    if (g.size() != w.size()) {
      throw ContractError("adam_step: gradient size mismatch for \"" +
                          params.store.entries[p].name + "\"");
    }
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

namespace {

struct WindowMetrics {
  std::size_t index = 0;
  double mse = 0.0;
  double mae = 0.0;
  std::vector<double> hor_mse;
  std::vector<double> hor_mae;
};

EvalReport eval_windows(const ModelParams& params, const std::vector<Window>& windows,
                        const ModelConfig& config) {
  if (windows.empty()) throw ContractError("evaluate: no windows");
  const std::size_t s = config.horizon;

  std::vector<WindowMetrics> per_window;
  per_window.reserve(windows.size());
  for (const Window& raw : windows) {
    const Window w = standardize(raw);
    Tape tape;
    BoundParams bound = bind_constant(params);
    Tensor pred =
        forward(tape, bound, w.x, config, nullptr,
                substream_seed(config.augmentation.rng_seed, kEvalStreamTag, w.index));
    Tensor target = transpose_to_tokens(w.y);

    WindowMetrics m;
    m.index = w.index;
    m.mse = mse_metric(pred, target);
    m.mae = mae_metric(pred, target);
    m.hor_mse.assign(s, 0.0);
    m.hor_mae.assign(s, 0.0);
    const std::size_t n = pred.rows();
    for (std::size_t h = 0; h < s; ++h) {
      double m2 = 0.0, m1 = 0.0;
      for (std::size_t v = 0; v < n; ++v) {
        const double d = pred.at(v, h) - target.at(v, h);
        m2 += d * d;
        m1 += std::abs(d);
      }
      m.hor_mse[h] = m2 / static_cast<double>(n);
      m.hor_mae[h] = m1 / static_cast<double>(n);
    }
    per_window.push_back(std::move(m));
  }

  // Fixed reduction order keyed on the window index.
  std::stable_sort(per_window.begin(), per_window.end(),
                   [](const WindowMetrics& a, const WindowMetrics& b) {
                     return a.index < b.index;
                   });

  EvalReport report;
  report.per_horizon_mse.assign(s, 0.0);
  report.per_horizon_mae.assign(s, 0.0);
  for (const auto& m : per_window) {
    report.mse += m.mse;
    report.mae += m.mae;
    for (std::size_t h = 0; h < s; ++h) {
      report.per_horizon_mse[h] += m.hor_mse[h];
      report.per_horizon_mae[h] += m.hor_mae[h];
    }
  }
  const double denom = static_cast<double>(per_window.size());
  report.mse /= denom;
  report.mae /= denom;
  for (std::size_t h = 0; h < s; ++h) {
    report.per_horizon_mse[h] /= denom;
    report.per_horizon_mae[h] /= denom;
  }
  report.window_count = per_window.size();
  return report;
}

double eval_segment_mse(const ModelParams& params, const MultivariateSeries& segment,
                        const ModelConfig& config) {
  const std::size_t count =
      window_count(segment.length(), config.lookback, config.horizon);
  double mse_sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const Window w =
        standardize(window_at(segment, i, config.lookback, config.horizon));
    Tape tape;
    BoundParams bound = bind_constant(params);
    Tensor pred =
        forward(tape, bound, w.x, config, nullptr,
                substream_seed(config.augmentation.rng_seed, kEvalStreamTag, w.index));
    mse_sum += mse_metric(pred, transpose_to_tokens(w.y));
  }
  return mse_sum / static_cast<double>(count);
}

}  // namespace

TrainResult train_model(const MultivariateSeries& train_segment,
                        const MultivariateSeries& val_segment,
                        const ModelConfig& model_config,
                        const TrainConfig& train_config) {
  model_config.validate();
  train_config.validate();
  const auto t0 = Clock::now();

  const std::size_t train_windows = window_count(
      train_segment.length(), model_config.lookback, model_config.horizon);
  window_count(val_segment.length(), model_config.lookback, model_config.horizon);

  ModelParams params = init_params(model_config, train_segment.n_variates(),
                                   train_config.seed);
  AdamState adam = make_adam_state(params);

  TrainResult result;
  std::size_t epochs_without_improvement = 0;

  std::vector<std::size_t> order(train_windows);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < train_config.max_epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    Rng shuffle_rng(substream_seed(train_config.seed, epoch, 0x73687566ULL));
    shuffle_indices(order, shuffle_rng);

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t at = 0; at < train_windows; at += train_config.batch_size) {
      const std::size_t batch_end =
          std::min(at + train_config.batch_size, train_windows);
      const std::size_t batch_count = batch_end - at;

      Tape tape;
      BoundParams bound = bind(tape, params);
      Tensor total;
      for (std::size_t b = at; b < batch_end; ++b) {
        const std::size_t wi = order[b];
        Window w = standardize(
            window_at(train_segment, wi, model_config.lookback, model_config.horizon));
        Tensor pred = forward(tape, bound, w.x, model_config, nullptr,
                              substream_seed(train_config.seed, epoch, wi));
        Tensor loss = mse_loss(tape, pred, transpose_to_tokens(w.y));
        total = (b == at) ? loss : tape.add(total, loss);
      }
      Tensor batch_loss = tape.scale(total, 1.0 / static_cast<double>(batch_count));
      const double loss_value = batch_loss.item();
      if (!std::isfinite(loss_value)) {
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
      loss_sum += loss_value * static_cast<double>(batch_count);

      tape.backward(batch_loss);
      std::vector<std::vector<double>> grads(params.store.size());
      for (std::size_t p = 0; p < params.store.size(); ++p) {
        auto g = tape.grad(bound.leaf[p]);
        grads[p].assign(g.begin(), g.end());
      }
      if (train_config.gradient_clip.has_value()) {
        double norm_sq = 0.0;
        for (const auto& g : grads)
          for (double v : g) norm_sq += v * v;
        const double norm = std::sqrt(norm_sq);
        if (norm > *train_config.gradient_clip) {
          const double scale = *train_config.gradient_clip / norm;
          for (auto& g : grads)
            for (double& v : g) v *= scale;
        }
      }
      adam_step(params, grads, adam, train_config.learning_rate);
      ++batch_index;
    }

    const double train_mse = loss_sum / static_cast<double>(train_windows);
    const double val_mse = eval_segment_mse(params, val_segment, model_config);
    if (!std::isfinite(val_mse)) {
      throw NumericError("training diverged: non-finite validation MSE at epoch " +
                         std::to_string(epoch));
    }

    result.history.push_back(
        {epoch, train_mse, val_mse, seconds_since(epoch_start)});

    if (val_mse < result.best_val_mse) {
      result.best_val_mse = val_mse;
      result.best_epoch = epoch;
      result.params = params;
      epochs_without_improvement = 0;
    } else {
      ++epochs_without_improvement;
      if (epochs_without_improvement > train_config.patience) break;
    }
  }

  result.wall_seconds = seconds_since(t0);
  return result;
}

EvalReport evaluate(const ModelParams& params, const std::vector<Window>& windows,
                    const ModelConfig& config) {
  const auto t0 = Clock::now();
  EvalReport report = eval_windows(params, windows, config);
  report.wall_seconds = seconds_since(t0);
  return report;
}

EvalReport evaluate(const ModelParams& params, const MultivariateSeries& segment,
                    const ModelConfig& config) {
  return evaluate(params, sliding_windows(segment, config.lookback, config.horizon),
                  config);
}

CorrelationResult correlation_matrix(const std::vector<std::string>& labels,
                                     const std::vector<std::vector<double>>& rows) {
  const std::size_t total = rows.size();
  if (total == 0) throw ContractError("correlation_matrix: no series given");
  const std::size_t t = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != t) {
      throw ContractError("correlation_matrix: series lengths differ, " +
                          std::to_string(r.size()) + " vs " + std::to_string(t));
    }
  }
  if (labels.size() != total) {
    throw ContractError("correlation_matrix: label count does not match series count");
  }

  CorrelationResult res;
  res.labels = labels;
  std::vector<double> mean(total, 0.0), sd(total, 0.0);
  res.constant_rows.assign(total, false);
  for (std::size_t r = 0; r < total; ++r) {
    double mu = 0.0;
    for (double v : rows[r]) mu += v;
    mu /= static_cast<double>(t);
    double var = 0.0;
    for (double v : rows[r]) var += (v - mu) * (v - mu);
    var /= static_cast<double>(t);
    mean[r] = mu;
    sd[r] = std::sqrt(var);
    res.constant_rows[r] = sd[r] <= 1e-12 * std::max(1.0, std::abs(mu));
  }

  res.matrix = Tensor::zeros({total, total});
  for (std::size_t a = 0; a < total; ++a) {
    for (std::size_t b = a; b < total; ++b) {
      double corr = 0.0;
      if (!res.constant_rows[a] && !res.constant_rows[b]) {
        if (a == b) {
          corr = 1.0;
        } else {
          double cov = 0.0;
          for (std::size_t i = 0; i < t; ++i) {
            cov += (rows[a][i] - mean[a]) * (rows[b][i] - mean[b]);
          }
          cov /= static_cast<double>(t);
          corr = cov / (sd[a] * sd[b]);
        }
      }
      res.matrix.at(a, b) = corr;
      res.matrix.at(b, a) = corr;
    }
  }
  return res;
}

CorrelationResult correlation_matrix(const Tensor& x, const TokenGroup& group,
                                     const std::vector<std::string>& variate_names) {
  const std::size_t t = x.rows(), n = x.cols();
  if (group.count() > 0 && group.token_len != t) {
    throw ContractError("correlation_matrix: tokens of length " +
                        std::to_string(group.token_len) +
                        " cannot be compared with series of length " +
                        std::to_string(t));
  }
  const std::size_t m = group.count();

  std::vector<std::vector<double>> rows(n + m, std::vector<double>(t));
  std::vector<std::string> labels;
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t i = 0; i < t; ++i) rows[v][i] = x.at(i, v);
    labels.push_back(v < variate_names.size() ? variate_names[v]
                                              : "v" + std::to_string(v));
  }
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < t; ++i) rows[n + k][i] = group.tokens.at(k, i);
    labels.push_back(to_string(group.tag) + std::to_string(k));
  }
  return correlation_matrix(labels, rows);
}

}  // namespace daif
