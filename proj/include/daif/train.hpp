#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "daif/data.hpp"
#include "daif/model.hpp"

namespace daif {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 10;
  std::size_t patience = 3;
  std::uint64_t seed = 1;
  std::optional<double> gradient_clip;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double seconds = 0.0;  // wall clock, excluded from deterministic outputs
};

struct EvalReport {
  double mse = 0.0;
  double mae = 0.0;
  std::vector<double> per_horizon_mse;  // length S
  std::vector<double> per_horizon_mae;
  std::size_t window_count = 0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  ModelParams params;  // best-validation parameters
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  double best_val_mse = std::numeric_limits<double>::infinity();
  double wall_seconds = 0.0;
};

/// Mean over all entries of the squared difference; differentiable.
Tensor mse_loss(Tape& tape, const Tensor& pred, const Tensor& target);

double mse_metric(const Tensor& pred, const Tensor& target);
double mae_metric(const Tensor& pred, const Tensor& target);

/// Bias-corrected Adam. State arrays parallel the parameter store; t counts
/// completed steps.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t t = 0;
};

AdamState make_adam_state(const ModelParams& params);
void adam_step(ModelParams& params, const std::vector<std::vector<double>>& grads,
               AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

/// Mini-batch Adam on normalized-space MSE over the original-token outputs.
/// Augmentation is recomputed per window per epoch; stochastic strategies
/// draw their stream from (seed, epoch, window index). Early stopping on
/// validation MSE with the configured patience; returns the best-validation
/// parameters. Throws NumericError naming epoch/batch on divergence.
TrainResult train_model(const MultivariateSeries& train_segment,
                        const MultivariateSeries& val_segment,
                        const ModelConfig& model_config,
                        const TrainConfig& train_config);

/// Mean MSE/MAE over the given raw windows, in normalized space, with the
/// training-time augmentation applied. Metrics are reduced in window-index
/// order, so the report does not depend on the processing order.
EvalReport evaluate(const ModelParams& params, const std::vector<Window>& windows,
                    const ModelConfig& config);

/// Convenience: evaluates every stride-1 window of the segment.
EvalReport evaluate(const ModelParams& params, const MultivariateSeries& segment,
                    const ModelConfig& config);

struct CorrelationResult {
  Tensor matrix;  // (N+M) x (N+M) Pearson correlations
  std::vector<bool> constant_rows;
  std::vector<std::string> labels;
};

/// Pearson correlation matrix over the given equal-length series. Constant
/// rows correlate 0 with everything and are flagged.
CorrelationResult correlation_matrix(const std::vector<std::string>& labels,
                                     const std::vector<std::vector<double>>& rows);

/// Correlations over [original variates; augmented tokens]. Token length
/// must equal the window length.
CorrelationResult correlation_matrix(const Tensor& x, const TokenGroup& group,
                                     const std::vector<std::string>& variate_names);

}  // namespace daif
