#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "daif/train.hpp"

namespace daif {

struct DatasetSpec {
  std::string path;
  std::string name;  // defaults to the file stem
  SplitSpec split;
};

/// Parsed, schema-validated experiment configuration. Unknown keys are
/// rejected with the offending field path.
struct ExperimentConfig {
  int version = 1;
  DatasetSpec dataset;
  std::size_t lookback = 96;
  std::vector<std::size_t> pred_lens = {96};
  std::vector<std::uint64_t> seeds = {1};
  std::string out_dir = "runs/out";
  Backbone backbone = Backbone::Attention;
  std::size_t d_model = 128;
  std::size_t d_ff = 256;
  std::size_t layers = 2;
  std::size_t heads = 8;
  AugmentationConfig augmentation;
  TrainConfig train;

  ModelConfig model_config_for(std::size_t pred_len) const;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config_file(const std::string& path);

/// results.csv schema. Metrics use 6-decimal fixed formatting. The
/// train_seconds column is a deterministic 0.000000 sentinel: wall-clock
/// timing lives only in run.log so identical runs produce identical bytes.
inline constexpr const char* kResultsHeader =
    "dataset,backbone,aug,S,P,K,seed,mse,mae,train_seconds";

struct ResultRow {
  std::string dataset;
  std::string backbone;
  std::string aug;
  std::string horizon;  // prediction length, or "avg"
  std::size_t patch_len = 0;
  std::size_t top_k = 0;
  std::uint64_t seed = 0;
  double mse = 0.0;
  double mae = 0.0;
  double train_seconds = 0.0;
};

std::string format_result_row(const ResultRow& row);

/// Appends the across-horizon average row per (dataset, backbone, aug, seed).
std::vector<ResultRow> with_average_rows(std::vector<ResultRow> rows);

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);

struct TrainCell {
  std::size_t pred_len = 0;
  std::uint64_t seed = 0;
  std::string checkpoint_path;
  std::string history_path;
  ResultRow test_row;
};

struct TrainRunOutput {
  std::vector<TrainCell> cells;
  std::string results_path;
};

/// Trains one cell per (prediction length, seed): checkpoint + history CSV
/// per cell, a rewritten results.csv over all cells, timing in run.log.
TrainRunOutput cmd_train(const ExperimentConfig& config);

/// Validates each checkpoint against the config and dataset, evaluates on
/// the test split, and rewrites results.csv with one row per checkpoint plus
/// average rows.
std::vector<ResultRow> cmd_eval(const std::vector<std::string>& checkpoint_paths,
                                const ExperimentConfig& config);

/// Writes the standardized window, the augmented tokens, and (for groups of
/// window length) a correlation matrix as plot-ready CSVs.
void cmd_augment_preview(const ExperimentConfig& config, std::size_t window_index);

struct BenchRow {
  std::string axis;
  std::size_t value = 0;
  std::uint64_t seed = 0;
  std::size_t tokens = 0;
  double mse = 0.0;
  double mae = 0.0;
  std::string status;  // "ok" or the failure reason
};

/// Sweeps axis "P" (cross-variation patching) or "K" (frequency filtering,
/// including the max-K reference cell) over the given values; one trained
/// and evaluated cell per value per seed. Failed cells are recorded and the
/// sweep continues.
std::vector<BenchRow> cmd_bench(const ExperimentConfig& config,
                                const std::string& axis,
                                const std::vector<std::size_t>& values);

void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows);

/// Generates a synthetic dataset CSV in the standard format.
void cmd_synth(const SynthSpec& spec, const std::string& out_path);

/// Parallel cell cap: DAIF_THREADS, defaulting to the hardware concurrency.
std::size_t max_parallel_cells();

}  // namespace daif
