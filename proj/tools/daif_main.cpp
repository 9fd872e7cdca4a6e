// daif: train, evaluate and inspect inverted-framework forecasters with
// on-the-fly augmentation.
//
// Exit codes: 0 success, 2 configuration/validation, 3 numeric failure,
// 4 I/O.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "daif/harness.hpp"

namespace {

struct Overrides {
  std::optional<std::string> out_dir;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::string> strategy;
  std::optional<std::string> backbone;
  std::optional<std::vector<std::size_t>> pred_lens;
  std::optional<std::size_t> patch_len;
  std::optional<std::size_t> top_k;
  std::optional<std::size_t> lookback;
  std::optional<std::string> dataset_path;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--out", ov.out_dir, "Output directory (overrides config)");
  cmd->add_option("--seeds", ov.seeds, "Seed list, e.g. 1,2,3")->delimiter(',');
  cmd->add_option("--strategy", ov.strategy,
                  "Augmentation strategy {none,cvp,ff,compound,jitter,scaling}");
  cmd->add_option("--backbone", ov.backbone, "Backbone {attention,mlp}");
  cmd->add_option("--pred-len", ov.pred_lens, "Prediction lengths, e.g. 96,192")
      ->delimiter(',');
  cmd->add_option("--patch-len", ov.patch_len, "Cross-variation patch length P");
  cmd->add_option("--top-k", ov.top_k, "Frequency filtering top-K");
  cmd->add_option("--lookback", ov.lookback, "Lookback length T");
  cmd->add_option("--dataset", ov.dataset_path, "Dataset CSV path (overrides config)");
}

daif::ExperimentConfig resolve_config(const std::string& config_path,
                                      const Overrides& ov) {
  daif::ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = daif::load_experiment_config_file(config_path);
  }
  if (ov.out_dir) cfg.out_dir = *ov.out_dir;
  if (ov.seeds) cfg.seeds = *ov.seeds;
  if (ov.strategy) {
    cfg.augmentation.strategy = daif::augment_strategy_from_string(*ov.strategy);
  }
  if (ov.backbone) cfg.backbone = daif::backbone_from_string(*ov.backbone);
  if (ov.pred_lens) cfg.pred_lens = *ov.pred_lens;
  if (ov.patch_len) cfg.augmentation.patch_len = *ov.patch_len;
  if (ov.top_k) cfg.augmentation.top_k = *ov.top_k;
  if (ov.lookback) cfg.lookback = *ov.lookback;
  if (ov.dataset_path) {
    cfg.dataset.path = *ov.dataset_path;
    cfg.dataset.name = std::filesystem::path(*ov.dataset_path).stem().string();
  }
  return cfg;
}

// "P=8,12,16,24" -> axis and value list.
std::pair<std::string, std::vector<std::size_t>> parse_sweep(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) {
    throw daif::ConfigError("--sweep expects AXIS=LIST, got \"" + s + "\"");
  }
  const std::string axis = s.substr(0, eq);
  std::vector<std::size_t> values;
  std::string rest = s.substr(eq + 1);
  std::size_t pos = 0;
  while (pos < rest.size()) {
    std::size_t comma = rest.find(',', pos);
    if (comma == std::string::npos) comma = rest.size();
    const std::string tok = rest.substr(pos, comma - pos);
    try {
      values.push_back(static_cast<std::size_t>(std::stoull(tok)));
    } catch (const std::exception&) {
      throw daif::ConfigError("--sweep: bad value \"" + tok + "\"");
    }
    pos = comma + 1;
  }
  return {axis, values};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverted-framework time-series forecasting with on-the-fly "
               "augmentation"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;

  auto* train_cmd = app.add_subcommand("train", "Train one cell per (S, seed)");
  train_cmd->add_option("--config", config_path, "Experiment config JSON")->required();
  add_override_flags(train_cmd, ov);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate checkpoints on the test split");
  std::vector<std::string> checkpoints;
  eval_cmd->add_option("--config", config_path, "Experiment config JSON")->required();
  eval_cmd->add_option("checkpoints", checkpoints, "Checkpoint files")->required();
  add_override_flags(eval_cmd, ov);

  auto* preview_cmd =
      app.add_subcommand("augment-preview", "Dump augmented tokens for one window");
  std::size_t window_index = 0;
  preview_cmd->add_option("--config", config_path, "Experiment config JSON");
  preview_cmd->add_option("--window", window_index, "Window index");
  add_override_flags(preview_cmd, ov);

  auto* bench_cmd = app.add_subcommand("bench", "Hyperparameter sweep (P or K)");
  std::string sweep_arg;
  bench_cmd->add_option("--config", config_path, "Experiment config JSON")->required();
  bench_cmd->add_option("--sweep", sweep_arg, "Sweep axis, e.g. P=8,12,16,24")
      ->required();
  add_override_flags(bench_cmd, ov);

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset CSV");
  daif::SynthSpec synth_spec;
  std::string synth_out = "synth.csv";
  synth_cmd->add_option("--out", synth_out, "Output CSV path");
  synth_cmd->add_option("--n-variates", synth_spec.n_variates, "Number of variates");
  synth_cmd->add_option("--length", synth_spec.length, "Number of rows");
  synth_cmd->add_option("--noise-sigma", synth_spec.noise_sigma, "Noise stddev");
  synth_cmd->add_option("--trend", synth_spec.trend_slope, "Linear trend slope");
  synth_cmd->add_option("--seed", synth_spec.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train_cmd->parsed()) {
      daif::ExperimentConfig cfg = resolve_config(config_path, ov);
      daif::TrainRunOutput out = daif::cmd_train(cfg);
      for (const auto& cell : out.cells) {
        std::printf("S=%zu seed=%llu mse=%.6f mae=%.6f -> %s\n", cell.pred_len,
                    static_cast<unsigned long long>(cell.seed), cell.test_row.mse,
                    cell.test_row.mae, cell.checkpoint_path.c_str());
      }
      std::printf("results: %s\n", out.results_path.c_str());
    } else if (eval_cmd->parsed()) {
      daif::ExperimentConfig cfg = resolve_config(config_path, ov);
      const auto rows = daif::cmd_eval(checkpoints, cfg);
      std::printf("%s\n", daif::kResultsHeader);
      for (const auto& row : rows) std::printf("%s\n", daif::format_result_row(row).c_str());
    } else if (preview_cmd->parsed()) {
      daif::ExperimentConfig cfg = resolve_config(config_path, ov);
      daif::cmd_augment_preview(cfg, window_index);
      std::printf("preview written to %s\n", cfg.out_dir.c_str());
    } else if (bench_cmd->parsed()) {
      daif::ExperimentConfig cfg = resolve_config(config_path, ov);
      const auto [axis, values] = parse_sweep(sweep_arg);
      const auto rows = daif::cmd_bench(cfg, axis, values);
      for (const auto& row : rows) {
        std::printf("%s=%zu seed=%llu tokens=%zu %s mse=%.6f mae=%.6f\n",
                    row.axis.c_str(), row.value,
                    static_cast<unsigned long long>(row.seed), row.tokens,
                    row.status.c_str(), row.mse, row.mae);
      }
    } else if (synth_cmd->parsed()) {
      daif::cmd_synth(synth_spec, synth_out);
      std::printf("wrote %s\n", synth_out.c_str());
    }
  } catch (const daif::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const daif::ContractError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const daif::NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const daif::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const daif::DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
