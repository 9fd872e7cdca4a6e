#include "daif/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <sstream>

#include <nlohmann/json.hpp>

namespace daif {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fixed6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return key == a;
        }) == allowed.end()) {
      throw ConfigError("config: unknown key \"" +
                        (path.empty() ? key : path + "." + key) + "\"");
    }
  }
}

template <typename T>
T get_field(const json& j, const std::string& path, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: field \"" + (path.empty() ? key : path + "." + key) +
                      "\" has the wrong type");
  }
}

// Appends a timestamped line to run.log; the log is the only output that
// carries wall-clock information.
class RunLog {
 public:
  explicit RunLog(const fs::path& dir) : path_(dir / "run.log") {}

  void line(const std::string& msg) {
    std::scoped_lock lock(mu_);
    std::ofstream out(path_, std::ios::app);
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%d %H:%M:%S", std::gmtime(&tt));
    out << stamp << " " << msg << "\n";
  }

 private:
  fs::path path_;
  std::mutex mu_;
};

std::string file_stem(const std::string& path) {
  return fs::path(path).stem().string();
}

std::string cell_base_name(const ExperimentConfig& cfg, std::size_t pred_len,
                           std::uint64_t seed) {
  std::ostringstream os;
  os << cfg.dataset.name << "_" << to_string(cfg.backbone) << "_"
     << to_string(cfg.augmentation.strategy) << "_S" << pred_len << "_seed" << seed;
  return os.str();
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "epoch,train_mse,val_mse,seconds\n";
  for (const auto& e : history) {
    out << e.epoch << ',' << fixed6(e.train_mse) << ',' << fixed6(e.val_mse)
        << ",0.000000\n";
  }
}

void write_matrix_csv(const std::string& path, const Tensor& m,
                      const std::vector<std::string>& col_names,
                      const std::vector<std::string>& row_names = {}) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const bool labeled = !row_names.empty();
  if (labeled) out << "series";
  for (std::size_t c = 0; c < m.cols(); ++c) {
    if (labeled || c > 0) out << ',';
    out << (c < col_names.size() ? col_names[c] : "c" + std::to_string(c));
  }
  out << '\n';
  char buf[40];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (labeled) out << row_names[r];
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (labeled || c > 0) out << ',';
      std::snprintf(buf, sizeof(buf), "%.12g", m.at(r, c));
      out << buf;
    }
    out << '\n';
  }
}

// Runs the cell tasks with at most max_parallel_cells() in flight; results
// land in task order, so output order never depends on scheduling.
void run_cells(std::vector<std::function<void()>>& tasks) {
  const std::size_t cap = std::max<std::size_t>(1, max_parallel_cells());
  std::size_t next = 0;
  std::vector<std::future<void>> inflight;
  while (next < tasks.size() || !inflight.empty()) {
    while (next < tasks.size() && inflight.size() < cap) {
      inflight.push_back(std::async(std::launch::async, tasks[next]));
      ++next;
    }
    inflight.front().get();
    inflight.erase(inflight.begin());
  }
}

}  // namespace

std::size_t max_parallel_cells() {
  if (const char* env = std::getenv("DAIF_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

ModelConfig ExperimentConfig::model_config_for(std::size_t pred_len) const {
  ModelConfig m;
  m.backbone = backbone;
  m.lookback = lookback;
  m.horizon = pred_len;
  m.d_model = d_model;
  m.d_ff = d_ff;
  m.layers = layers;
  m.heads = heads;
  m.augmentation = augmentation;
  return m;
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");

  check_keys(j, "", {"version", "dataset", "lookback", "pred_len", "seeds",
                     "out_dir", "model", "augmentation", "train"});

  ExperimentConfig cfg;
  cfg.version = get_field<int>(j, "", "version", 1);
  if (cfg.version != 1) {
    throw ConfigError("config: unsupported version " + std::to_string(cfg.version));
  }

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    check_keys(d, "dataset", {"path", "name", "split"});
    cfg.dataset.path = get_field<std::string>(d, "dataset", "path", "");
    cfg.dataset.name = get_field<std::string>(d, "dataset", "name", "");
    if (d.contains("split")) {
      const json& s = d.at("split");
      check_keys(s, "dataset.split", {"mode", "train", "val", "test"});
      const std::string mode = get_field<std::string>(s, "dataset.split", "mode", "ratio");
      if (mode == "ratio") {
        cfg.dataset.split.mode = SplitMode::Ratio;
      } else if (mode == "ett_months") {
        cfg.dataset.split.mode = SplitMode::EttMonths;
      } else {
        throw ConfigError("config: dataset.split.mode must be ratio|ett_months");
      }
      cfg.dataset.split.train = get_field<double>(s, "dataset.split", "train", 0.7);
      cfg.dataset.split.val = get_field<double>(s, "dataset.split", "val", 0.1);
      cfg.dataset.split.test = get_field<double>(s, "dataset.split", "test", 0.2);
    }
  }
  if (cfg.dataset.name.empty() && !cfg.dataset.path.empty()) {
    cfg.dataset.name = file_stem(cfg.dataset.path);
  }

  cfg.lookback = get_field<std::size_t>(j, "", "lookback", 96);
  cfg.pred_lens = get_field<std::vector<std::size_t>>(j, "", "pred_len", {96});
  cfg.seeds = get_field<std::vector<std::uint64_t>>(j, "", "seeds", {1});
  cfg.out_dir = get_field<std::string>(j, "", "out_dir", "runs/out");
  if (cfg.lookback < 1) throw ConfigError("config: lookback must be >= 1");
  if (cfg.pred_lens.empty()) throw ConfigError("config: pred_len must be non-empty");
  if (cfg.seeds.empty()) throw ConfigError("config: seeds must be non-empty");

  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, "model", {"backbone", "d_model", "d_ff", "layers", "heads"});
    cfg.backbone = backbone_from_string(
        get_field<std::string>(m, "model", "backbone", "attention"));
    cfg.d_model = get_field<std::size_t>(m, "model", "d_model", 128);
    cfg.d_ff = get_field<std::size_t>(m, "model", "d_ff", 256);
    cfg.layers = get_field<std::size_t>(m, "model", "layers", 2);
    cfg.heads = get_field<std::size_t>(m, "model", "heads", 8);
  }

  if (j.contains("augmentation")) {
    const json& a = j.at("augmentation");
    check_keys(a, "augmentation",
               {"strategy", "patch_len", "top_k", "jitter_sigma", "scaling_sigma",
                "rng_seed", "ff_keep_dc"});
    cfg.augmentation.strategy = augment_strategy_from_string(
        get_field<std::string>(a, "augmentation", "strategy", "none"));
    cfg.augmentation.patch_len = get_field<std::size_t>(a, "augmentation", "patch_len", 16);
    cfg.augmentation.top_k = get_field<std::size_t>(a, "augmentation", "top_k", 5);
    cfg.augmentation.jitter_sigma =
        get_field<double>(a, "augmentation", "jitter_sigma", 0.1);
    cfg.augmentation.scaling_sigma =
        get_field<double>(a, "augmentation", "scaling_sigma", 0.1);
    cfg.augmentation.rng_seed =
        get_field<std::uint64_t>(a, "augmentation", "rng_seed", 0);
    cfg.augmentation.ff_keep_dc = get_field<bool>(a, "augmentation", "ff_keep_dc", false);
    cfg.augmentation.validate();
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "train",
               {"learning_rate", "batch_size", "max_epochs", "patience",
                "gradient_clip"});
    cfg.train.learning_rate = get_field<double>(t, "train", "learning_rate", 1e-4);
    cfg.train.batch_size = get_field<std::size_t>(t, "train", "batch_size", 32);
    cfg.train.max_epochs = get_field<std::size_t>(t, "train", "max_epochs", 10);
    cfg.train.patience = get_field<std::size_t>(t, "train", "patience", 3);
    if (t.contains("gradient_clip") && !t.at("gradient_clip").is_null()) {
      cfg.train.gradient_clip = get_field<double>(t, "train", "gradient_clip", 0.0);
    }
    cfg.train.validate();
  }

  ModelConfig probe = cfg.model_config_for(cfg.pred_lens.front());
  probe.validate();
  return cfg;
}

ExperimentConfig load_experiment_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

std::string format_result_row(const ResultRow& r) {
  std::ostringstream os;
  os << r.dataset << ',' << r.backbone << ',' << r.aug << ',' << r.horizon << ','
     << r.patch_len << ',' << r.top_k << ',' << r.seed << ',' << fixed6(r.mse)
     << ',' << fixed6(r.mae) << ',' << fixed6(r.train_seconds);
  return os.str();
}

std::vector<ResultRow> with_average_rows(std::vector<ResultRow> rows) {
  // Keyed by (dataset, backbone, aug, seed); preserves first-seen order.
  std::vector<std::string> key_order;
  std::map<std::string, std::vector<const ResultRow*>> by_key;
  for (const auto& r : rows) {
    const std::string key = r.dataset + '\t' + r.backbone + '\t' + r.aug + '\t' +
                            std::to_string(r.seed);
    if (by_key.find(key) == by_key.end()) key_order.push_back(key);
    by_key[key].push_back(&r);
  }
  std::vector<ResultRow> avgs;
  for (const auto& key : key_order) {
    const auto& group = by_key[key];
    ResultRow avg = *group.front();
    avg.horizon = "avg";
    avg.mse = avg.mae = avg.train_seconds = 0.0;
    for (const ResultRow* r : group) {
      avg.mse += r->mse;
      avg.mae += r->mae;
    }
    avg.mse /= static_cast<double>(group.size());
    avg.mae /= static_cast<double>(group.size());
    avgs.push_back(avg);
  }
  for (auto& a : avgs) rows.push_back(std::move(a));
  return rows;
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << kResultsHeader << '\n';
  for (const auto& r : rows) out << format_result_row(r) << '\n';
}

TrainRunOutput cmd_train(const ExperimentConfig& config) {
  if (config.dataset.path.empty()) {
    throw ConfigError("config: dataset.path is required for training");
  }
  fs::create_directories(config.out_dir);
  RunLog log(config.out_dir);
  log.line("train start: dataset=" + config.dataset.name +
           " backbone=" + to_string(config.backbone) +
           " aug=" + to_string(config.augmentation.strategy));

  const MultivariateSeries series = load_csv(config.dataset.path);
  const SplitResult splits = split(series, config.dataset.split, config.lookback);

  TrainRunOutput out;
  for (std::size_t pred_len : config.pred_lens) {
    for (std::uint64_t seed : config.seeds) {
      TrainCell cell;
      cell.pred_len = pred_len;
      cell.seed = seed;
      const std::string base = cell_base_name(config, pred_len, seed);
      cell.checkpoint_path =
          (fs::path(config.out_dir) / ("checkpoint_" + base + ".json")).string();
      cell.history_path =
          (fs::path(config.out_dir) / ("history_" + base + ".csv")).string();
      out.cells.push_back(std::move(cell));
    }
  }

  std::vector<std::function<void()>> tasks;
  for (TrainCell& cell : out.cells) {
    tasks.push_back([&cell, &config, &splits, &log]() {
      const ModelConfig model_config = config.model_config_for(cell.pred_len);
      TrainConfig train_config = config.train;
      train_config.seed = cell.seed;

      TrainResult trained =
          train_model(splits.train, splits.val, model_config, train_config);
      save_checkpoint(cell.checkpoint_path, model_config, trained.params, cell.seed);
      write_history_csv(cell.history_path, trained.history);

      EvalReport report = evaluate(trained.params, splits.test, model_config);
      cell.test_row = {config.dataset.name,
                       to_string(config.backbone),
                       to_string(config.augmentation.strategy),
                       std::to_string(cell.pred_len),
                       config.augmentation.patch_len,
                       config.augmentation.top_k,
                       cell.seed,
                       report.mse,
                       report.mae,
                       0.0};
      log.line("cell S=" + std::to_string(cell.pred_len) +
               " seed=" + std::to_string(cell.seed) + " trained in " +
               fixed6(trained.wall_seconds) + "s, eval " +
               fixed6(report.wall_seconds) + "s, test mse " + fixed6(report.mse));
    });
  }
  run_cells(tasks);

  std::vector<ResultRow> rows;
  for (const TrainCell& cell : out.cells) rows.push_back(cell.test_row);
  rows = with_average_rows(std::move(rows));
  out.results_path = (fs::path(config.out_dir) / "results.csv").string();
  write_results_csv(out.results_path, rows);
  log.line("train done: " + std::to_string(out.cells.size()) + " cells");
  return out;
}

std::vector<ResultRow> cmd_eval(const std::vector<std::string>& checkpoint_paths,
                                const ExperimentConfig& config) {
  if (config.dataset.path.empty()) {
    throw ConfigError("config: dataset.path is required for evaluation");
  }
  fs::create_directories(config.out_dir);
  RunLog log(config.out_dir);

  const MultivariateSeries series = load_csv(config.dataset.path);
  const SplitResult splits = split(series, config.dataset.split, config.lookback);

  std::vector<ResultRow> rows;
  for (const std::string& path : checkpoint_paths) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.config.lookback != config.lookback) {
      throw ConfigError("eval: checkpoint lookback " +
                        std::to_string(ck.config.lookback) +
                        " does not match config lookback " +
                        std::to_string(config.lookback));
    }
    if (ck.params.n_variates != series.n_variates()) {
      throw ConfigError("eval: checkpoint has " +
                        std::to_string(ck.params.n_variates) +
                        " variates, dataset has " +
                        std::to_string(series.n_variates()));
    }
    if (ck.config.d_model != config.d_model) {
      throw ConfigError("eval: checkpoint d_model " +
                        std::to_string(ck.config.d_model) +
                        " does not match config d_model " +
                        std::to_string(config.d_model));
    }

    EvalReport report = evaluate(ck.params, splits.test, ck.config);
    rows.push_back({config.dataset.name,
                    to_string(ck.config.backbone),
                    to_string(ck.config.augmentation.strategy),
                    std::to_string(ck.config.horizon),
                    ck.config.augmentation.patch_len,
                    ck.config.augmentation.top_k,
                    ck.train_seed,
                    report.mse,
                    report.mae,
                    0.0});
    log.line("eval " + path + ": mse " + fixed6(report.mse) + ", " +
             std::to_string(report.window_count) + " windows in " +
             fixed6(report.wall_seconds) + "s");
  }

  rows = with_average_rows(std::move(rows));
  write_results_csv((fs::path(config.out_dir) / "results.csv").string(), rows);
  return rows;
}

void cmd_augment_preview(const ExperimentConfig& config, std::size_t window_index) {
  if (config.dataset.path.empty()) {
    throw ConfigError("config: dataset.path is required for augment-preview");
  }
  fs::create_directories(config.out_dir);

  const MultivariateSeries series = load_csv(config.dataset.path);
  const std::size_t count =
      window_count(series.length(), config.lookback, config.lookback);
  if (window_index >= count) {
    throw ContractError("augment-preview: window index " +
                        std::to_string(window_index) + " out of " +
                        std::to_string(count) + " windows");
  }

  // Augmentation operates on the standardized lookback window.
  Window w = standardize(
      window_at(series, window_index, config.lookback, config.lookback));
  const AugmentedTokens aug = augment(w.x, config.augmentation);

  std::vector<std::string> names = series.variate_names;
  write_matrix_csv((fs::path(config.out_dir) / "original.csv").string(), w.x, names);

  for (const auto& group : aug.groups) {
    const std::string tag = to_string(group.tag);
    if (group.token_len == config.lookback) {
      // Same layout as the original window: T rows x N columns.
      Tensor as_window = Tensor::zeros({config.lookback, group.count()});
      for (std::size_t k = 0; k < group.count(); ++k)
        for (std::size_t t = 0; t < config.lookback; ++t)
          as_window.at(t, k) = group.tokens.at(k, t);
      write_matrix_csv(
          (fs::path(config.out_dir) / ("augmented_" + tag + ".csv")).string(),
          as_window, names);
      CorrelationResult corr = correlation_matrix(w.x, group, names);
      write_matrix_csv((fs::path(config.out_dir) / ("corr_" + tag + ".csv")).string(),
                       corr.matrix, corr.labels, corr.labels);
    } else {
      std::vector<std::string> cols;
      for (std::size_t j = 0; j < group.token_len; ++j)
        cols.push_back("x" + std::to_string(j));
      write_matrix_csv(
          (fs::path(config.out_dir) / ("tokens_" + tag + ".csv")).string(),
          group.tokens, cols);
      // Token-to-token correlations; token length differs from the window.
      std::vector<std::vector<double>> token_rows;
      std::vector<std::string> labels;
      for (std::size_t k = 0; k < group.count(); ++k) {
        std::vector<double> row(group.token_len);
        for (std::size_t j = 0; j < group.token_len; ++j)
          row[j] = group.tokens.at(k, j);
        token_rows.push_back(std::move(row));
        labels.push_back(tag + std::to_string(k));
      }
      CorrelationResult corr = correlation_matrix(labels, token_rows);
      write_matrix_csv((fs::path(config.out_dir) / ("corr_" + tag + ".csv")).string(),
                       corr.matrix, corr.labels, corr.labels);
    }
  }
}

std::vector<BenchRow> cmd_bench(const ExperimentConfig& config,
                                const std::string& axis,
                                const std::vector<std::size_t>& values) {
  if (axis != "P" && axis != "K") {
    throw ConfigError("bench: sweep axis must be P or K, got \"" + axis + "\"");
  }
  if (values.empty()) throw ConfigError("bench: sweep values must be non-empty");
  if (config.dataset.path.empty()) {
    throw ConfigError("config: dataset.path is required for bench");
  }
  fs::create_directories(config.out_dir);
  RunLog log(config.out_dir);

  const MultivariateSeries series = load_csv(config.dataset.path);
  const SplitResult splits = split(series, config.dataset.split, config.lookback);

  std::vector<std::size_t> sweep_values = values;
  if (axis == "K") {
    // Reference cell: maximum K keeps every frequency.
    const std::size_t max_k = config.lookback / 2 + 1;
    if (std::find(sweep_values.begin(), sweep_values.end(), max_k) ==
        sweep_values.end()) {
      sweep_values.push_back(max_k);
    }
  }

  std::vector<BenchRow> rows;
  for (std::size_t value : sweep_values) {
    for (std::uint64_t seed : config.seeds) {
      BenchRow row;
      row.axis = axis;
      row.value = value;
      row.seed = seed;
      row.tokens = axis == "P" ? config.lookback / value : series.n_variates();
      rows.push_back(row);
    }
  }

  std::vector<std::function<void()>> tasks;
  for (BenchRow& row : rows) {
    tasks.push_back([&row, &config, &splits, &axis, &log]() {
      try {
        ModelConfig model_config = config.model_config_for(config.pred_lens.front());
        if (axis == "P") {
          model_config.augmentation.strategy = AugmentStrategy::CvP;
          model_config.augmentation.patch_len = row.value;
        } else {
          model_config.augmentation.strategy = AugmentStrategy::FF;
          model_config.augmentation.top_k = row.value;
        }
        TrainConfig train_config = config.train;
        train_config.seed = row.seed;

        TrainResult trained =
            train_model(splits.train, splits.val, model_config, train_config);
        EvalReport report = evaluate(trained.params, splits.test, model_config);
        row.mse = report.mse;
        row.mae = report.mae;
        row.status = "ok";
        log.line("bench " + row.axis + "=" + std::to_string(row.value) +
                 " seed=" + std::to_string(row.seed) + ": mse " + fixed6(row.mse));
      } catch (const std::exception& e) {
        row.status = std::string("failed: ") + e.what();
        log.line("bench " + row.axis + "=" + std::to_string(row.value) +
                 " seed=" + std::to_string(row.seed) + " " + row.status);
      }
    });
  }
  run_cells(tasks);

  std::stable_sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
    if (a.axis != b.axis) return a.axis < b.axis;
    if (a.value != b.value) return a.value < b.value;
    return a.seed < b.seed;
  });
  write_bench_csv((fs::path(config.out_dir) / "sweep.csv").string(), rows);
  return rows;
}

void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "axis,value,seed,tokens,mse,mae,status\n";
  for (const auto& r : rows) {
    out << r.axis << ',' << r.value << ',' << r.seed << ',' << r.tokens << ',';
    if (r.status == "ok") {
      out << fixed6(r.mse) << ',' << fixed6(r.mae);
    } else {
      out << ',';
    }
    out << ',' << '"' << r.status << '"' << '\n';
  }
}

void cmd_synth(const SynthSpec& spec, const std::string& out_path) {
  const fs::path parent = fs::path(out_path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  write_csv(synth_generate(spec), out_path);
}

}  // namespace daif
