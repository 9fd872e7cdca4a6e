#include "daif/model.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "daif/rng.hpp"

namespace daif {

namespace {

using nlohmann::json;

Tensor uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

std::vector<EmbeddingGroupIds> plan_embedding_groups(const ModelConfig& config,
                                                     std::size_t n_variates) {
  std::vector<EmbeddingGroupIds> groups;
  const auto& aug = config.augmentation;
  const std::size_t t = config.lookback;
  switch (aug.strategy) {
    case AugmentStrategy::None:
      break;
    case AugmentStrategy::CvP:
      groups.push_back({AugmentStrategy::CvP, aug.patch_len * n_variates, -1, -1});
      break;
    case AugmentStrategy::FF:
      groups.push_back({AugmentStrategy::FF, t, -1, -1});
      break;
    case AugmentStrategy::Jitter:
      groups.push_back({AugmentStrategy::Jitter, t, -1, -1});
      break;
    case AugmentStrategy::Scaling:
      groups.push_back({AugmentStrategy::Scaling, t, -1, -1});
      break;
    case AugmentStrategy::Compound:
      groups.push_back({AugmentStrategy::CvP, aug.patch_len * n_variates, -1, -1});
      groups.push_back({AugmentStrategy::FF, t, -1, -1});
      break;
  }
  return groups;
}

}  // namespace

std::string to_string(Backbone b) {
  return b == Backbone::Attention ? "attention" : "mlp";
}

Backbone backbone_from_string(const std::string& s) {
  if (s == "attention") return Backbone::Attention;
  if (s == "mlp") return Backbone::TokenIndependentMLP;
  throw ConfigError("unknown backbone \"" + s + "\" (expected attention|mlp)");
}

void ModelConfig::validate() const {
  if (lookback < 1 || horizon < 1 || d_model < 1 || d_ff < 1 || layers < 1) {
    throw ConfigError("model: lookback, horizon, d_model, d_ff and layers must be >= 1");
  }
  if (heads < 1) throw ConfigError("model: heads must be >= 1");
  if (backbone == Backbone::Attention && d_model % heads != 0) {
    throw ConfigError("model: heads=" + std::to_string(heads) +
                      " must divide d_model=" + std::to_string(d_model));
  }
  augmentation.validate();
}

int ParamStore::add(std::string name, Tensor value) {
  entries.push_back({std::move(name), std::move(value)});
  return static_cast<int>(entries.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

ModelParams init_params(const ModelConfig& config, std::size_t n_variates,
                        std::uint64_t seed) {
  config.validate();
  if (n_variates < 1) throw ContractError("init_params: n_variates must be >= 1");

  Rng rng(seed);
  ModelParams p;
  p.n_variates = n_variates;
  const std::size_t t = config.lookback, s = config.horizon;
  const std::size_t d = config.d_model, dff = config.d_ff;

  p.embed_weight = p.store.add("embed.w", uniform_init({t, d}, t, rng));
  p.embed_bias = p.store.add("embed.b", Tensor::zeros({d}));

  for (const auto& g : plan_embedding_groups(config, n_variates)) {
    EmbeddingGroupIds ids = g;
    const std::string base = "embed_aug." + to_string(g.tag);
    ids.weight = p.store.add(base + ".w", uniform_init({g.token_len, d}, g.token_len, rng));
    ids.bias = p.store.add(base + ".b", Tensor::zeros({d}));
    p.embed_aug.push_back(ids);
  }

  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string base = "block" + std::to_string(l) + ".";
    if (config.backbone == Backbone::Attention) {
      AttentionBlockIds b{};
      b.ln1_gain = p.store.add(base + "ln1.g", Tensor::full({d}, 1.0));
      b.ln1_bias = p.store.add(base + "ln1.b", Tensor::zeros({d}));
      b.wq = p.store.add(base + "attn.wq", uniform_init({d, d}, d, rng));
      b.bq = p.store.add(base + "attn.bq", Tensor::zeros({d}));
      b.wk = p.store.add(base + "attn.wk", uniform_init({d, d}, d, rng));
      b.bk = p.store.add(base + "attn.bk", Tensor::zeros({d}));
      b.wv = p.store.add(base + "attn.wv", uniform_init({d, d}, d, rng));
      b.bv = p.store.add(base + "attn.bv", Tensor::zeros({d}));
      b.wo = p.store.add(base + "attn.wo", uniform_init({d, d}, d, rng));
      b.bo = p.store.add(base + "attn.bo", Tensor::zeros({d}));
      b.ln2_gain = p.store.add(base + "ln2.g", Tensor::full({d}, 1.0));
      b.ln2_bias = p.store.add(base + "ln2.b", Tensor::zeros({d}));
      b.w1 = p.store.add(base + "ffn.w1", uniform_init({d, dff}, d, rng));
      b.b1 = p.store.add(base + "ffn.b1", Tensor::zeros({dff}));
      b.w2 = p.store.add(base + "ffn.w2", uniform_init({dff, d}, dff, rng));
      b.b2 = p.store.add(base + "ffn.b2", Tensor::zeros({d}));
      p.attn_blocks.push_back(b);
    } else {
      MlpBlockIds b{};
      b.ln_gain = p.store.add(base + "ln.g", Tensor::full({d}, 1.0));
      b.ln_bias = p.store.add(base + "ln.b", Tensor::zeros({d}));
      b.w1 = p.store.add(base + "ffn.w1", uniform_init({d, dff}, d, rng));
      b.b1 = p.store.add(base + "ffn.b1", Tensor::zeros({dff}));
      b.w2 = p.store.add(base + "ffn.w2", uniform_init({dff, d}, dff, rng));
      b.b2 = p.store.add(base + "ffn.b2", Tensor::zeros({d}));
      p.mlp_blocks.push_back(b);
    }
  }

  p.proj_weight = p.store.add("proj.w", uniform_init({d, s}, d, rng));
  p.proj_bias = p.store.add("proj.b", Tensor::zeros({s}));
  return p;
}

BoundParams bind(Tape& tape, const ModelParams& params) {
  BoundParams b;
  b.params = &params;
  b.leaf.reserve(params.store.size());
  for (const auto& e : params.store.entries) b.leaf.push_back(tape.leaf(e.value));
  return b;
}

BoundParams bind_constant(const ModelParams& params) {
  BoundParams b;
  b.params = &params;
  b.leaf.reserve(params.store.size());
  for (const auto& e : params.store.entries) b.leaf.push_back(e.value.detached());
  return b;
}

Tensor embed_tokens(Tape& tape, const BoundParams& bound, const Tensor& x,
                    const AugmentedTokens& aug) {
  const ModelParams& p = *bound.params;
  if (x.rank() != 2 || x.cols() < 1) {
    throw ContractError("embed_tokens: window must be T x N, got " + shape_str(x.shape));
  }
  const std::size_t t = x.rows(), n = x.cols();
  const Tensor& embed_w = p.store.value(p.embed_weight);
  if (embed_w.rows() != t) {
    throw ConfigError("embed_tokens: window length " + std::to_string(t) +
                      " does not match embedding input length " +
                      std::to_string(embed_w.rows()));
  }

  // Variate tokens: columns of x as rows, then a T->D affine map.
  Tensor xt = Tensor::zeros({n, t});
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < n; ++j) xt.at(j, i) = x.at(i, j);

  std::vector<Tensor> parts;
  parts.push_back(tape.add_rowvec(tape.matmul(xt, bound.leaf[p.embed_weight]),
                                  bound.leaf[p.embed_bias]));

  for (const auto& g : aug.groups) {
    if (g.count() == 0) continue;
    const EmbeddingGroupIds* ids = nullptr;
    for (const auto& cand : p.embed_aug) {
      if (cand.tag == g.tag && cand.token_len == g.token_len) {
        ids = &cand;
        break;
      }
    }
    if (ids == nullptr) {
      throw ConfigError("embed_tokens: no embedding registered for " +
                        to_string(g.tag) + " tokens of length " +
                        std::to_string(g.token_len));
    }
    parts.push_back(tape.add_rowvec(tape.matmul(g.tokens, bound.leaf[ids->weight]),
                                    bound.leaf[ids->bias]));
  }
  if (parts.size() == 1) return parts[0];
  return tape.concat_rows(parts);
}

Tensor attention_block(Tape& tape, const BoundParams& bound, std::size_t layer,
                       const Tensor& h, const ModelConfig& config,
                       ForwardTrace* trace) {
  const ModelParams& p = *bound.params;
  const AttentionBlockIds& b = p.attn_blocks.at(layer);
  const std::size_t d = config.d_model, heads = config.heads;
  const std::size_t dh = d / heads;

  Tensor a = tape.layer_norm(h, bound.leaf[b.ln1_gain], bound.leaf[b.ln1_bias]);
  Tensor q = tape.add_rowvec(tape.matmul(a, bound.leaf[b.wq]), bound.leaf[b.bq]);
  Tensor k = tape.add_rowvec(tape.matmul(a, bound.leaf[b.wk]), bound.leaf[b.bk]);
  Tensor v = tape.add_rowvec(tape.matmul(a, bound.leaf[b.wv]), bound.leaf[b.bv]);

  std::vector<Tensor> head_outs;
  std::vector<Tensor> probs;
  for (std::size_t hd = 0; hd < heads; ++hd) {
    const std::size_t c0 = hd * dh, c1 = (hd + 1) * dh;
    Tensor qh = tape.slice_cols(q, c0, c1);
    Tensor kh = tape.slice_cols(k, c0, c1);
    Tensor vh = tape.slice_cols(v, c0, c1);
    Tensor scores = tape.scale(tape.matmul(qh, tape.transpose(kh)),
                               1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor prob = tape.softmax_rows(scores);
    if (trace != nullptr) probs.push_back(prob.detached());
    head_outs.push_back(tape.matmul(prob, vh));
  }
  Tensor mixed = heads == 1 ? head_outs[0] : tape.concat_cols(head_outs);
  Tensor o = tape.add_rowvec(tape.matmul(mixed, bound.leaf[b.wo]), bound.leaf[b.bo]);
  Tensor h1 = tape.add(h, o);

  Tensor ff_in = tape.layer_norm(h1, bound.leaf[b.ln2_gain], bound.leaf[b.ln2_bias]);
  Tensor ff = tape.add_rowvec(
      tape.matmul(tape.gelu(tape.add_rowvec(tape.matmul(ff_in, bound.leaf[b.w1]),
                                            bound.leaf[b.b1])),
                  bound.leaf[b.w2]),
      bound.leaf[b.b2]);
  Tensor out = tape.add(h1, ff);

  if (trace != nullptr) {
    trace->attention_probs.push_back(std::move(probs));
    trace->layer_token_counts.push_back(out.rows());
  }
  return out;
}

Tensor mlp_block(Tape& tape, const BoundParams& bound, std::size_t layer,
                 const Tensor& h) {
  const ModelParams& p = *bound.params;
  const MlpBlockIds& b = p.mlp_blocks.at(layer);
  Tensor a = tape.layer_norm(h, bound.leaf[b.ln_gain], bound.leaf[b.ln_bias]);
  Tensor ff = tape.add_rowvec(
      tape.matmul(
          tape.gelu(tape.add_rowvec(tape.matmul(a, bound.leaf[b.w1]), bound.leaf[b.b1])),
          bound.leaf[b.w2]),
      bound.leaf[b.b2]);
  return tape.add(h, ff);
}

Tensor project_select(Tape& tape, const BoundParams& bound, const Tensor& h,
                      std::size_t n) {
  const ModelParams& p = *bound.params;
  if (n > h.rows()) {
    throw ContractError("project_select: first " + std::to_string(n) +
                        " tokens requested from " + std::to_string(h.rows()));
  }
  Tensor all = tape.add_rowvec(tape.matmul(h, bound.leaf[p.proj_weight]),
                               bound.leaf[p.proj_bias]);
  return tape.slice_rows(all, 0, n);
}

Tensor forward(Tape& tape, const BoundParams& bound, const Tensor& x,
               const ModelConfig& config, ForwardTrace* trace,
               std::optional<std::uint64_t> aug_seed) {
  if (x.rank() != 2 || x.rows() != config.lookback) {
    throw ContractError("forward: window " + shape_str(x.shape) +
                        " does not match lookback " + std::to_string(config.lookback));
  }
  if (!x.all_finite()) throw DataError("forward: window contains NaN or Inf");

  AugmentationConfig aug_cfg = config.augmentation;
  if (aug_seed.has_value()) aug_cfg.rng_seed = *aug_seed;
  const AugmentedTokens aug = augment(x, aug_cfg);

  const std::size_t n = x.cols();
  Tensor h = embed_tokens(tape, bound, x, aug);
  for (std::size_t l = 0; l < config.layers; ++l) {
    if (config.backbone == Backbone::Attention) {
      h = attention_block(tape, bound, l, h, config, trace);
    } else {
      h = mlp_block(tape, bound, l, h);
      if (trace != nullptr) trace->layer_token_counts.push_back(h.rows());
    }
    if (h.rows() != n + aug.total_count()) {
      throw NumericError("forward: block " + std::to_string(l) +
                         " changed the token count");
    }
  }
  return project_select(tape, bound, h, n);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

json augmentation_to_json(const AugmentationConfig& a) {
  return json{{"strategy", to_string(a.strategy)}, {"patch_len", a.patch_len},
              {"top_k", a.top_k},                  {"jitter_sigma", a.jitter_sigma},
              {"scaling_sigma", a.scaling_sigma},  {"rng_seed", a.rng_seed},
              {"ff_keep_dc", a.ff_keep_dc}};
}

AugmentationConfig augmentation_from_json(const json& j) {
  AugmentationConfig a;
  a.strategy = augment_strategy_from_string(j.at("strategy").get<std::string>());
  a.patch_len = j.at("patch_len").get<std::size_t>();
  a.top_k = j.at("top_k").get<std::size_t>();
  a.jitter_sigma = j.at("jitter_sigma").get<double>();
  a.scaling_sigma = j.at("scaling_sigma").get<double>();
  a.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  a.ff_keep_dc = j.at("ff_keep_dc").get<bool>();
  return a;
}

json model_config_to_json(const ModelConfig& c) {
  return json{{"backbone", to_string(c.backbone)},
              {"lookback", c.lookback},
              {"horizon", c.horizon},
              {"d_model", c.d_model},
              {"d_ff", c.d_ff},
              {"layers", c.layers},
              {"heads", c.heads},
              {"augmentation", augmentation_to_json(c.augmentation)}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.backbone = backbone_from_string(j.at("backbone").get<std::string>());
  c.lookback = j.at("lookback").get<std::size_t>();
  c.horizon = j.at("horizon").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.augmentation = augmentation_from_json(j.at("augmentation"));
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const ModelParams& params, std::uint64_t train_seed) {
  json j;
  j["format"] = "daif-checkpoint";
  j["version"] = 1;
  j["model"] = model_config_to_json(config);
  j["n_variates"] = params.n_variates;
  j["train_seed"] = train_seed;
  json arrays = json::array();
  for (const auto& e : params.store.entries) {
    arrays.push_back(json{{"name", e.name}, {"shape", e.value.shape},
                          {"data", e.value.data}});
  }
  j["params"] = std::move(arrays);

  std::ofstream out(path);
  if (!out) throw IoError("save_checkpoint: cannot open " + path + " for writing");
  out << j.dump();
  if (!out) throw IoError("save_checkpoint: failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_checkpoint: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("load_checkpoint: " + path + " is not valid JSON: " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "daif-checkpoint") {
      throw ConfigError("load_checkpoint: " + path + " is not a daif checkpoint");
    }
    if (j.at("version").get<int>() != 1) {
      throw ConfigError("load_checkpoint: unsupported checkpoint version " +
                        std::to_string(j.at("version").get<int>()));
    }
    Checkpoint ck;
    ck.config = model_config_from_json(j.at("model"));
    ck.train_seed = j.value("train_seed", std::uint64_t{0});
    const std::size_t n_variates = j.at("n_variates").get<std::size_t>();

    // Rebuild the parameter layout, then overwrite values from the file so
    // ids and names stay consistent with init_params.
    ck.params = init_params(ck.config, n_variates, 0);
    for (const auto& arr : j.at("params")) {
      const std::string name = arr.at("name").get<std::string>();
      const int id = ck.params.store.find(name);
      if (id < 0) {
        throw ConfigError("load_checkpoint: unexpected parameter \"" + name + "\"");
      }
      Tensor& dst = ck.params.store.value(id);
      const auto shape = arr.at("shape").get<std::vector<std::size_t>>();
      if (shape != dst.shape) {
        throw ConfigError("load_checkpoint: parameter \"" + name + "\" has shape " +
                          shape_str(shape) + ", expected " + shape_str(dst.shape));
      }
      const std::size_t expected = dst.size();
      dst.data = arr.at("data").get<std::vector<double>>();
      if (dst.data.size() != expected) {
        throw ConfigError("load_checkpoint: parameter \"" + name +
                          "\" has inconsistent data length");
      }
    }
    return ck;
  } catch (const json::exception& e) {
    throw ConfigError("load_checkpoint: malformed checkpoint " + path + ": " +
                      e.what());
  }
}

}  // namespace daif
