#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "daif/augment.hpp"
#include "daif/tensor.hpp"

namespace daif {

enum class Backbone { Attention, TokenIndependentMLP };

std::string to_string(Backbone b);
Backbone backbone_from_string(const std::string& s);

struct ModelConfig {
  Backbone backbone = Backbone::Attention;
  std::size_t lookback = 96;  // T
  std::size_t horizon = 96;   // S
  std::size_t d_model = 128;  // D
  std::size_t d_ff = 256;
  std::size_t layers = 2;     // L
  std::size_t heads = 8;
  AugmentationConfig augmentation;

  void validate() const;
};

/// Flat registry of named parameter arrays. Ids are stable indices used by
/// the optimizer and the per-forward tape binding.
struct ParamStore {
  struct Entry {
    std::string name;
    Tensor value;
  };
  std::vector<Entry> entries;

  int add(std::string name, Tensor value);
  Tensor& value(int id) { return entries[static_cast<std::size_t>(id)].value; }
  const Tensor& value(int id) const {
    return entries[static_cast<std::size_t>(id)].value;
  }
  int find(const std::string& name) const;
  std::size_t size() const { return entries.size(); }
};

struct AttentionBlockIds {
  int ln1_gain, ln1_bias;
  int wq, bq, wk, bk, wv, bv, wo, bo;
  int ln2_gain, ln2_bias;
  int w1, b1, w2, b2;
};

struct MlpBlockIds {
  int ln_gain, ln_bias;
  int w1, b1, w2, b2;
};

struct EmbeddingGroupIds {
  AugmentStrategy tag;
  std::size_t token_len;  // J
  int weight, bias;
};

struct ModelParams {
  ParamStore store;
  std::size_t n_variates = 0;
  int embed_weight = -1, embed_bias = -1;  // T -> D
  std::vector<EmbeddingGroupIds> embed_aug;
  std::vector<AttentionBlockIds> attn_blocks;
  std::vector<MlpBlockIds> mlp_blocks;
  int proj_weight = -1, proj_bias = -1;  // D -> S
};

/// Seeded initialization: affine weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// biases zero, layer-norm gain 1 / bias 0. Embedding maps for augmented
/// token groups are derived from the augmentation strategy and (T, N).
ModelParams init_params(const ModelConfig& config, std::size_t n_variates,
                        std::uint64_t seed);

/// Tape-bound view of the parameters: leaf[i] is store entry i registered on
/// the tape (or a detached constant for no-grad evaluation).
struct BoundParams {
  const ModelParams* params = nullptr;
  std::vector<Tensor> leaf;
};

BoundParams bind(Tape& tape, const ModelParams& params);
BoundParams bind_constant(const ModelParams& params);

/// Optional forward introspection for tests and analysis.
struct ForwardTrace {
  std::vector<std::size_t> layer_token_counts;
  /// attention_probs[layer][head]: (N+M) x (N+M), detached.
  std::vector<std::vector<Tensor>> attention_probs;
};

/// Rows 1..N embed the variate series, rows N+1..N+M embed the augmented
/// tokens group by group; no positional encoding.
Tensor embed_tokens(Tape& tape, const BoundParams& bound, const Tensor& x,
                    const AugmentedTokens& aug);

/// Pre-norm multi-head self-attention over the token axis with residual,
/// then pre-norm GELU FFN with residual.
Tensor attention_block(Tape& tape, const BoundParams& bound, std::size_t layer,
                       const Tensor& h, const ModelConfig& config,
                       ForwardTrace* trace = nullptr);

/// Per-token pre-norm GELU FFN with residual; tokens never interact.
Tensor mlp_block(Tape& tape, const BoundParams& bound, std::size_t layer,
                 const Tensor& h);

/// Affine D -> S on every token, then keeps only the first n rows.
Tensor project_select(Tape& tape, const BoundParams& bound, const Tensor& h,
                      std::size_t n);

/// augment -> embed_tokens -> L blocks -> project_select on a standardized
/// T x N window; output is N x S for every strategy. aug_seed overrides the
/// stochastic strategies' seed (used by the per-epoch training streams).
Tensor forward(Tape& tape, const BoundParams& bound, const Tensor& x,
               const ModelConfig& config, ForwardTrace* trace = nullptr,
               std::optional<std::uint64_t> aug_seed = std::nullopt);

/// Versioned JSON checkpoint: config + every parameter array with shapes,
/// plus the training seed for result bookkeeping.
void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const ModelParams& params, std::uint64_t train_seed = 0);

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  std::uint64_t train_seed = 0;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace daif
