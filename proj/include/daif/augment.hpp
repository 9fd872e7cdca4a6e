#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "daif/rng.hpp"
#include "daif/tensor.hpp"

namespace daif {

enum class AugmentStrategy { None, CvP, FF, Jitter, Scaling, Compound };

std::string to_string(AugmentStrategy s);
AugmentStrategy augment_strategy_from_string(const std::string& s);

struct AugmentationConfig {
  AugmentStrategy strategy = AugmentStrategy::None;
  std::size_t patch_len = 16;  // P
  std::size_t top_k = 5;       // K
  double jitter_sigma = 0.1;
  double scaling_sigma = 0.1;
  std::uint64_t rng_seed = 0;
  bool ff_keep_dc = false;

  void validate() const;
};

/// One group of augmented tokens sharing a token length, and therefore one
/// embedding map in the model.
struct TokenGroup {
  AugmentStrategy tag = AugmentStrategy::None;
  std::size_t token_len = 0;  // J
  Tensor tokens;              // count x token_len

  std::size_t count() const { return tokens.shape.empty() ? 0 : tokens.shape[0]; }
};

struct AugmentedTokens {
  std::vector<TokenGroup> groups;

  std::size_t total_count() const {
    std::size_t m = 0;
    for (const auto& g : groups) m += g.count();
    return m;
  }
};

// Window convention throughout: X is T x N, rows are timesteps.

/// Slices the first M*P timesteps into M = floor(T/P) patches of P
/// consecutive timesteps across all variates; each patch is flattened
/// time-major into one token of length J = P*N.
AugmentedTokens cross_variation_patch(const Tensor& window, std::size_t patch_len);

/// Reconstructs every variate from its top_k highest-amplitude frequency
/// components; N tokens of length T.
AugmentedTokens frequency_filter_augment(const Tensor& window, std::size_t top_k,
                                         bool keep_dc = false);

/// X + iid Normal(0, sigma^2) noise; N tokens of length T.
AugmentedTokens jitter(const Tensor& window, double sigma, Rng& rng);

/// Per-variate multiplicative factor a_n ~ Normal(1, sigma^2); N tokens of
/// length T.
AugmentedTokens scaling(const Tensor& window, double sigma, Rng& rng);

/// Strategy dispatch. None yields zero tokens; Compound concatenates the
/// CvP group and the FF group so each keeps its own embedding.
AugmentedTokens augment(const Tensor& window, const AugmentationConfig& config);

}  // namespace daif
