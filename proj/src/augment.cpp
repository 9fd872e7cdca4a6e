#include "daif/augment.hpp"

#include <algorithm>

#include "daif/spectral.hpp"

namespace daif {

namespace {

void require_window(const Tensor& w, const char* op) {
  if (w.rank() != 2 || w.rows() < 1 || w.cols() < 1) {
    throw ContractError(std::string(op) + ": window must be a T x N matrix, got " +
                        shape_str(w.shape));
  }
}

std::vector<double> column(const Tensor& w, std::size_t n) {
  std::vector<double> col(w.rows());
  for (std::size_t t = 0; t < w.rows(); ++t) col[t] = w.at(t, n);
  return col;
}

// N tokens of length T from a T x N matrix: token n is variate n's series.
TokenGroup columns_as_tokens(AugmentStrategy tag, const Tensor& w) {
  const std::size_t t = w.rows(), n = w.cols();
  TokenGroup g;
  g.tag = tag;
  g.token_len = t;
  g.tokens = Tensor::zeros({n, t});
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < t; ++i) g.tokens.at(j, i) = w.at(i, j);
  return g;
}

}  // namespace

std::string to_string(AugmentStrategy s) {
  switch (s) {
    case AugmentStrategy::None: return "none";
    case AugmentStrategy::CvP: return "cvp";
    case AugmentStrategy::FF: return "ff";
    case AugmentStrategy::Jitter: return "jitter";
    case AugmentStrategy::Scaling: return "scaling";
    case AugmentStrategy::Compound: return "compound";
  }
  return "none";
}

AugmentStrategy augment_strategy_from_string(const std::string& s) {
  if (s == "none") return AugmentStrategy::None;
  if (s == "cvp") return AugmentStrategy::CvP;
  if (s == "ff") return AugmentStrategy::FF;
  if (s == "jitter") return AugmentStrategy::Jitter;
  if (s == "scaling") return AugmentStrategy::Scaling;
  if (s == "compound") return AugmentStrategy::Compound;
  throw ConfigError("unknown augmentation strategy \"" + s +
                    "\" (expected none|cvp|ff|jitter|scaling|compound)");
}

void AugmentationConfig::validate() const {
  if (patch_len < 1) throw ConfigError("augmentation.patch_len must be >= 1");
  if (top_k < 1) throw ConfigError("augmentation.top_k must be >= 1");
  if (jitter_sigma < 0.0) throw ConfigError("augmentation.jitter_sigma must be >= 0");
  if (scaling_sigma < 0.0) throw ConfigError("augmentation.scaling_sigma must be >= 0");
}

AugmentedTokens cross_variation_patch(const Tensor& window, std::size_t patch_len) {
  require_window(window, "cross_variation_patch");
  const std::size_t t = window.rows(), n = window.cols();
  if (patch_len < 1 || patch_len > t) {
    throw ContractError("cross_variation_patch: patch length " +
                        std::to_string(patch_len) + " out of range [1," +
                        std::to_string(t) + "]");
  }
  const std::size_t m = t / patch_len;
  const std::size_t j = patch_len * n;

  TokenGroup g;
  g.tag = AugmentStrategy::CvP;
  g.token_len = j;
  g.tokens = Tensor::zeros({m, j});
  for (std::size_t k = 0; k < m; ++k) {
    std::size_t at = 0;
    for (std::size_t p = 0; p < patch_len; ++p) {
      const std::size_t row = k * patch_len + p;
      for (std::size_t v = 0; v < n; ++v) g.tokens.at(k, at++) = window.at(row, v);
    }
  }
  AugmentedTokens out;
  out.groups.push_back(std::move(g));
  return out;
}

AugmentedTokens frequency_filter_augment(const Tensor& window, std::size_t top_k,
                                         bool keep_dc) {
  require_window(window, "frequency_filter_augment");
  const std::size_t t = window.rows(), n = window.cols();
  const std::size_t bins = t / 2 + 1;
  if (top_k < 1 || top_k > bins) {
    throw ContractError("frequency_filter_augment: top_k=" + std::to_string(top_k) +
                        " out of range [1," + std::to_string(bins) + "]");
  }
  TokenGroup g;
  g.tag = AugmentStrategy::FF;
  g.token_len = t;
  g.tokens = Tensor::zeros({n, t});
  for (std::size_t v = 0; v < n; ++v) {
    const std::vector<double> filtered =
        spectral::frequency_filter(column(window, v), top_k, keep_dc);
    for (std::size_t i = 0; i < t; ++i) g.tokens.at(v, i) = filtered[i];
  }
  AugmentedTokens out;
  out.groups.push_back(std::move(g));
  return out;
}

AugmentedTokens jitter(const Tensor& window, double sigma, Rng& rng) {
  require_window(window, "jitter");
  if (sigma < 0.0) throw ContractError("jitter: sigma must be >= 0");
  Tensor noisy = window.detached();
  if (sigma > 0.0) {
    for (double& v : noisy.data) v += rng.normal(0.0, sigma);
  }
  TokenGroup g = columns_as_tokens(AugmentStrategy::Jitter, noisy);
  AugmentedTokens out;
  out.groups.push_back(std::move(g));
  return out;
}

AugmentedTokens scaling(const Tensor& window, double sigma, Rng& rng) {
  require_window(window, "scaling");
  if (sigma < 0.0) throw ContractError("scaling: sigma must be >= 0");
  const std::size_t t = window.rows(), n = window.cols();
  std::vector<double> factors(n, 1.0);
  if (sigma > 0.0) {
    for (std::size_t v = 0; v < n; ++v) factors[v] = rng.normal(1.0, sigma);
  }
  Tensor scaled = window.detached();
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t v = 0; v < n; ++v) scaled.at(i, v) *= factors[v];
  TokenGroup g = columns_as_tokens(AugmentStrategy::Scaling, scaled);
  AugmentedTokens out;
  out.groups.push_back(std::move(g));
  return out;
}

AugmentedTokens augment(const Tensor& window, const AugmentationConfig& config) {
  config.validate();
  switch (config.strategy) {
    case AugmentStrategy::None:
      return {};
    case AugmentStrategy::CvP:
      return cross_variation_patch(window, config.patch_len);
    case AugmentStrategy::FF:
      return frequency_filter_augment(window, config.top_k, config.ff_keep_dc);
    case AugmentStrategy::Jitter: {
      Rng rng(config.rng_seed);
      return jitter(window, config.jitter_sigma, rng);
    }
    case AugmentStrategy::Scaling: {
      Rng rng(config.rng_seed);
      return scaling(window, config.scaling_sigma, rng);
    }
    case AugmentStrategy::Compound: {
      AugmentedTokens out = cross_variation_patch(window, config.patch_len);
      AugmentedTokens ff =
          frequency_filter_augment(window, config.top_k, config.ff_keep_dc);
      for (auto& g : ff.groups) out.groups.push_back(std::move(g));
      return out;
    }
  }
  return {};
}

}  // namespace daif
