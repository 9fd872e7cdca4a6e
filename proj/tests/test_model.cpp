#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "daif/model.hpp"

using namespace daif;

namespace {

Tensor random_window(std::size_t t, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Tensor w = Tensor::zeros({t, n});
  for (double& v : w.data) v = dist(gen);
  return w;
}

ModelConfig tiny_config(Backbone backbone, AugmentStrategy strategy) {
  ModelConfig cfg;
  cfg.backbone = backbone;
  cfg.lookback = 16;
  cfg.horizon = 4;
  cfg.d_model = 8;
  cfg.d_ff = 12;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.augmentation.strategy = strategy;
  cfg.augmentation.patch_len = 4;
  cfg.augmentation.top_k = 3;
  return cfg;
}

void zero_param(ModelParams& p, int id) {
  for (double& v : p.store.value(id).data) v = 0.0;
}

}  // namespace

TEST_CASE("embed_tokens") {
  SUBCASE("zero weights and biases give a zero matrix of the right shape") {
    ModelConfig cfg = tiny_config(Backbone::Attention, AugmentStrategy::FF);
    ModelParams p = init_params(cfg, 3, 1);
    zero_param(p, p.embed_weight);
    zero_param(p, p.embed_bias);
    for (const auto& g : p.embed_aug) {
      zero_param(p, g.weight);
      zero_param(p, g.bias);
    }
    Tensor x = random_window(16, 3, 2);
    const AugmentedTokens aug = augment(x, cfg.augmentation);
    Tape tape;
    BoundParams bound = bind(tape, p);
    Tensor h = embed_tokens(tape, bound, x, aug);
    CHECK(h.rows() == 3 + 3);
    CHECK(h.cols() == 8);
    for (double v : h.data) CHECK(v == 0.0);
  }

  SUBCASE("no augmentation yields the plain N x D embedding") {
    ModelConfig cfg = tiny_config(Backbone::Attention, AugmentStrategy::None);
    ModelParams p = init_params(cfg, 4, 1);
    Tensor x = random_window(16, 4, 3);
    Tape tape;
    BoundParams bound = bind(tape, p);
    Tensor h = embed_tokens(tape, bound, x, AugmentedTokens{});
    CHECK(h.rows() == 4);
    CHECK(h.cols() == 8);
  }

  SUBCASE("hand-set weights match the affine oracle") {
    // N=2, T=3, D=2; one CvP token with P=3 -> J=6, M=1.
    ModelConfig cfg;
    cfg.backbone = Backbone::Attention;
    cfg.lookback = 3;
    cfg.horizon = 2;
    cfg.d_model = 2;
    cfg.d_ff = 2;
    cfg.layers = 1;
    cfg.heads = 1;
    cfg.augmentation.strategy = AugmentStrategy::CvP;
    cfg.augmentation.patch_len = 3;
    ModelParams p = init_params(cfg, 2, 1);

    p.store.value(p.embed_weight).data = {1.0, 0.5, -1.0, 2.0, 0.0, 3.0};  // 3x2
    p.store.value(p.embed_bias).data = {0.25, -0.5};
    REQUIRE(p.embed_aug.size() == 1);
    p.store.value(p.embed_aug[0].weight).data = {1, 0, 0, 1, 1, 1,
                                                 2, 0, 0, 2, 1, -1};  // 6x2
    p.store.value(p.embed_aug[0].bias).data = {1.0, 2.0};

    Tensor x = Tensor::matrix(3, 2, {1.0, 10.0, 2.0, 20.0, 3.0, 30.0});
    const AugmentedTokens aug = augment(x, cfg.augmentation);
    REQUIRE(aug.total_count() == 1);

    Tape tape;
    BoundParams bound = bind(tape, p);
    Tensor h = embed_tokens(tape, bound, x, aug);
    REQUIRE(h.rows() == 3);

    // Variate 0 series (1,2,3): [1*1+2*(-1)+3*0, 1*0.5+2*2+3*3] + bias.
    CHECK(h.at(0, 0) == doctest::Approx(1.0 - 2.0 + 0.0 + 0.25));
    CHECK(h.at(0, 1) == doctest::Approx(0.5 + 4.0 + 9.0 - 0.5));
    // Variate 1 series (10,20,30).
    CHECK(h.at(1, 0) == doctest::Approx(10.0 - 20.0 + 0.0 + 0.25));
    CHECK(h.at(1, 1) == doctest::Approx(5.0 + 40.0 + 90.0 - 0.5));
    // Token (1,10,2,20,3,30) time-major through the row-major 6x2 map whose
    // rows are (1,0),(0,1),(1,1),(2,0),(0,2),(1,-1).
    const double tok0 = 1 * 1 + 10 * 0 + 2 * 1 + 20 * 2 + 3 * 0 + 30 * 1 + 1.0;
    const double tok1 = 1 * 0 + 10 * 1 + 2 * 1 + 20 * 0 + 3 * 2 + 30 * (-1) + 2.0;
    CHECK(h.at(2, 0) == doctest::Approx(tok0));
    CHECK(h.at(2, 1) == doctest::Approx(tok1));
  }

  SUBCASE("unregistered token length is a configuration error") {
    ModelConfig cfg = tiny_config(Backbone::Attention, AugmentStrategy::None);
    ModelParams p = init_params(cfg, 3, 1);
    Tensor x = random_window(16, 3, 2);
    AugmentationConfig ff;
    ff.strategy = AugmentStrategy::FF;
    ff.top_k = 3;
    const AugmentedTokens aug = augment(x, ff);
    Tape tape;
    BoundParams bound = bind(tape, p);
    CHECK_THROWS_AS(embed_tokens(tape, bound, x, aug), ConfigError);
  }
}

TEST_CASE("attention_block") {
  SUBCASE("single token attends to itself with weight exactly 1") {
    ModelConfig cfg = tiny_config(Backbone::Attention, AugmentStrategy::None);
    ModelParams p = init_params(cfg, 1, 5);
    Tensor h = random_window(1, 8, 6);
    Tape tape;
    BoundParams bound = bind(tape, p);
    ForwardTrace trace;
    attention_block(tape, bound, 0, h, cfg, &trace);
    REQUIRE(trace.attention_probs.size() == 1);
    for (const Tensor& prob : trace.attention_probs[0]) {
      REQUIRE(prob.size() == 1);
      CHECK(prob.data[0] == 1.0);
    }
  }

  SUBCASE("zero output maps make the block an identity") {
    ModelConfig cfg = tiny_config(Backbone::Attention, AugmentStrategy::None);
    ModelParams p = init_params(cfg, 3, 7);
    zero_param(p, p.attn_blocks[0].wo);
    zero_param(p, p.attn_blocks[0].bo);
    zero_param(p, p.attn_blocks[0].w2);
    zero_param(p, p.attn_blocks[0].b2);
    Tensor h = random_window(5, 8, 8);
    Tape tape;
    BoundParams bound = bind(tape, p);
    Tensor out = attention_block(tape, bound, 0, h, cfg);
    CHECK(out.data == h.data);
  }

  SUBCASE("permuting input rows permutes output rows identically") {
    ModelConfig cfg = tiny_config(Backbone::Attention, AugmentStrategy::None);
    ModelParams p = init_params(cfg, 3, 9);
    Tensor h = random_window(4, 8, 10);
    const std::vector<std::size_t> perm = {2, 0, 3, 1};
    Tensor hp = Tensor::zeros({4, 8});
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 8; ++j) hp.at(i, j) = h.at(perm[i], j);

    Tape t1, t2;
    Tensor out = attention_block(t1, bind(t1, p), 0, h, cfg);
    Tensor outp = attention_block(t2, bind(t2, p), 0, hp, cfg);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 8; ++j)
        CHECK(outp.at(i, j) == doctest::Approx(out.at(perm[i], j)).epsilon(1e-12));
  }
}

TEST_CASE("mlp_block") {
  SUBCASE("zero second-layer weights make the block an identity") {
    ModelConfig cfg = tiny_config(Backbone::TokenIndependentMLP, AugmentStrategy::None);
    ModelParams p = init_params(cfg, 3, 11);
    zero_param(p, p.mlp_blocks[0].w2);
    zero_param(p, p.mlp_blocks[0].b2);
    Tensor h = random_window(6, 8, 12);
    Tape tape;
    BoundParams bound = bind(tape, p);
    Tensor out = mlp_block(tape, bound, 0, h);
    CHECK(out.data == h.data);
  }

  SUBCASE("token count preserved for any M") {
    ModelConfig cfg = tiny_config(Backbone::TokenIndependentMLP, AugmentStrategy::None);
    ModelParams p = init_params(cfg, 3, 13);
    for (std::size_t tokens : {1u, 3u, 9u, 16u}) {
      Tensor h = random_window(tokens, 8, tokens);
      Tape tape;
      BoundParams bound = bind(tape, p);
      CHECK(mlp_block(tape, bound, 0, h).rows() == tokens);
    }
  }

  SUBCASE("one token with hand-set 2x2 weights matches the hand computation") {
    ModelConfig cfg;
    cfg.backbone = Backbone::TokenIndependentMLP;
    cfg.lookback = 4;
    cfg.horizon = 2;
    cfg.d_model = 2;
    cfg.d_ff = 2;
    cfg.layers = 1;
    cfg.heads = 1;
    ModelParams p = init_params(cfg, 1, 1);
    p.store.value(p.mlp_blocks[0].ln_gain).data = {1.5, 0.5};
    p.store.value(p.mlp_blocks[0].ln_bias).data = {0.1, -0.1};
    p.store.value(p.mlp_blocks[0].w1).data = {1.0, 2.0, -1.0, 0.5};
    p.store.value(p.mlp_blocks[0].b1).data = {0.2, -0.3};
    p.store.value(p.mlp_blocks[0].w2).data = {0.7, -0.2, 0.3, 1.1};
    p.store.value(p.mlp_blocks[0].b2).data = {0.05, 0.15};

    const double h0 = 0.8, h1 = -0.4;
    Tensor h = Tensor::matrix(1, 2, {h0, h1});
    Tape tape;
    BoundParams bound = bind(tape, p);
    Tensor out = mlp_block(tape, bound, 0, h);

    // Hand computation with population variance and eps = 1e-5.
    const double mu = (h0 + h1) / 2.0;
    const double var = ((h0 - mu) * (h0 - mu) + (h1 - mu) * (h1 - mu)) / 2.0;
    const double is = 1.0 / std::sqrt(var + 1e-5);
    const double a0 = 1.5 * ((h0 - mu) * is) + 0.1;
    const double a1 = 0.5 * ((h1 - mu) * is) - 0.1;
    const double z0 = a0 * 1.0 + a1 * (-1.0) + 0.2;
    const double z1 = a0 * 2.0 + a1 * 0.5 - 0.3;
    const double g0 = gelu_value(z0), g1 = gelu_value(z1);
    const double o0 = h0 + (g0 * 0.7 + g1 * 0.3 + 0.05);
    const double o1 = h1 + (g0 * (-0.2) + g1 * 1.1 + 0.15);
    CHECK(out.at(0, 0) == doctest::Approx(o0).epsilon(1e-12));
    CHECK(out.at(0, 1) == doctest::Approx(o1).epsilon(1e-12));
  }
}

TEST_CASE("project_select") {
  ModelConfig cfg = tiny_config(Backbone::Attention, AugmentStrategy::None);

  SUBCASE("zero weights broadcast the bias over the first N rows") {
    ModelParams p = init_params(cfg, 2, 3);
    zero_param(p, p.proj_weight);
    p.store.value(p.proj_bias).data = {1.0, 2.0, 3.0, 4.0};
    Tensor h = random_window(5, 8, 14);
    Tape tape;
    BoundParams bound = bind(tape, p);
    Tensor y = project_select(tape, bound, h, 2);
    CHECK(y.rows() == 2);
    CHECK(y.cols() == 4);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 4; ++j) CHECK(y.at(i, j) == doctest::Approx(j + 1.0));
  }

  SUBCASE("selecting first N equals slicing then projecting") {
    ModelParams p = init_params(cfg, 2, 15);
    Tensor h = random_window(5, 8, 16);
    Tape t1;
    BoundParams b1 = bind(t1, p);
    Tensor project_then_slice = project_select(t1, b1, h, 2);

    Tensor h_first = Tensor::zeros({2, 8});
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 8; ++j) h_first.at(i, j) = h.at(i, j);
    Tape t2;
    BoundParams b2 = bind(t2, p);
    Tensor slice_then_project = project_select(t2, b2, h_first, 2);

    for (std::size_t i = 0; i < project_then_slice.size(); ++i) {
      CHECK(project_then_slice.data[i] ==
            doctest::Approx(slice_then_project.data[i]).epsilon(1e-12));
    }
  }

  SUBCASE("selecting more tokens than present is a contract error") {
    ModelParams p = init_params(cfg, 2, 17);
    Tensor h = random_window(2, 8, 18);
    Tape tape;
    BoundParams bound = bind(tape, p);
    CHECK_THROWS_AS(project_select(tape, bound, h, 3), ContractError);
  }
}

TEST_CASE("forward shape law across augmentation strategies") {
  // M = 0, 6 and 13 on a 96-step, 7-variate window.
  for (auto strategy : {AugmentStrategy::None, AugmentStrategy::CvP,
                        AugmentStrategy::Compound}) {
    for (auto backbone : {Backbone::Attention, Backbone::TokenIndependentMLP}) {
      ModelConfig cfg;
      cfg.backbone = backbone;
      cfg.lookback = 96;
      cfg.horizon = 12;
      cfg.d_model = 8;
      cfg.d_ff = 8;
      cfg.layers = 2;
      cfg.heads = 2;
      cfg.augmentation.strategy = strategy;
      cfg.augmentation.patch_len = 16;
      cfg.augmentation.top_k = 5;
      ModelParams p = init_params(cfg, 7, 19);
      Tensor x = random_window(96, 7, 20);
      Tape tape;
      BoundParams bound = bind(tape, p);
      ForwardTrace trace;
      Tensor y = forward(tape, bound, x, cfg, &trace);
      CHECK(y.rows() == 7);
      CHECK(y.cols() == 12);
      const std::size_t expected_tokens =
          strategy == AugmentStrategy::None ? 7
          : strategy == AugmentStrategy::CvP ? 13
                                             : 20;
      for (std::size_t count : trace.layer_token_counts) {
        CHECK(count == expected_tokens);
      }
    }
  }
}

TEST_CASE("forward rejects NaN input before any computation") {
  ModelConfig cfg = tiny_config(Backbone::Attention, AugmentStrategy::None);
  ModelParams p = init_params(cfg, 2, 21);
  Tensor x = random_window(16, 2, 22);
  x.data[5] = std::nan("");
  Tape tape;
  BoundParams bound = bind(tape, p);
  CHECK_THROWS_AS(forward(tape, bound, x, cfg), DataError);
}

TEST_CASE("token-independent MLP ignores augmented tokens in the value path") {
  // FF with zero-initialized augmented embedding vs no augmentation.
  ModelConfig ff_cfg = tiny_config(Backbone::TokenIndependentMLP, AugmentStrategy::FF);
  ModelParams p = init_params(ff_cfg, 3, 23);
  for (const auto& g : p.embed_aug) {
    zero_param(p, g.weight);
    zero_param(p, g.bias);
  }
  ModelConfig none_cfg = ff_cfg;
  none_cfg.augmentation.strategy = AugmentStrategy::None;

  Tensor x = random_window(16, 3, 24);
  Tape t1, t2;
  Tensor y_ff = forward(t1, bind(t1, p), x, ff_cfg);
  Tensor y_none = forward(t2, bind(t2, p), x, none_cfg);
  CHECK(y_ff.data == y_none.data);
}

TEST_CASE("attention output is invariant to permuting augmented tokens") {
  ModelConfig cfg = tiny_config(Backbone::Attention, AugmentStrategy::FF);
  ModelParams p = init_params(cfg, 3, 25);
  Tensor x = random_window(16, 3, 26);
  AugmentedTokens aug = augment(x, cfg.augmentation);
  REQUIRE(aug.groups[0].count() == 3);

  auto run = [&](const AugmentedTokens& tokens) {
    Tape tape;
    BoundParams bound = bind(tape, p);
    Tensor h = embed_tokens(tape, bound, x, tokens);
    for (std::size_t l = 0; l < cfg.layers; ++l)
      h = attention_block(tape, bound, l, h, cfg);
    return project_select(tape, bound, h, 3);
  };

  const Tensor base = run(aug);
  AugmentedTokens permuted = aug;
  // Rotate the three FF tokens.
  Tensor& tok = permuted.groups[0].tokens;
  Tensor rotated = tok;
  for (std::size_t j = 0; j < tok.cols(); ++j) {
    rotated.at(0, j) = tok.at(2, j);
    rotated.at(1, j) = tok.at(0, j);
    rotated.at(2, j) = tok.at(1, j);
  }
  permuted.groups[0].tokens = rotated;
  const Tensor shuffled = run(permuted);
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(std::abs(base.data[i] - shuffled.data[i]) <= 1e-9);
  }
}

TEST_CASE("attention output is equivariant to permuting variate tokens") {
  ModelConfig cfg = tiny_config(Backbone::Attention, AugmentStrategy::None);
  ModelParams p = init_params(cfg, 4, 27);
  Tensor x = random_window(16, 4, 28);
  const std::vector<std::size_t> perm = {3, 1, 0, 2};
  Tensor xp = Tensor::zeros({16, 4});
  for (std::size_t t = 0; t < 16; ++t)
    for (std::size_t v = 0; v < 4; ++v) xp.at(t, v) = x.at(t, perm[v]);

  Tape t1, t2;
  Tensor y = forward(t1, bind(t1, p), x, cfg);
  Tensor yp = forward(t2, bind(t2, p), xp, cfg);
  for (std::size_t v = 0; v < 4; ++v)
    for (std::size_t h = 0; h < cfg.horizon; ++h)
      CHECK(yp.at(v, h) == doctest::Approx(y.at(perm[v], h)).epsilon(1e-12));
}

TEST_CASE("MLP backbone: augmented tokens contribute exactly zero gradient") {
  ModelConfig ff_cfg = tiny_config(Backbone::TokenIndependentMLP, AugmentStrategy::FF);
  ModelParams p = init_params(ff_cfg, 3, 29);
  ModelConfig none_cfg = ff_cfg;
  none_cfg.augmentation.strategy = AugmentStrategy::None;

  Tensor x = random_window(16, 3, 30);
  Tensor target = random_window(3, 4, 31);  // N x S

  auto grads_for = [&](const ModelConfig& cfg) {
    Tape tape;
    BoundParams bound = bind(tape, p);
    Tensor pred = forward(tape, bound, x, cfg);
    Tensor diff = tape.sub(pred, target);
    Tensor loss = tape.mean_all(tape.mul(diff, diff));
    tape.backward(loss);
    std::vector<std::vector<double>> grads;
    for (std::size_t i = 0; i < p.store.size(); ++i) {
      auto g = tape.grad(bound.leaf[i]);
      grads.emplace_back(g.begin(), g.end());
    }
    return grads;
  };

  const auto g_ff = grads_for(ff_cfg);
  const auto g_none = grads_for(none_cfg);

  for (std::size_t i = 0; i < p.store.size(); ++i) {
    const std::string& name = p.store.entries[i].name;
    const bool is_aug_embed = name.rfind("embed_aug.", 0) == 0;
    if (is_aug_embed) {
      for (double v : g_ff[i]) CHECK(v == 0.0);
    } else {
      // Bit-identical shared gradients with and without augmented tokens.
      CHECK(g_ff[i] == g_none[i]);
    }
  }
}

TEST_CASE("zero-initialized augmented embeddings: uniform attention weights") {
  ModelConfig cfg = tiny_config(Backbone::Attention, AugmentStrategy::FF);
  cfg.layers = 1;
  ModelParams p = init_params(cfg, 3, 33);
  for (const auto& g : p.embed_aug) {
    zero_param(p, g.weight);
    zero_param(p, g.bias);
  }
  ModelConfig none_cfg = cfg;
  none_cfg.augmentation.strategy = AugmentStrategy::None;

  Tensor x = random_window(16, 3, 34);

  Tape t1;
  ForwardTrace trace_m;
  forward(t1, bind(t1, p), x, cfg, &trace_m);
  Tape t2;
  ForwardTrace trace_0;
  forward(t2, bind(t2, p), x, none_cfg, &trace_0);

  const std::size_t n = 3, m = 3;
  for (std::size_t head = 0; head < cfg.heads; ++head) {
    const Tensor& pm = trace_m.attention_probs[0][head];
    const Tensor& p0 = trace_0.attention_probs[0][head];
    REQUIRE(pm.rows() == n + m);
    REQUIRE(p0.rows() == n);
    for (std::size_t i = 0; i < n; ++i) {
      // Weights on the zero-embedded tokens are uniform.
      const double w_aug = pm.at(i, n);
      for (std::size_t j = n; j < n + m; ++j) {
        CHECK(pm.at(i, j) == doctest::Approx(w_aug).epsilon(1e-12));
      }
      // Original-token weights differ from the M=0 run only through the
      // softmax denominator: p^M_ij / p^0_ij is constant over j.
      const double ratio = pm.at(i, 0) / p0.at(i, 0);
      for (std::size_t j = 1; j < n; ++j) {
        CHECK(pm.at(i, j) / p0.at(i, j) == doctest::Approx(ratio).epsilon(1e-10));
      }
      CHECK(ratio < 1.0);  // denominator can only grow
    }
  }
}

TEST_CASE("checkpoint round trip") {
  namespace fs = std::filesystem;
  const fs::path dir =
      fs::temp_directory_path() / ("daif_model_test_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);

  ModelConfig cfg = tiny_config(Backbone::Attention, AugmentStrategy::Compound);
  ModelParams p = init_params(cfg, 5, 35);
  const std::string path = (dir / "ck.json").string();
  save_checkpoint(path, cfg, p, 42);

  const Checkpoint ck = load_checkpoint(path);
  CHECK(ck.train_seed == 42);
  CHECK(ck.config.backbone == cfg.backbone);
  CHECK(ck.config.lookback == cfg.lookback);
  CHECK(ck.config.horizon == cfg.horizon);
  CHECK(ck.config.augmentation.strategy == cfg.augmentation.strategy);
  CHECK(ck.params.n_variates == 5);
  REQUIRE(ck.params.store.size() == p.store.size());
  for (std::size_t i = 0; i < p.store.size(); ++i) {
    CHECK(ck.params.store.entries[i].name == p.store.entries[i].name);
    CHECK(ck.params.store.entries[i].value.data == p.store.entries[i].value.data);
  }

  CHECK_THROWS_AS(load_checkpoint((dir / "missing.json").string()), IoError);
  fs::remove_all(dir);
}
