#include <cmath>
#include <vector>

#include "doctest.h"
#include "fd_util.hpp"
#include "trajlm/backbone.hpp"
#include "trajlm/errors.hpp"
#include "trajlm/fusion.hpp"
#include "trajlm/scene.hpp"

using namespace trajlm;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1, 1);
  return t;
}

MapFeature feature_from(ad::Graph& g, const Tensor& grid) {
  MapFeature f;
  f.grid_tokens = g.input(grid);
  f.pooled = ad::mean_rows(f.grid_tokens);
  return f;
}

}  // namespace

TEST_CASE("head count must divide the width") {
  Rng rng(41);
  CHECK_THROWS_AS(FusionParams::init(10, 6, 4, rng), ConfigError);
  CHECK_NOTHROW(FusionParams::init(12, 6, 4, rng));
}

TEST_CASE("identical map tokens collapse grid and pooled attention") {
  Rng rng(42);
  const FusionParams params = FusionParams::init(8, 6, 2, rng);

  // Every grid row equal: attention weights cannot matter, and the pooled
  // vector is that same row.
  Tensor grid({5, 6});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 6; ++j) grid(i, j) = 0.1 * static_cast<double>(j) - 0.2;
  const Tensor scene = random_matrix(4, 8, rng);

  ad::Graph g;
  const FusionHandles h = register_fusion(g, params, false);
  const MapFeature f = feature_from(g, grid);
  const Tensor via_grid =
      g.val(cross_attend_map(g, h, params.n_heads, g.input(scene), f, MapKvMode::kGrid));
  const Tensor via_pooled =
      g.val(cross_attend_map(g, h, params.n_heads, g.input(scene), f, MapKvMode::kPooled));
  CHECK(max_abs_diff(via_grid, via_pooled) <= 1e-12);
}

TEST_CASE("map attention treats each scene token independently") {
  Rng rng(43);
  const FusionParams params = FusionParams::init(8, 6, 2, rng);
  Tensor scene = random_matrix(4, 8, rng);
  const Tensor grid = random_matrix(9, 6, rng);

  ad::Graph g;
  const FusionHandles h = register_fusion(g, params, false);
  const MapFeature f = feature_from(g, grid);
  const Tensor base =
      g.val(cross_attend_map(g, h, params.n_heads, g.input(scene), f, MapKvMode::kGrid));

  scene(1, 3) -= 0.5;
  const Tensor bumped =
      g.val(cross_attend_map(g, h, params.n_heads, g.input(scene), f, MapKvMode::kGrid));
  for (std::size_t t = 0; t < 4; ++t) {
    if (t == 1) continue;
    for (std::size_t j = 0; j < 8; ++j) CHECK(bumped(t, j) == base(t, j));
  }
  CHECK(max_abs_diff(base, bumped) > 1e-9);
}

TEST_CASE("fusing mismatched sequence lengths fails") {
  Rng rng(44);
  const FusionParams params = FusionParams::init(8, 6, 2, rng);
  ad::Graph g;
  const FusionHandles h = register_fusion(g, params, false);
  ad::Value a = g.input(random_matrix(4, 8, rng));
  ad::Value s = g.input(random_matrix(3, 8, rng));
  CHECK_THROWS_AS(fuse(g, h, a, s), ConfigError);
}

TEST_CASE("assembled input is the prompt prefix plus the fused block") {
  Rng rng(45);
  const Tensor prompt = random_matrix(3, 8, rng);
  const Tensor fused = random_matrix(4, 8, rng);

  ad::Graph g;
  auto [input, range] = assemble_input(g, prompt, g.input(fused), 16);
  CHECK(range.first == 3);
  CHECK(range.second == 7);
  const Tensor& in = g.val(input);
  REQUIRE(in.rows() == 7);
  CHECK(in(0, 0) == prompt(0, 0));
  CHECK(in(2, 7) == prompt(2, 7));
  CHECK(in(3, 0) == fused(0, 0));
  CHECK(in(6, 7) == fused(3, 7));

  auto [bare, bare_range] = assemble_input(g, Tensor({0, 8}), g.input(fused), 16);
  CHECK(bare_range.first == 0);
  CHECK(bare_range.second == 4);
  CHECK(max_abs_diff(g.val(bare), fused) == 0.0);

  CHECK_THROWS_AS(assemble_input(g, prompt, g.input(fused), 6), ConfigError);
}

TEST_CASE("the decoder is affine in the hidden states") {
  Rng rng(46);
  DecoderParams params = DecoderParams::init(kEncodedSteps, kFutureLen, 8, rng);
  for (std::size_t i = 0; i < params.b.numel(); ++i) params.b[i] = rng.uniform(-1, 1);
  const Tensor a = random_matrix(kEncodedSteps, 8, rng);
  const Tensor b = random_matrix(kEncodedSteps, 8, rng);
  Tensor sum = a;
  sum.add_scaled(b, 1.0);

  ad::Graph g;
  const DecoderHandles h = register_decoder(g, params, false);
  const Tensor da = g.val(decode(g, h, g.input(a), kFutureLen));
  const Tensor db = g.val(decode(g, h, g.input(b), kFutureLen));
  const Tensor dsum = g.val(decode(g, h, g.input(sum), kFutureLen));
  const Tensor dzero = g.val(decode(g, h, g.input(Tensor({kEncodedSteps, 8})), kFutureLen));

  REQUIRE(da.rows() == kFutureLen);
  REQUIRE(da.cols() == 2);
  // decode(a+b) - decode(a) - decode(b) + decode(0) vanishes for affine maps.
  for (std::size_t i = 0; i < kFutureLen; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(std::fabs(dsum(i, j) - da(i, j) - db(i, j) + dzero(i, j)) <= 1e-9);

  // Zero hidden states read out the bias exactly.
  for (std::size_t i = 0; i < kFutureLen; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(dzero(i, j) == params.b(0, 2 * i + j));
}

TEST_CASE("decode validates the flattened width") {
  Rng rng(47);
  const DecoderParams params = DecoderParams::init(kEncodedSteps, kFutureLen, 8, rng);
  ad::Graph g;
  const DecoderHandles h = register_decoder(g, params, false);
  CHECK_THROWS_AS(decode(g, h, g.input(Tensor({kEncodedSteps, 9})), kFutureLen), ConfigError);
}

TEST_CASE("toy-dim fusion-to-decoder gradients agree end to end") {
  // T=2 scene tokens, horizon 3: the whole tail of the model at widths small
  // enough for an exhaustive central-difference sweep, run through the frozen
  // backbone so the chain rule crosses its blocks too.
  Rng rng(49);
  BackboneSpec spec;
  spec.d_llm = 8;
  spec.vocab = 32;
  spec.layers = 1;
  spec.n_heads = 2;
  spec.max_seq = 8;
  const auto backbone = make_backbone("toy", 5, &spec);

  FusionParams fusion = FusionParams::init(8, 6, 2, rng);
  DecoderParams decoder = DecoderParams::init(2, 3, 8, rng);
  const Tensor scene = random_matrix(2, 8, rng);
  const Tensor grid = random_matrix(4, 6, rng);
  const Tensor prompt = embed_tokens(*backbone, {1, 2});
  Tensor target({3, 2});
  for (std::size_t i = 0; i < target.numel(); ++i) target[i] = rng.uniform(-1, 1);

  auto build = [&](ad::Graph& g, const FusionHandles& fh, const DecoderHandles& dh) {
    const MapFeature f = feature_from(g, grid);
    ad::Value attended =
        cross_attend_map(g, fh, fusion.n_heads, g.input(scene), f, MapKvMode::kGrid);
    ad::Value fused = fuse(g, fh, attended, g.input(scene));
    auto [input, range] = assemble_input(g, prompt, fused, spec.max_seq);
    ad::Value hidden = backbone->forward(g, input);
    ad::Value out = decode(g, dh, ad::slice_rows(hidden, range.first, range.second), 3);
    ad::Value diff = ad::sub(out, g.input(target));
    return ad::mean_all(ad::mul(diff, diff));
  };
  auto loss_value = [&]() {
    ad::Graph g;
    const FusionHandles fh = register_fusion(g, fusion, true);
    const DecoderHandles dh = register_decoder(g, decoder, true);
    return g.val(build(g, fh, dh))[0];
  };

  ad::Graph g;
  const FusionHandles fh = register_fusion(g, fusion, true);
  const DecoderHandles dh = register_decoder(g, decoder, true);
  g.backward(build(g, fh, dh));

  const std::vector<ad::Value> handles = {fh.wq, fh.wk,     fh.wv,     fh.wo,
                                          fh.fuse_w, fh.fuse_b, dh.w, dh.b};
  const std::vector<std::string> names = {"wq", "wk", "wv", "wo", "fuse_w", "fuse_b",
                                          "dec_w", "dec_b"};
  std::vector<Tensor*> tensors = {&fusion.wq, &fusion.wk,     &fusion.wv,     &fusion.wo,
                                  &fusion.fuse_w, &fusion.fuse_b, &decoder.w, &decoder.b};
  std::vector<Tensor> grads;
  for (ad::Value v : handles) grads.push_back(g.grad(v));

  const fdtest::FdReport report = fdtest::fd_compare(tensors, grads, names, loss_value, 1e-4);
  INFO("worst coordinate: " << report.where);
  CHECK(report.max_rel <= 1e-3);
}

TEST_CASE("fusion gradients agree with finite differences") {
  Rng rng(48);
  FusionParams params = FusionParams::init(8, 6, 2, rng);
  const Tensor scene = random_matrix(4, 8, rng);
  const Tensor grid = random_matrix(5, 6, rng);
  Tensor weights({4, 8});
  for (std::size_t i = 0; i < weights.numel(); ++i) weights[i] = rng.uniform(-1, 1);

  auto build = [&](ad::Graph& g, const FusionHandles& h) {
    const MapFeature f = feature_from(g, grid);
    ad::Value attended =
        cross_attend_map(g, h, params.n_heads, g.input(scene), f, MapKvMode::kGrid);
    ad::Value fused = fuse(g, h, attended, g.input(scene));
    return ad::mean_all(ad::mul(fused, g.input(weights)));
  };
  auto loss_value = [&]() {
    ad::Graph g;
    const FusionHandles h = register_fusion(g, params, true);
    return g.val(build(g, h))[0];
  };

  ad::Graph g;
  const FusionHandles h = register_fusion(g, params, true);
  g.backward(build(g, h));

  const std::vector<ad::Value> handles = {h.wq, h.wk, h.wv, h.wo, h.fuse_w, h.fuse_b};
  const std::vector<std::string> names = {"wq", "wk", "wv", "wo", "fuse_w", "fuse_b"};
  std::vector<Tensor*> tensors = {&params.wq, &params.wk,     &params.wv,
                                  &params.wo, &params.fuse_w, &params.fuse_b};
  std::vector<Tensor> grads;
  for (ad::Value v : handles) grads.push_back(g.grad(v));

  const fdtest::FdReport report = fdtest::fd_compare(tensors, grads, names, loss_value);
  INFO("worst coordinate: " << report.where);
  CHECK(report.max_rel <= 1e-3);
}
