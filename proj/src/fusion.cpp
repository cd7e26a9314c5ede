#include "trajlm/fusion.hpp"

#include <cmath>

#include "trajlm/errors.hpp"

namespace trajlm {

namespace {

Tensor init_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

FusionParams FusionParams::init(std::size_t d_llm, std::size_t d_map, std::size_t n_heads,
                                Rng& rng) {
  if (d_llm % n_heads != 0) {
    throw ConfigError("fusion width " + std::to_string(d_llm) + " not divisible by " +
                      std::to_string(n_heads) + " heads");
  }
  FusionParams p;
  p.n_heads = n_heads;
  p.wq = init_matrix(d_llm, d_llm, rng);
  p.wk = init_matrix(d_map, d_llm, rng);
  p.wv = init_matrix(d_map, d_llm, rng);
  p.wo = init_matrix(d_llm, d_llm, rng);
  p.fuse_w = init_matrix(2 * d_llm, d_llm, rng);
  p.fuse_b = Tensor({1, d_llm});
  return p;
}

FusionHandles register_fusion(ad::Graph& g, const FusionParams& params, bool trainable) {
  FusionHandles h;
  h.wq = g.input(params.wq, trainable);
  h.wk = g.input(params.wk, trainable);
  h.wv = g.input(params.wv, trainable);
  h.wo = g.input(params.wo, trainable);
  h.fuse_w = g.input(params.fuse_w, trainable);
  h.fuse_b = g.input(params.fuse_b, trainable);
  return h;
}

ad::Value cross_attend_map(ad::Graph& g, const FusionHandles& h, std::size_t n_heads,
                           ad::Value scene_tokens, const MapFeature& map_feature, MapKvMode mode) {
  ad::Value kv_source = mode == MapKvMode::kGrid ? map_feature.grid_tokens : map_feature.pooled;
  const std::size_t d = g.val(h.wq).cols();
  const std::size_t dh = d / n_heads;
  ad::Value q = ad::matmul(scene_tokens, h.wq);  // T x d
  ad::Value k = ad::matmul(kv_source, h.wk);     // G x d
  ad::Value v = ad::matmul(kv_source, h.wv);     // G x d
  ad::Value heads;
  for (std::size_t head = 0; head < n_heads; ++head) {
    ad::Value qh = ad::slice_cols(q, head * dh, (head + 1) * dh);
    ad::Value kh = ad::slice_cols(k, head * dh, (head + 1) * dh);
    ad::Value vh = ad::slice_cols(v, head * dh, (head + 1) * dh);
    ad::Value logits =
        ad::scale(ad::matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
    ad::Value attn = ad::softmax_rows(logits);
    ad::Value out = ad::matmul(attn, vh);
    heads = head == 0 ? out : ad::concat_cols(heads, out);
  }
  return ad::matmul(heads, h.wo);
}

ad::Value fuse(ad::Graph& g, const FusionHandles& h, ad::Value attended_map,
               ad::Value scene_tokens) {
  const Tensor& a = g.val(attended_map);
  const Tensor& s = g.val(scene_tokens);
  if (a.rows() != s.rows()) {
    throw ConfigError("fuse: sequence lengths " + std::to_string(a.rows()) + " vs " +
                      std::to_string(s.rows()));
  }
  return ad::add_rowvec(ad::matmul(ad::concat_cols(attended_map, scene_tokens), h.fuse_w),
                        h.fuse_b);
}

std::pair<ad::Value, std::pair<std::size_t, std::size_t>> assemble_input(
    ad::Graph& g, const Tensor& prompt_embeddings, ad::Value fused, std::size_t max_seq) {
  const std::size_t prompt_len = prompt_embeddings.rows();
  const std::size_t t = g.val(fused).rows();
  if (prompt_len + t > max_seq) {
    throw ConfigError("assembled input length " + std::to_string(prompt_len + t) +
                      " exceeds backbone maximum " + std::to_string(max_seq));
  }
  ad::Value input = prompt_len == 0 ? fused : ad::concat_rows(g.input(prompt_embeddings), fused);
  return {input, {prompt_len, prompt_len + t}};
}

DecoderParams DecoderParams::init(std::size_t steps, std::size_t horizon, std::size_t d_llm,
                                  Rng& rng) {
  DecoderParams p;
  p.w = init_matrix(steps * d_llm, 2 * horizon, rng);
  p.b = Tensor({1, 2 * horizon});  // zero: the pure-matrix reading stays recoverable
  return p;
}

DecoderHandles register_decoder(ad::Graph& g, const DecoderParams& params, bool trainable) {
  DecoderHandles h;
  h.w = g.input(params.w, trainable);
  h.b = g.input(params.b, trainable);
  return h;
}

ad::Value decode(ad::Graph& g, const DecoderHandles& h, ad::Value scene_hidden,
                 std::size_t horizon) {
  const Tensor& hs = g.val(scene_hidden);
  const std::size_t flat = hs.rows() * hs.cols();
  if (flat != g.val(h.w).rows()) {
    throw ConfigError("decode: hidden states " + hs.shape_str() + " do not match decoder input " +
                      std::to_string(g.val(h.w).rows()));
  }
  ad::Value row = ad::reshape(scene_hidden, {1, flat});
  ad::Value out = ad::add_rowvec(ad::matmul(row, h.w), h.b);  // 1 x 2N
  return ad::reshape(out, {horizon, 2});
}

}  // namespace trajlm
