#include "trajlm/adapter.hpp"

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

AdapterParams AdapterParams::init(std::size_t prototypes, std::size_t vocab, std::size_t d_scene,
                                  std::size_t d_adapter, std::size_t d_llm, Rng& rng) {
  AdapterParams p;
  p.combo = init_matrix(prototypes, vocab, rng);
  p.wq = init_matrix(d_scene, d_adapter, rng);
  p.wk = init_matrix(d_llm, d_adapter, rng);
  p.wv = init_matrix(d_llm, d_adapter, rng);
  p.wo = init_matrix(d_adapter, d_llm, rng);
  return p;
}

AdapterHandles register_adapter(ad::Graph& g, const AdapterParams& params, bool trainable) {
  AdapterHandles h;
  h.combo = g.input(params.combo, trainable);
  h.wq = g.input(params.wq, trainable);
  h.wk = g.input(params.wk, trainable);
  h.wv = g.input(params.wv, trainable);
  h.wo = g.input(params.wo, trainable);
  return h;
}

ad::Value build_prototypes(ad::Graph& g, const AdapterHandles& h, ad::Value vocab_embeddings) {
  const Tensor& combo = g.val(h.combo);
  const Tensor& vocab = g.val(vocab_embeddings);
  if (combo.cols() != vocab.rows()) {
    throw ConfigError("prototype map expects vocabulary size " + std::to_string(combo.cols()) +
                      ", backbone has " + std::to_string(vocab.rows()));
  }
  return ad::matmul(h.combo, vocab_embeddings);
}

ad::Value reprogram(ad::Graph& g, const AdapterHandles& h, ad::Value scene_features,
                    ad::Value prototypes) {
  const std::size_t d_adapter = g.val(h.wq).cols();
  ad::Value q = ad::matmul(scene_features, h.wq);  // T x d_adapter
  ad::Value k = ad::matmul(prototypes, h.wk);      // P x d_adapter
  ad::Value v = ad::matmul(prototypes, h.wv);      // P x d_adapter
  ad::Value logits =
      ad::scale(ad::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d_adapter)));
  ad::Value attn = ad::softmax_rows(logits);  // T x P
  return ad::matmul(ad::matmul(attn, v), h.wo);  // T x d_llm
}

}  // namespace trajlm
