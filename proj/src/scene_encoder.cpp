#include "trajlm/scene_encoder.hpp"

#include <cmath>

#include "trajlm/errors.hpp"

namespace trajlm {

namespace {

/// Scaled-uniform init, bound 1/sqrt(fan_in).
Tensor init_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

/// Two-layer lift with a smooth nonlinearity between the layers.
ad::Value phi(ad::Graph&, const SceneEncoderHandles& h, ad::Value x) {
  ad::Value hidden = ad::gelu(ad::add_rowvec(ad::matmul(x, h.phi_w1), h.phi_b1));
  return ad::add_rowvec(ad::matmul(hidden, h.phi_w2), h.phi_b2);
}

}  // namespace

SceneEncoderParams SceneEncoderParams::init(std::size_t d_scene, Rng& rng) {
  SceneEncoderParams p;
  p.phi_w1 = init_matrix(4, d_scene, rng);
  p.phi_b1 = Tensor({1, d_scene});
  p.phi_w2 = init_matrix(d_scene, d_scene, rng);
  p.phi_b2 = Tensor({1, d_scene});
  p.wq = init_matrix(d_scene, d_scene, rng);
  p.wk = init_matrix(d_scene, d_scene, rng);
  p.wv = init_matrix(d_scene, d_scene, rng);
  p.alpha = Tensor({1, d_scene});  // zero: both gates start near balance
  return p;
}

SceneEncoderHandles register_scene_encoder(ad::Graph& g, const SceneEncoderParams& params,
                                           bool trainable) {
  SceneEncoderHandles h;
  h.phi_w1 = g.input(params.phi_w1, trainable);
  h.phi_b1 = g.input(params.phi_b1, trainable);
  h.phi_w2 = g.input(params.phi_w2, trainable);
  h.phi_b2 = g.input(params.phi_b2, trainable);
  h.wq = g.input(params.wq, trainable);
  h.wk = g.input(params.wk, trainable);
  h.wv = g.input(params.wv, trainable);
  h.alpha = g.input(params.alpha, trainable);
  return h;
}

VectorizedScene vectorize(const Scene& scene) {
  if (scene.ego.positions.size() != kRawHistoryLen)
    throw DataError("vectorize: ego history length " + std::to_string(scene.ego.positions.size()));
  VectorizedScene vs;
  vs.ego = Tensor({kEncodedSteps, 4});
  const Vec2 ego_now = scene.ego.positions.back();
  for (std::size_t t = 1; t < kRawHistoryLen; ++t) {
    const Vec2 cur = scene.ego.positions[t];
    const Vec2 prev = scene.ego.positions[t - 1];
    const std::size_t row = t - 1;
    vs.ego(row, 0) = cur.x - prev.x;
    vs.ego(row, 1) = cur.y - prev.y;
    vs.ego(row, 2) = cur.x - ego_now.x;
    vs.ego(row, 3) = cur.y - ego_now.y;
  }

  vs.neighbors.resize(kEncodedSteps);
  for (std::size_t t = 1; t < kRawHistoryLen; ++t) {
    // A neighbor enters step t only with a valid predecessor at t-1.
    std::vector<double> rows;
    for (const Track& n : scene.neighbors) {
      if (n.positions.size() != kRawHistoryLen) {
        throw DataError("vectorize: neighbor history length " + std::to_string(n.positions.size()));
      }
      if (!n.present[t] || !n.present[t - 1]) continue;
      const Vec2 cur = n.positions[t];
      const Vec2 prev = n.positions[t - 1];
      rows.push_back(cur.x - prev.x);
      rows.push_back(cur.y - prev.y);
      rows.push_back(cur.x - ego_now.x);
      rows.push_back(cur.y - ego_now.y);
    }
    const std::size_t count = rows.size() / 4;
    if (count > 0) vs.neighbors[t - 1] = Tensor({count, 4}, std::move(rows));
  }
  return vs;
}

ad::Value encode_interactions(ad::Graph& g, const SceneEncoderHandles& h, ad::Value ego_feature,
                              const Tensor& neighbor_states) {
  const std::size_t d = g.val(h.alpha).cols();
  if (neighbor_states.empty()) return g.input(Tensor({1, d}));

  ad::Value n_feat = phi(g, h, g.input(neighbor_states));
  ad::Value q = ad::matmul(ego_feature, h.wq);        // 1 x d
  ad::Value k = ad::matmul(n_feat, h.wk);             // K x d
  ad::Value v = ad::matmul(n_feat, h.wv);             // K x d
  ad::Value logits = ad::scale(ad::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d)));
  ad::Value attn = ad::softmax_rows(logits);          // 1 x K
  return ad::matmul(attn, v);                         // 1 x d
}

ad::Value fuse_gate(ad::Graph& g, const SceneEncoderHandles& h, ad::Value interactions,
                    ad::Value ego_feature) {
  const std::size_t d = g.val(h.alpha).cols();
  ad::Value gate_n = ad::sigmoid(h.alpha);
  ad::Value one = g.input(Tensor::full({1, d}, 1.0));
  ad::Value gate_e = ad::sigmoid(ad::sub(one, h.alpha));
  return ad::add(ad::mul(gate_n, interactions), ad::mul(gate_e, ego_feature));
}

ad::Value encode_scene(ad::Graph& g, const SceneEncoderHandles& h, const VectorizedScene& vs) {
  ad::Value ego_feat = phi(g, h, g.input(vs.ego));  // T x d
  ad::Value out;
  for (std::size_t t = 0; t < kEncodedSteps; ++t) {
    ad::Value ego_t = ad::slice_rows(ego_feat, t, t + 1);
    ad::Value inter = encode_interactions(g, h, ego_t, vs.neighbors[t]);
    ad::Value fused = fuse_gate(g, h, inter, ego_t);
    out = t == 0 ? fused : ad::concat_rows(out, fused);
  }
  return out;
}

}  // namespace trajlm
