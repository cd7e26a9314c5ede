#pragma once

#include <vector>

#include "trajlm/graph.hpp"
#include "trajlm/rng.hpp"
#include "trajlm/scene.hpp"
#include "trajlm/tensor.hpp"

namespace trajlm {

/// Per-timestep state vectors: displacement over the last step concatenated
/// with the offset from the ego's current position.
struct VectorizedScene {
  Tensor ego;                    // T x 4
  std::vector<Tensor> neighbors; // per encoded step: K_t x 4 (may be empty)
};

/// Parameters of the interaction encoder: the two-layer lift Phi, the
/// attention projections, and the gating vector.
struct SceneEncoderParams {
  Tensor phi_w1, phi_b1;  // 4 x d, 1 x d
  Tensor phi_w2, phi_b2;  // d x d, 1 x d
  Tensor wq, wk, wv;      // d x d each
  Tensor alpha;           // 1 x d

  static SceneEncoderParams init(std::size_t d_scene, Rng& rng);
  std::size_t d_scene() const { return alpha.cols(); }
};

/// Graph handles for one forward build.
struct SceneEncoderHandles {
  ad::Value phi_w1, phi_b1, phi_w2, phi_b2, wq, wk, wv, alpha;
};
SceneEncoderHandles register_scene_encoder(ad::Graph& g, const SceneEncoderParams& params,
                                           bool trainable);

/// State vectors for every agent with a valid predecessor. The scene must
/// already be normalized.
VectorizedScene vectorize(const Scene& scene);

/// Ego-neighbor cross-attention at one timestep. Zero neighbors yield the
/// zero vector by convention.
ad::Value encode_interactions(ad::Graph& g, const SceneEncoderHandles& h, ad::Value ego_feature,
                              const Tensor& neighbor_states);

/// Gated fusion of interaction features with the ego's own feature. Both
/// gates are free: sigmoid(alpha) and sigmoid(1 - alpha), exactly as written.
ad::Value fuse_gate(ad::Graph& g, const SceneEncoderHandles& h, ad::Value interactions,
                    ad::Value ego_feature);

/// Full per-scene encoding: vectorize, per-step attention, gating. Returns a
/// T x d_scene feature matrix.
ad::Value encode_scene(ad::Graph& g, const SceneEncoderHandles& h, const VectorizedScene& vs);

}  // namespace trajlm
