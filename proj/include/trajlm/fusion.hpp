#pragma once

#include <cstddef>
#include <utility>

#include "trajlm/graph.hpp"
#include "trajlm/map_encoder.hpp"
#include "trajlm/rng.hpp"
#include "trajlm/scene.hpp"
#include "trajlm/tensor.hpp"

namespace trajlm {

/// How the map feature feeds the cross-attention: the spatial token grid
/// (default) or the single pooled vector (degenerate attention, kept for
/// fidelity to the single-vector formulation).
enum class MapKvMode { kGrid, kPooled };

/// Map cross-attention plus the concat-linear fusion.
struct FusionParams {
  std::size_t n_heads = 4;
  Tensor wq;              // d_llm x d_llm
  Tensor wk, wv;          // d_map x d_llm
  Tensor wo;              // d_llm x d_llm
  Tensor fuse_w;          // 2*d_llm x d_llm
  Tensor fuse_b;          // 1 x d_llm

  static FusionParams init(std::size_t d_llm, std::size_t d_map, std::size_t n_heads, Rng& rng);
};

struct FusionHandles {
  ad::Value wq, wk, wv, wo, fuse_w, fuse_b;
};
FusionHandles register_fusion(ad::Graph& g, const FusionParams& params, bool trainable);

/// Scene tokens attend over map tokens; output projected back to d_llm.
ad::Value cross_attend_map(ad::Graph& g, const FusionHandles& h, std::size_t n_heads,
                           ad::Value scene_tokens, const MapFeature& map_feature, MapKvMode mode);

/// Per-timestep concat(map_attended, scene_token) through the fusion linear.
ad::Value fuse(ad::Graph& g, const FusionHandles& h, ad::Value attended_map,
               ad::Value scene_tokens);

/// Prompt prefix followed by the fused scene tokens; returns the input and
/// the [begin, end) row range the scene tokens occupy.
std::pair<ad::Value, std::pair<std::size_t, std::size_t>> assemble_input(
    ad::Graph& g, const Tensor& prompt_embeddings, ad::Value fused, std::size_t max_seq);

/// Flattening linear decoder: T x d_llm hidden states to N x 2 offsets.
struct DecoderParams {
  Tensor w;  // (T*d_llm) x 2N
  Tensor b;  // 1 x 2N

  static DecoderParams init(std::size_t steps, std::size_t horizon, std::size_t d_llm, Rng& rng);
};

struct DecoderHandles {
  ad::Value w, b;
};
DecoderHandles register_decoder(ad::Graph& g, const DecoderParams& params, bool trainable);

ad::Value decode(ad::Graph& g, const DecoderHandles& h, ad::Value scene_hidden,
                 std::size_t horizon);

}  // namespace trajlm
