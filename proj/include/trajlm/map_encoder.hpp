#pragma once

#include "trajlm/graph.hpp"
#include "trajlm/rng.hpp"
#include "trajlm/scene.hpp"
#include "trajlm/tensor.hpp"

namespace trajlm {

/// Three stride-2 convolution stages over the binary raster.
struct MapEncoderConfig {
  std::size_t in_channels = MapRaster::kChannels;
  std::size_t stage1 = 16;
  std::size_t stage2 = 32;
  std::size_t d_map = 64;  // channel width of the last stage == token width
  std::size_t kernel = 3;
  std::size_t stride = 2;
  std::size_t pad = 1;
};

struct MapEncoderParams {
  MapEncoderConfig config;
  Tensor w1, b1, w2, b2, w3, b3;

  static MapEncoderParams init(const MapEncoderConfig& config, Rng& rng);
};

struct MapEncoderHandles {
  ad::Value w1, b1, w2, b2, w3, b3;
};
MapEncoderHandles register_map_encoder(ad::Graph& g, const MapEncoderParams& params, bool trainable);

/// Spatial token grid plus its mean, both in the graph.
struct MapFeature {
  ad::Value grid_tokens;  // G x d_map
  ad::Value pooled;       // 1 x d_map
};

/// Raster as a {3,H,W} double tensor for the convolution stack.
Tensor raster_to_tensor(const MapRaster& raster);

/// Convolutional encoding of the raster: grid tokens from the final feature
/// map (row-major cells) and the pooled mean vector.
MapFeature encode_map(ad::Graph& g, const MapEncoderHandles& h, const MapEncoderConfig& config,
                      const Tensor& raster_chw);

}  // namespace trajlm
