#include "trajlm/map_encoder.hpp"

#include <cmath>

#include "trajlm/errors.hpp"

namespace trajlm {

namespace {

Tensor init_conv(std::size_t out_ch, std::size_t in_ch, std::size_t k, Rng& rng) {
  Tensor t({out_ch, in_ch, k, k});
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch * k * k));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

MapEncoderParams MapEncoderParams::init(const MapEncoderConfig& config, Rng& rng) {
  MapEncoderParams p;
  p.config = config;
  p.w1 = init_conv(config.stage1, config.in_channels, config.kernel, rng);
  p.b1 = Tensor({config.stage1});
  p.w2 = init_conv(config.stage2, config.stage1, config.kernel, rng);
  p.b2 = Tensor({config.stage2});
  p.w3 = init_conv(config.d_map, config.stage2, config.kernel, rng);
  p.b3 = Tensor({config.d_map});
  return p;
}

MapEncoderHandles register_map_encoder(ad::Graph& g, const MapEncoderParams& params,
                                       bool trainable) {
  MapEncoderHandles h;
  h.w1 = g.input(params.w1, trainable);
  h.b1 = g.input(params.b1, trainable);
  h.w2 = g.input(params.w2, trainable);
  h.b2 = g.input(params.b2, trainable);
  h.w3 = g.input(params.w3, trainable);
  h.b3 = g.input(params.b3, trainable);
  return h;
}

Tensor raster_to_tensor(const MapRaster& raster) {
  Tensor t({MapRaster::kChannels, raster.height, raster.width});
  for (std::size_t c = 0; c < MapRaster::kChannels; ++c)
    for (std::size_t i = 0; i < raster.height * raster.width; ++i)
      t[c * raster.height * raster.width + i] = static_cast<double>(raster.channels[c][i]);
  return t;
}

MapFeature encode_map(ad::Graph& g, const MapEncoderHandles& h, const MapEncoderConfig& config,
                      const Tensor& raster_chw) {
  if (raster_chw.ndim() != 3 || raster_chw.shape()[0] != config.in_channels) {
    throw ConfigError("encode_map: raster shape " + raster_chw.shape_str() + ", expected {" +
                      std::to_string(config.in_channels) + ",H,W}");
  }
  ad::Value x = g.input(raster_chw);
  x = ad::gelu(ad::conv2d(x, h.w1, h.b1, config.stride, config.pad));
  x = ad::gelu(ad::conv2d(x, h.w2, h.b2, config.stride, config.pad));
  x = ad::gelu(ad::conv2d(x, h.w3, h.b3, config.stride, config.pad));
  MapFeature f;
  f.grid_tokens = ad::chw_to_tokens(x);
  f.pooled = ad::mean_rows(f.grid_tokens);
  return f;
}

}  // namespace trajlm
