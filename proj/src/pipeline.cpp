#include "trajlm/pipeline.hpp"

#include <cmath>

#include "trajlm/errors.hpp"

namespace trajlm {

PipelineParams PipelineParams::init(const PipelineDims& dims, const BackboneSpec& backbone,
                                    Rng& rng, const MapEncoderConfig* map_config) {
  PipelineParams p;
  p.scene = SceneEncoderParams::init(dims.d_scene, rng);
  MapEncoderConfig resolved;
  if (map_config) {
    if (map_config->d_map != dims.d_map)
      throw ConfigError("map encoder d_map " + std::to_string(map_config->d_map) +
                        " does not match pipeline d_map " + std::to_string(dims.d_map));
    resolved = *map_config;
  } else {
    resolved.d_map = dims.d_map;
  }
  p.map = MapEncoderParams::init(resolved, rng);
  p.adapter = AdapterParams::init(dims.prototypes, backbone.vocab, dims.d_scene,
                                  dims.adapter_width(), backbone.d_llm, rng);
  p.fusion = FusionParams::init(backbone.d_llm, dims.d_map, dims.fusion_heads, rng);
  p.decoder = DecoderParams::init(kEncodedSteps, kFutureLen, backbone.d_llm, rng);
  return p;
}

std::vector<NamedParam> parameter_registry(PipelineParams& p) {
  return {
      {"scene.phi_w1", &p.scene.phi_w1}, {"scene.phi_b1", &p.scene.phi_b1},
      {"scene.phi_w2", &p.scene.phi_w2}, {"scene.phi_b2", &p.scene.phi_b2},
      {"scene.wq", &p.scene.wq},         {"scene.wk", &p.scene.wk},
      {"scene.wv", &p.scene.wv},         {"scene.alpha", &p.scene.alpha},
      {"map.w1", &p.map.w1},             {"map.b1", &p.map.b1},
      {"map.w2", &p.map.w2},             {"map.b2", &p.map.b2},
      {"map.w3", &p.map.w3},             {"map.b3", &p.map.b3},
      {"adapter.combo", &p.adapter.combo}, {"adapter.wq", &p.adapter.wq},
      {"adapter.wk", &p.adapter.wk},     {"adapter.wv", &p.adapter.wv},
      {"adapter.wo", &p.adapter.wo},     {"fusion.wq", &p.fusion.wq},
      {"fusion.wk", &p.fusion.wk},       {"fusion.wv", &p.fusion.wv},
      {"fusion.wo", &p.fusion.wo},       {"fusion.fuse_w", &p.fusion.fuse_w},
      {"fusion.fuse_b", &p.fusion.fuse_b}, {"decoder.w", &p.decoder.w},
      {"decoder.b", &p.decoder.b},
  };
}

Pipeline::Pipeline(PipelineDims dims, ModalityConfig modality, PipelineParams params,
                   const FrozenBackbone* backbone)
    : dims_(std::move(dims)),
      modality_(std::move(modality)),
      params_(std::move(params)),
      backbone_(backbone) {
  if (backbone_ == nullptr) throw ConfigError("pipeline needs a backbone");
  if (backbone_->spec().d_llm != params_.fusion.wq.rows()) {
    throw ConfigError("fusion width " + std::to_string(params_.fusion.wq.rows()) +
                      " does not match backbone width " +
                      std::to_string(backbone_->spec().d_llm));
  }
  prompt_embeddings_ = embed_prompt(*backbone_, modality_.prompt_text);
}

PipelineHandles Pipeline::register_all(ad::Graph& g, bool trainable) const {
  // Mirrors parameter_registry order so handle i carries the gradient of
  // registry entry i.
  PipelineHandles h;
  h.scene = register_scene_encoder(g, params_.scene, trainable);
  h.map = register_map_encoder(g, params_.map, trainable);
  h.adapter = register_adapter(g, params_.adapter, trainable);
  h.fusion = register_fusion(g, params_.fusion, trainable);
  h.decoder = register_decoder(g, params_.decoder, trainable);
  h.flat = {h.scene.phi_w1, h.scene.phi_b1, h.scene.phi_w2, h.scene.phi_b2,
            h.scene.wq,     h.scene.wk,     h.scene.wv,     h.scene.alpha,
            h.map.w1,       h.map.b1,       h.map.w2,       h.map.b2,
            h.map.w3,       h.map.b3,       h.adapter.combo, h.adapter.wq,
            h.adapter.wk,   h.adapter.wv,   h.adapter.wo,   h.fusion.wq,
            h.fusion.wk,    h.fusion.wv,    h.fusion.wo,    h.fusion.fuse_w,
            h.fusion.fuse_b, h.decoder.w,   h.decoder.b};
  return h;
}

void Pipeline::check_scene(const Scene& scene) const {
  if (modality_.use_map && !scene.map_raster) {
    throw DataError("scene '" + scene.id + "' has no map raster but the map modality is enabled");
  }
}

ad::Value Pipeline::build_prediction(ad::Graph& g, const PipelineHandles& h,
                                     const Scene& normalized) const {
  check_scene(normalized);

  Scene working = normalized;
  if (!modality_.use_neighbors) working.neighbors.clear();

  // Eqs. 1-4: per-step interaction features.
  ad::Value scene_feats = encode_scene(g, h.scene, vectorize(working));
  // Eq. 5: into the backbone's embedding space via vocabulary prototypes.
  ad::Value vocab = g.input(backbone_->vocab_embeddings());
  ad::Value prototypes = build_prototypes(g, h.adapter, vocab);
  ad::Value scene_tokens = reprogram(g, h.adapter, scene_feats, prototypes);

  // Eqs. 6-8: map path, bypassed entirely when the modality is off.
  ad::Value fused = scene_tokens;
  if (modality_.use_map) {
    MapFeature map_feature =
        encode_map(g, h.map, params_.map.config, raster_to_tensor(*working.map_raster));
    ad::Value attended = cross_attend_map(g, h.fusion, params_.fusion.n_heads, scene_tokens,
                                          map_feature, modality_.map_kv_mode);
    fused = fuse(g, h.fusion, attended, scene_tokens);
  }

  // Prompt prefix, frozen backbone, Eq. 9 decoder over the scene positions.
  auto [input, range] = assemble_input(g, prompt_embeddings_, fused, backbone_->spec().max_seq);
  ad::Value hidden = backbone_->forward(g, input);
  ad::Value scene_hidden = ad::slice_rows(hidden, range.first, range.second);
  return decode(g, h.decoder, scene_hidden, kFutureLen);
}

Tensor future_tensor(const Scene& scene) {
  if (!scene.future) throw DataError("scene '" + scene.id + "' has no ground-truth future");
  Tensor t({kFutureLen, 2});
  for (std::size_t i = 0; i < kFutureLen; ++i) {
    t(i, 0) = (*scene.future)[i].x;
    t(i, 1) = (*scene.future)[i].y;
  }
  return t;
}

ad::Value trajectory_loss(ad::Graph& g, ad::Value pred, const Tensor& truth, LossKind kind) {
  ad::Value diff = ad::sub(pred, g.input(truth));
  if (kind == LossKind::kSmoothL1) {
    return ad::scale(ad::mean_all(ad::huber(diff, 1.0)), 2.0);
  }
  // Mean over points of squared Euclidean distance: 2x the elementwise mean.
  return ad::scale(ad::mean_all(ad::mul(diff, diff)), 2.0);
}

ad::Value Pipeline::build_loss(ad::Graph& g, const PipelineHandles& h, const Scene& normalized,
                               LossKind loss) const {
  ad::Value pred = build_prediction(g, h, normalized);
  return trajectory_loss(g, pred, future_tensor(normalized), loss);
}

PredictedTrajectory Pipeline::predict(const Scene& scene) const {
  const Scene normalized = normalize_scene(scene);
  ad::Graph g;
  const PipelineHandles h = register_all(g, /*trainable=*/false);
  const Tensor& out = g.val(build_prediction(g, h, normalized));
  PredictedTrajectory traj;
  traj.points.resize(kFutureLen);
  for (std::size_t i = 0; i < kFutureLen; ++i) traj.points[i] = {out(i, 0), out(i, 1)};
  return traj;
}

PredictedTrajectory Pipeline::predict_world(const Scene& scene) const {
  PredictedTrajectory traj = predict(scene);
  bool fallback = false;
  const double heading = derive_heading(scene, fallback);
  const Vec2 origin = scene.ego.positions.back();
  for (Vec2& p : traj.points) p = ego_to_world(p, origin, heading);
  return traj;
}

}  // namespace trajlm
