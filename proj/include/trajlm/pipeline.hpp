#pragma once

#include <string>
#include <vector>

#include "trajlm/adapter.hpp"
#include "trajlm/backbone.hpp"
#include "trajlm/fusion.hpp"
#include "trajlm/map_encoder.hpp"
#include "trajlm/scene_encoder.hpp"

namespace trajlm {

/// Input-modality switches. Disabling a modality is an exact structural
/// subset: neighbors are stripped from the scene, the map path is bypassed.
struct ModalityConfig {
  bool use_neighbors = true;
  bool use_map = true;
  MapKvMode map_kv_mode = MapKvMode::kGrid;
  std::string prompt_text =
      "Predict the next 12 positions of the ego vehicle given 4 observed scene states and the "
      "local map.";
};

/// Widths of every stage. d_adapter defaults to d_llm when left 0.
struct PipelineDims {
  std::size_t d_scene = 64;
  std::size_t d_map = 64;
  std::size_t d_llm = 64;
  std::size_t d_adapter = 0;
  std::size_t prototypes = 32;
  std::size_t fusion_heads = 4;

  std::size_t adapter_width() const { return d_adapter == 0 ? d_llm : d_adapter; }
};

struct PipelineParams {
  SceneEncoderParams scene;
  MapEncoderParams map;
  AdapterParams adapter;
  FusionParams fusion;
  DecoderParams decoder;

  /// `map_config` overrides the default conv-stage widths; its d_map must
  /// agree with dims.d_map.
  static PipelineParams init(const PipelineDims& dims, const BackboneSpec& backbone, Rng& rng,
                             const MapEncoderConfig* map_config = nullptr);
};

/// Named view over every trainable tensor, in a fixed canonical order shared
/// by the optimizer, the checkpoint format, and the gradient handles.
struct NamedParam {
  std::string name;
  Tensor* tensor;
};
std::vector<NamedParam> parameter_registry(PipelineParams& params);

struct PredictedTrajectory {
  std::vector<Vec2> points;  // kFutureLen ego-frame positions
};

enum class LossKind { kMse, kSmoothL1 };

/// All graph handles of one forward build. `flat` lists every trainable
/// parameter's Value in registry order.
struct PipelineHandles {
  SceneEncoderHandles scene;
  MapEncoderHandles map;
  AdapterHandles adapter;
  FusionHandles fusion;
  DecoderHandles decoder;
  std::vector<ad::Value> flat;
};

/// End-to-end model: scene encoding, reprogramming, optional map fusion, the
/// frozen backbone, and the flattening decoder.
class Pipeline {
public:
  Pipeline(PipelineDims dims, ModalityConfig modality, PipelineParams params,
           const FrozenBackbone* backbone);

  const PipelineDims& dims() const { return dims_; }
  const ModalityConfig& modality() const { return modality_; }
  PipelineParams& params() { return params_; }
  const PipelineParams& params() const { return params_; }
  const FrozenBackbone& backbone() const { return *backbone_; }

  PipelineHandles register_all(ad::Graph& g, bool trainable) const;

  /// Prediction head inside an existing graph. The scene must be normalized.
  ad::Value build_prediction(ad::Graph& g, const PipelineHandles& h, const Scene& normalized) const;

  /// Scalar training loss for one normalized scene with ground truth.
  ad::Value build_loss(ad::Graph& g, const PipelineHandles& h, const Scene& normalized,
                       LossKind loss) const;

  /// Full inference from a world-frame scene; output in the ego frame.
  PredictedTrajectory predict(const Scene& scene) const;
  /// Same, mapped back into the world frame of the input scene.
  PredictedTrajectory predict_world(const Scene& scene) const;

  /// Raises DataError when the scene lacks data the modality config needs.
  void check_scene(const Scene& scene) const;

private:
  PipelineDims dims_;
  ModalityConfig modality_;
  PipelineParams params_;
  const FrozenBackbone* backbone_;
  Tensor prompt_embeddings_;
};

/// Mean squared Euclidean error over the horizon (or elementwise smooth-L1).
ad::Value trajectory_loss(ad::Graph& g, ad::Value pred, const Tensor& truth, LossKind kind);

/// Ground-truth future as an N x 2 tensor.
Tensor future_tensor(const Scene& scene);

}  // namespace trajlm
