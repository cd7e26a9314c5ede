#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "trajlm/metrics.hpp"
#include "trajlm/pipeline.hpp"
#include "trajlm/scene.hpp"

namespace trajlm {

/// Everything a training run needs, flat and fully defaulted. Config files
/// are JSON objects over these keys; absent keys keep the defaults and
/// unknown keys are errors.
struct TrainConfig {
  std::string train_data = "data/train.jsonl";
  std::string eval_data = "data/val.jsonl";
  std::string modality = "ego_neighbor_map";  // ego_only | ego_neighbor | ego_neighbor_map
  std::string map_kv = "grid";                // grid | pooled
  std::size_t d_scene = 64;
  std::size_t d_map = 64;
  std::size_t d_llm = 64;
  std::size_t map_stage1 = 16;
  std::size_t map_stage2 = 32;
  std::size_t prototypes = 32;
  std::size_t fusion_heads = 4;
  std::string backbone = "toy";
  std::uint64_t backbone_seed = 7;
  std::string prompt_text =
      "Predict the next 12 positions of the ego vehicle given 4 observed scene states and the "
      "local map.";
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 16;
  std::size_t steps = 500;
  std::string loss = "mse";  // mse | smooth_l1
  std::uint64_t seed = 1;
  std::string checkpoint = "model.ckpt";

  /// Derived views; each raises ConfigError on an invalid selector string.
  ModalityConfig modality_config() const;
  MapEncoderConfig map_encoder_config() const;
  BackboneSpec backbone_spec() const;
  PipelineDims pipeline_dims() const;
  LossKind loss_kind() const;
};

TrainConfig train_config_from_json(const std::string& text);
TrainConfig load_train_config(const std::string& path);
std::string train_config_to_json(const TrainConfig& config);

/// Trained state: every trainable group plus what is needed to rebuild the
/// frozen backbone. Backbone parameters are deliberately absent; they are
/// reconstructed from name + seed and verified against the stored checksum.
struct Checkpoint {
  TrainConfig config;
  std::uint64_t backbone_checksum = 0;
  std::uint64_t step = 0;
  std::uint64_t rng_state = 0;
  PipelineParams params;
};

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// Single-file archive: magic, format version, JSON manifest (config,
/// backbone identity, shapes), then raw little-endian doubles per group.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// A checkpoint turned back into a runnable model. The pipeline borrows the
/// backbone, so both live here together.
struct LoadedModel {
  std::unique_ptr<FrozenBackbone> backbone;
  std::unique_ptr<Pipeline> pipeline;
};
LoadedModel assemble_model(const Checkpoint& checkpoint);

/// Adaptive-moment gradient descent over one flat parameter list.
class AdamOptimizer {
public:
  AdamOptimizer(std::vector<NamedParam> params, double learning_rate, double beta1, double beta2,
                double epsilon);

  /// One update from gradients listed in registry order.
  void step(const std::vector<Tensor>& grads);
  std::uint64_t steps_taken() const { return t_; }

private:
  std::vector<NamedParam> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, epsilon_;
  std::uint64_t t_ = 0;
};

/// Gradient-based training of the non-frozen groups. Deterministic for a
/// fixed (config, dataset); the backbone checksum is invariant throughout.
/// Non-finite loss aborts with a NumericalError naming the step. The
/// per-step mean batch loss is appended to `loss_log` when given; `progress`
/// receives occasional human-readable lines.
Checkpoint train(const TrainConfig& config, const std::vector<Scene>& dataset,
                 std::vector<double>* loss_log = nullptr, std::ostream* progress = nullptr);
/// Same, loading the dataset from config.train_data.
Checkpoint train(const TrainConfig& config, std::vector<double>* loss_log = nullptr,
                 std::ostream* progress = nullptr);

struct EvalOptions {
  std::string csv_path;  // per-scene table; empty skips the file
  HorizonSpec horizons;
  double miss_threshold = 2.0;
  MissMode miss_mode = MissMode::kFinalDisplacement;
  std::size_t ie_warmup = 3;  // clamped to n_scenes - 1
};

/// Prediction + metrics over a dataset. Scene predictions are sharded across
/// threads; the IE timing pass runs on its own serial lane afterwards.
/// Scenes that lack data the checkpoint's modality needs raise a DataError
/// listing every offending scene id.
MetricsReport evaluate(const Checkpoint& checkpoint, const std::vector<Scene>& scenes,
                       const EvalOptions& options = {});
MetricsReport evaluate(const Checkpoint& checkpoint, const std::string& data_path,
                       const EvalOptions& options = {});

inline const std::vector<std::string> kAblationModalities = {"ego_only", "ego_neighbor",
                                                             "ego_neighbor_map"};

struct AblationRow {
  std::string modality;
  MetricsReport report;
};
struct AblationTable {
  std::vector<AblationRow> rows;
};

/// Trains one model per modality under the base config's budget and seed,
/// evaluates all of them on the same split, and returns one row per modality
/// (rows = modalities, columns = metrics).
AblationTable run_ablation(const TrainConfig& base, const std::vector<std::string>& modalities,
                           const std::vector<Scene>& train_set, const std::vector<Scene>& eval_set,
                           std::ostream* progress = nullptr);

std::string ablation_to_json(const AblationTable& table);
AblationTable ablation_from_json(const std::string& text);
/// Fixed-width text rendering with a header row, one line per modality.
std::string format_ablation_table(const AblationTable& table);

}  // namespace trajlm
