#include "trajlm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "trajlm/errors.hpp"
#include "trajlm/scene_io.hpp"

namespace trajlm {

namespace {

using ordered_json = nlohmann::ordered_json;

template <typename T>
void read_key(const ordered_json& doc, const char* key, T& out) {
  if (!doc.contains(key)) return;
  try {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!doc[key].is_string()) throw DataError("type");
      out = doc[key].template get<std::string>();
    } else if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!doc[key].is_number_unsigned())
        throw DataError("type");
      out = doc[key].template get<T>();
    } else {
      if (!doc[key].is_number()) throw DataError("type");
      out = doc[key].template get<T>();
    }
  } catch (const std::exception&) {
    throw ConfigError(std::string("train config: bad value for key '") + key + "'");
  }
}

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys = {
      "train_data",   "eval_data",  "modality",     "map_kv",        "d_scene",
      "d_map",        "d_llm",      "map_stage1",   "map_stage2",    "prototypes",
      "fusion_heads", "backbone",   "backbone_seed", "prompt_text",  "learning_rate",
      "beta1",        "beta2",      "adam_epsilon", "batch_size",    "steps",
      "loss",         "seed",       "checkpoint"};
  return keys;
}

TrainConfig train_config_from_doc(const ordered_json& doc) {
  if (!doc.is_object()) throw ConfigError("train config: top level must be a JSON object");
  const auto& keys = train_config_keys();
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ConfigError("train config: unknown key '" + key + "'");
  }
  TrainConfig c;
  read_key(doc, "train_data", c.train_data);
  read_key(doc, "eval_data", c.eval_data);
  read_key(doc, "modality", c.modality);
  read_key(doc, "map_kv", c.map_kv);
  read_key(doc, "d_scene", c.d_scene);
  read_key(doc, "d_map", c.d_map);
  read_key(doc, "d_llm", c.d_llm);
  read_key(doc, "map_stage1", c.map_stage1);
  read_key(doc, "map_stage2", c.map_stage2);
  read_key(doc, "prototypes", c.prototypes);
  read_key(doc, "fusion_heads", c.fusion_heads);
  read_key(doc, "backbone", c.backbone);
  read_key(doc, "backbone_seed", c.backbone_seed);
  read_key(doc, "prompt_text", c.prompt_text);
  read_key(doc, "learning_rate", c.learning_rate);
  read_key(doc, "beta1", c.beta1);
  read_key(doc, "beta2", c.beta2);
  read_key(doc, "adam_epsilon", c.adam_epsilon);
  read_key(doc, "batch_size", c.batch_size);
  read_key(doc, "steps", c.steps);
  read_key(doc, "loss", c.loss);
  read_key(doc, "seed", c.seed);
  read_key(doc, "checkpoint", c.checkpoint);
  return c;
}

ordered_json train_config_to_doc(const TrainConfig& c) {
  ordered_json doc;
  doc["train_data"] = c.train_data;
  doc["eval_data"] = c.eval_data;
  doc["modality"] = c.modality;
  doc["map_kv"] = c.map_kv;
  doc["d_scene"] = c.d_scene;
  doc["d_map"] = c.d_map;
  doc["d_llm"] = c.d_llm;
  doc["map_stage1"] = c.map_stage1;
  doc["map_stage2"] = c.map_stage2;
  doc["prototypes"] = c.prototypes;
  doc["fusion_heads"] = c.fusion_heads;
  doc["backbone"] = c.backbone;
  doc["backbone_seed"] = c.backbone_seed;
  doc["prompt_text"] = c.prompt_text;
  doc["learning_rate"] = c.learning_rate;
  doc["beta1"] = c.beta1;
  doc["beta2"] = c.beta2;
  doc["adam_epsilon"] = c.adam_epsilon;
  doc["batch_size"] = c.batch_size;
  doc["steps"] = c.steps;
  doc["loss"] = c.loss;
  doc["seed"] = c.seed;
  doc["checkpoint"] = c.checkpoint;
  return doc;
}

}  // namespace

ModalityConfig TrainConfig::modality_config() const {
  ModalityConfig mc;
  mc.prompt_text = prompt_text;
  if (map_kv == "grid")
    mc.map_kv_mode = MapKvMode::kGrid;
  else if (map_kv == "pooled")
    mc.map_kv_mode = MapKvMode::kPooled;
  else
    throw ConfigError("unknown map_kv mode '" + map_kv + "' (expected grid or pooled)");
  if (modality == "ego_only") {
    mc.use_neighbors = false;
    mc.use_map = false;
  } else if (modality == "ego_neighbor") {
    mc.use_neighbors = true;
    mc.use_map = false;
  } else if (modality == "ego_neighbor_map") {
    mc.use_neighbors = true;
    mc.use_map = true;
  } else {
    throw ConfigError("unknown modality '" + modality +
                      "' (expected ego_only, ego_neighbor, or ego_neighbor_map)");
  }
  return mc;
}

MapEncoderConfig TrainConfig::map_encoder_config() const {
  MapEncoderConfig mc;
  mc.stage1 = map_stage1;
  mc.stage2 = map_stage2;
  mc.d_map = d_map;
  return mc;
}

BackboneSpec TrainConfig::backbone_spec() const {
  BackboneSpec spec;
  spec.d_llm = d_llm;
  return spec;
}

PipelineDims TrainConfig::pipeline_dims() const {
  PipelineDims dims;
  dims.d_scene = d_scene;
  dims.d_map = d_map;
  dims.d_llm = d_llm;
  dims.prototypes = prototypes;
  dims.fusion_heads = fusion_heads;
  return dims;
}

LossKind TrainConfig::loss_kind() const {
  if (loss == "mse") return LossKind::kMse;
  if (loss == "smooth_l1") return LossKind::kSmoothL1;
  throw ConfigError("unknown loss '" + loss + "' (expected mse or smooth_l1)");
}

TrainConfig train_config_from_json(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("train config: invalid JSON: ") + e.what());
  }
  return train_config_from_doc(doc);
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open train config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return train_config_from_json(buffer.str());
}

std::string train_config_to_json(const TrainConfig& config) {
  return train_config_to_doc(config).dump(2);
}

// ---------------------------------------------------------------------------
// Checkpoint archive
// ---------------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[8] = {'T', 'R', 'A', 'J', 'L', 'M', 'C', 'K'};

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
std::uint32_t read_u32(const std::string& buf, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
  return v;
}
std::uint64_t read_u64(const std::string& buf, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  // The registry walks a non-const params struct; copy to keep the API const.
  PipelineParams params = checkpoint.params;
  std::vector<NamedParam> registry = parameter_registry(params);

  ordered_json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["backbone"] = {{"name", checkpoint.config.backbone},
                          {"seed", checkpoint.config.backbone_seed},
                          {"checksum", checkpoint.backbone_checksum}};
  manifest["step"] = checkpoint.step;
  manifest["rng_state"] = checkpoint.rng_state;
  manifest["config"] = train_config_to_doc(checkpoint.config);
  ordered_json param_list = ordered_json::array();
  for (const NamedParam& p : registry) {
    ordered_json entry;
    entry["name"] = p.name;
    entry["shape"] = p.tensor->shape();
    param_list.push_back(entry);
  }
  manifest["params"] = param_list;
  const std::string manifest_text = manifest.dump();

  std::string blob;
  blob.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  append_u32(blob, kCheckpointFormatVersion);
  append_u64(blob, manifest_text.size());
  blob += manifest_text;
  for (const NamedParam& p : registry) {
    const std::size_t bytes = p.tensor->numel() * sizeof(double);
    const std::size_t at = blob.size();
    blob.resize(at + bytes);
    std::memcpy(blob.data() + at, p.tensor->data(), bytes);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string blob = buffer.str();

  const std::size_t header = sizeof(kCheckpointMagic) + 4 + 8;
  if (blob.size() < header || std::memcmp(blob.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw DataError("'" + path + "' is not a checkpoint file");
  const std::uint32_t version = read_u32(blob, sizeof(kCheckpointMagic));
  if (version != kCheckpointFormatVersion)
    throw DataError("unsupported checkpoint format version " + std::to_string(version) +
                    " (this build reads version " + std::to_string(kCheckpointFormatVersion) + ")");
  const std::uint64_t manifest_len = read_u64(blob, sizeof(kCheckpointMagic) + 4);
  if (blob.size() < header + manifest_len) throw DataError("checkpoint '" + path + "' is truncated");

  ordered_json manifest;
  try {
    manifest = ordered_json::parse(blob.substr(header, manifest_len));
  } catch (const std::exception& e) {
    throw DataError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }
  for (const char* field : {"format_version", "backbone", "step", "rng_state", "config", "params"})
    if (!manifest.contains(field))
      throw DataError(std::string("checkpoint manifest is missing field '") + field + "'");

  Checkpoint ck;
  ck.config = train_config_from_doc(manifest["config"]);
  ck.backbone_checksum = manifest["backbone"].at("checksum").get<std::uint64_t>();
  ck.step = manifest["step"].get<std::uint64_t>();
  ck.rng_state = manifest["rng_state"].get<std::uint64_t>();

  std::vector<NamedParam> registry = parameter_registry(ck.params);
  const ordered_json& param_list = manifest["params"];
  if (!param_list.is_array() || param_list.size() != registry.size())
    throw DataError("checkpoint parameter list does not match the model layout (" +
                    std::to_string(param_list.size()) + " groups, expected " +
                    std::to_string(registry.size()) + ")");

  std::size_t offset = header + manifest_len;
  for (std::size_t i = 0; i < registry.size(); ++i) {
    const std::string name = param_list[i].at("name").get<std::string>();
    if (name != registry[i].name)
      throw DataError("checkpoint parameter list does not match the model layout (entry " +
                      std::to_string(i) + ": '" + name + "', expected '" + registry[i].name + "')");
    const std::vector<std::size_t> shape = param_list[i].at("shape").get<std::vector<std::size_t>>();
    std::size_t numel = 1;
    for (std::size_t d : shape) numel *= d;
    const std::size_t bytes = numel * sizeof(double);
    if (blob.size() < offset + bytes) throw DataError("checkpoint '" + path + "' is truncated");
    std::vector<double> data(numel);
    std::memcpy(data.data(), blob.data() + offset, bytes);
    *registry[i].tensor = Tensor(shape, std::move(data));
    offset += bytes;
  }
  if (offset != blob.size())
    throw DataError("checkpoint '" + path + "' carries trailing bytes past its parameter payload");

  // Two params members live outside the tensor payload and come back from
  // the embedded config: the map stage layout and the fusion head count.
  ck.params.map.config = ck.config.map_encoder_config();
  ck.params.fusion.n_heads = ck.config.fusion_heads;
  return ck;
}

LoadedModel assemble_model(const Checkpoint& checkpoint) {
  const TrainConfig& cfg = checkpoint.config;
  const BackboneSpec spec = cfg.backbone_spec();
  LoadedModel model;
  model.backbone = make_backbone(cfg.backbone, cfg.backbone_seed, &spec);
  const std::uint64_t checksum = model.backbone->parameter_checksum();
  if (checksum != checkpoint.backbone_checksum) {
    std::ostringstream msg;
    msg << "checkpoint was trained against backbone checksum " << std::hex << std::showbase
        << checkpoint.backbone_checksum << " but '" << cfg.backbone << "' seed " << std::dec
        << cfg.backbone_seed << " reconstructs to " << std::hex << std::showbase << checksum;
    throw DataError(msg.str());
  }
  model.pipeline = std::make_unique<Pipeline>(cfg.pipeline_dims(), cfg.modality_config(),
                                              checkpoint.params, model.backbone.get());
  return model;
}

// ---------------------------------------------------------------------------
// Optimizer and training loop
// ---------------------------------------------------------------------------

AdamOptimizer::AdamOptimizer(std::vector<NamedParam> params, double learning_rate, double beta1,
                             double beta2, double epsilon)
    : params_(std::move(params)), lr_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  for (const NamedParam& p : params_) {
    m_.push_back(Tensor::zeros(p.tensor->shape()));
    v_.push_back(Tensor::zeros(p.tensor->shape()));
  }
}

void AdamOptimizer::step(const std::vector<Tensor>& grads) {
  if (grads.size() != params_.size())
    throw ConfigError("optimizer got " + std::to_string(grads.size()) + " gradients for " +
                      std::to_string(params_.size()) + " parameter groups");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i].tensor;
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < p.numel(); ++j) {
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g[j];
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j];
      const double m_hat = m_[i][j] / bc1;
      const double v_hat = v_[i][j] / bc2;
      p[j] -= lr_ * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
}

namespace {

/// Scenes the modality config cannot consume, by failure.
void require_modality(const Pipeline& pipeline, const std::vector<Scene>& scenes,
                      bool need_future) {
  std::vector<std::string> missing_map;
  std::vector<std::string> missing_future;
  for (const Scene& scene : scenes) {
    if (pipeline.modality().use_map && !scene.map_raster.has_value()) missing_map.push_back(scene.id);
    if (need_future && (!scene.future.has_value() || scene.future->size() != kFutureLen))
      missing_future.push_back(scene.id);
  }
  auto join = [](const std::vector<std::string>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) out += (i ? ", " : "") + ids[i];
    return out;
  };
  if (!missing_map.empty())
    throw DataError(std::to_string(missing_map.size()) +
                    " scene(s) lack the map raster this modality needs: " + join(missing_map));
  if (!missing_future.empty())
    throw DataError(std::to_string(missing_future.size()) +
                    " scene(s) lack a full ground-truth future: " + join(missing_future));
}

}  // namespace

Checkpoint train(const TrainConfig& config, const std::vector<Scene>& dataset,
                 std::vector<double>* loss_log, std::ostream* progress) {
  if (dataset.empty()) throw DataError("training dataset is empty");
  if (config.batch_size == 0) throw ConfigError("batch_size must be positive");
  const LossKind loss_kind = config.loss_kind();

  const BackboneSpec spec = config.backbone_spec();
  std::unique_ptr<FrozenBackbone> backbone = make_backbone(config.backbone, config.backbone_seed, &spec);
  const std::uint64_t frozen_checksum = backbone->parameter_checksum();

  Rng rng(config.seed);
  const MapEncoderConfig map_config = config.map_encoder_config();
  PipelineParams init =
      PipelineParams::init(config.pipeline_dims(), backbone->spec(), rng, &map_config);
  Pipeline pipeline(config.pipeline_dims(), config.modality_config(), std::move(init),
                    backbone.get());
  require_modality(pipeline, dataset, /*need_future=*/true);

  std::vector<Scene> normalized;
  normalized.reserve(dataset.size());
  for (const Scene& scene : dataset) normalized.push_back(normalize_scene(scene));

  std::vector<NamedParam> registry = parameter_registry(pipeline.params());
  AdamOptimizer optimizer(registry, config.learning_rate, config.beta1, config.beta2,
                          config.adam_epsilon);

  std::vector<Tensor> grad_acc;
  for (const NamedParam& p : registry) grad_acc.push_back(Tensor::zeros(p.tensor->shape()));

  const long n = static_cast<long>(normalized.size());
  for (std::size_t step = 1; step <= config.steps; ++step) {
    for (Tensor& g : grad_acc) g.fill(0.0);
    double batch_loss = 0.0;
    for (std::size_t item = 0; item < config.batch_size; ++item) {
      const long pick = rng.uniform_int(0, n - 1);
      ad::Graph g;
      PipelineHandles h = pipeline.register_all(g, /*trainable=*/true);
      ad::Value loss = pipeline.build_loss(g, h, normalized[static_cast<std::size_t>(pick)], loss_kind);
      g.backward(loss);
      batch_loss += g.val(loss)[0];
      for (std::size_t i = 0; i < registry.size(); ++i)
        grad_acc[i].add_scaled(g.grad(h.flat[i]), 1.0);
    }
    batch_loss /= static_cast<double>(config.batch_size);
    if (!std::isfinite(batch_loss))
      throw NumericalError("training diverged at step " + std::to_string(step) +
                           ": loss is not finite");
    const double inv_batch = 1.0 / static_cast<double>(config.batch_size);
    for (Tensor& g : grad_acc)
      for (std::size_t j = 0; j < g.numel(); ++j) g[j] *= inv_batch;
    optimizer.step(grad_acc);
    if (loss_log) loss_log->push_back(batch_loss);
    if (progress && (step % 50 == 0 || step == config.steps))
      (*progress) << "step " << step << "/" << config.steps << "  loss " << batch_loss << "\n";
  }

  if (backbone->parameter_checksum() != frozen_checksum)
    throw std::logic_error("frozen backbone parameters changed during training");

  Checkpoint ck;
  ck.config = config;
  ck.backbone_checksum = frozen_checksum;
  ck.step = config.steps;
  ck.rng_state = rng.state();
  ck.params = pipeline.params();
  return ck;
}

Checkpoint train(const TrainConfig& config, std::vector<double>* loss_log, std::ostream* progress) {
  return train(config, load_scenes(config.train_data), loss_log, progress);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

MetricsReport evaluate(const Checkpoint& checkpoint, const std::vector<Scene>& scenes,
                       const EvalOptions& options) {
  if (scenes.empty()) throw DataError("evaluation dataset is empty");
  LoadedModel model = assemble_model(checkpoint);
  const Pipeline& pipeline = *model.pipeline;
  require_modality(pipeline, scenes, /*need_future=*/true);

  const std::size_t n = scenes.size();
  std::vector<SceneResult> results(n);
  std::vector<TrajectoryPair> pairs(n);
  std::string parallel_error;

#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(n); ++i) {
    try {
      const Scene& scene = scenes[static_cast<std::size_t>(i)];
      const Scene normalized = normalize_scene(scene);
      const PredictedTrajectory pred = pipeline.predict(scene);
      results[static_cast<std::size_t>(i)] =
          evaluate_scene(scene.id, pred.points, *normalized.future, options.horizons);
      pairs[static_cast<std::size_t>(i)] = {pred.points, *normalized.future};
    } catch (const std::exception& e) {
#pragma omp critical
      if (parallel_error.empty()) parallel_error = e.what();
    }
  }
  if (!parallel_error.empty()) throw DataError(parallel_error);

  // IE protocol: serial lane, one timed predict per scene, warm-ups dropped.
  std::vector<double> seconds;
  seconds.reserve(n);
  for (const Scene& scene : scenes) {
    const auto t0 = std::chrono::steady_clock::now();
    (void)pipeline.predict(scene);
    const auto t1 = std::chrono::steady_clock::now();
    seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  const std::size_t warmup = std::min(options.ie_warmup, n - 1);
  const double ie = inference_efficiency(seconds, warmup);

  const double mr = miss_rate(pairs, options.miss_threshold, options.miss_mode);
  MetricsReport report = aggregate(results, options.horizons, mr, ie);
  if (!options.csv_path.empty()) save_per_scene_csv(results, options.horizons, options.csv_path);
  return report;
}

MetricsReport evaluate(const Checkpoint& checkpoint, const std::string& data_path,
                       const EvalOptions& options) {
  return evaluate(checkpoint, load_scenes(data_path), options);
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

AblationTable run_ablation(const TrainConfig& base, const std::vector<std::string>& modalities,
                           const std::vector<Scene>& train_set, const std::vector<Scene>& eval_set,
                           std::ostream* progress) {
  if (modalities.empty()) throw ConfigError("ablation needs at least one modality");
  for (const std::string& m : modalities)
    if (std::find(kAblationModalities.begin(), kAblationModalities.end(), m) ==
        kAblationModalities.end())
      throw ConfigError("unknown modality '" + m +
                        "' (expected ego_only, ego_neighbor, or ego_neighbor_map)");

  AblationTable table;
  for (const std::string& m : modalities) {
    TrainConfig cfg = base;
    cfg.modality = m;
    if (progress) (*progress) << "[" << m << "] training " << cfg.steps << " steps\n";
    const Checkpoint ck = train(cfg, train_set, nullptr, progress);
    if (progress) (*progress) << "[" << m << "] evaluating " << eval_set.size() << " scenes\n";
    table.rows.push_back({m, evaluate(ck, eval_set)});
  }
  return table;
}

std::string ablation_to_json(const AblationTable& table) {
  ordered_json doc = ordered_json::array();
  for (const AblationRow& row : table.rows) {
    ordered_json entry;
    entry["modality"] = row.modality;
    entry["report"] = ordered_json::parse(report_to_json(row.report));
    doc.push_back(entry);
  }
  return doc.dump(2);
}

AblationTable ablation_from_json(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw DataError(std::string("ablation table is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw DataError("ablation table must be a JSON array");
  AblationTable table;
  for (const auto& entry : doc) {
    if (!entry.contains("modality") || !entry.contains("report"))
      throw DataError("ablation rows need 'modality' and 'report' fields");
    table.rows.push_back(
        {entry["modality"].get<std::string>(), report_from_json(entry["report"].dump())});
  }
  return table;
}

std::string format_ablation_table(const AblationTable& table) {
  std::ostringstream out;
  out << std::left << std::setw(18) << "modality";
  std::vector<std::string> columns;
  if (!table.rows.empty()) {
    const MetricsReport& first = table.rows.front().report;
    for (const std::string& label : first.ade_labels) columns.push_back("ADE(" + label + ")");
    for (const std::string& label : first.fde_labels) columns.push_back("FDE(" + label + ")");
  }
  columns.push_back("MR");
  columns.push_back("IE(s)");
  for (const std::string& c : columns) out << std::setw(16) << c;
  out << "\n";
  out << std::fixed << std::setprecision(3);
  for (const AblationRow& row : table.rows) {
    out << std::left << std::setw(18) << row.modality;
    for (const auto& [mean, sd] : row.report.ade) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(3) << mean << " +/- " << sd;
      out << std::setw(16) << cell.str();
    }
    for (const auto& [mean, sd] : row.report.fde) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(3) << mean << " +/- " << sd;
      out << std::setw(16) << cell.str();
    }
    {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(3) << row.report.mr;
      out << std::setw(16) << cell.str();
    }
    {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(4) << row.report.ie_s;
      out << std::setw(16) << cell.str();
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace trajlm
