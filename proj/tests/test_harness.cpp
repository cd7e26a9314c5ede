#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "trajlm/errors.hpp"
#include "trajlm/generator.hpp"
#include "trajlm/harness.hpp"
#include "trajlm/scene_io.hpp"

using namespace trajlm;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.d_scene = 10;
  cfg.d_map = 8;
  cfg.d_llm = 16;
  cfg.map_stage1 = 3;
  cfg.map_stage2 = 5;
  cfg.prototypes = 4;
  cfg.fusion_heads = 2;
  cfg.backbone_seed = 5;
  cfg.prompt_text = "predict the road ahead";
  cfg.batch_size = 4;
  cfg.steps = 6;
  cfg.seed = 11;
  return cfg;
}

std::vector<Scene> tiny_dataset(std::size_t count, std::uint64_t base_seed = 900) {
  GeneratorConfig gen;
  gen.raster_extent = 24.0;
  gen.raster_resolution = 1.0;
  gen.neighbors_max = 3;
  gen.speed_max = 8.0;
  return generate_dataset(count, base_seed, gen);
}

bool checkpoints_equal(const Checkpoint& a, const Checkpoint& b) {
  if (train_config_to_json(a.config) != train_config_to_json(b.config)) return false;
  if (a.backbone_checksum != b.backbone_checksum || a.step != b.step || a.rng_state != b.rng_state)
    return false;
  Checkpoint ca = a, cb = b;
  const auto ra = parameter_registry(ca.params);
  const auto rb = parameter_registry(cb.params);
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].tensor->shape() != rb[i].tensor->shape()) return false;
    if (max_abs_diff(*ra[i].tensor, *rb[i].tensor) != 0.0) return false;
  }
  return true;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& p) : path(p) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("train config files are strict about their keys") {
  SUBCASE("the empty document keeps every default") {
    const TrainConfig cfg = train_config_from_json("{}");
    CHECK(cfg.modality == "ego_neighbor_map");
    CHECK(cfg.d_llm == 64);
    CHECK(cfg.learning_rate == 1e-3);
    CHECK(cfg.batch_size == 16);
    CHECK(cfg.loss == "mse");
    CHECK(cfg.backbone == "toy");
  }
  SUBCASE("present keys override, absent keys stay") {
    const TrainConfig cfg = train_config_from_json(
        R"({"modality": "ego_only", "learning_rate": 0.01, "steps": 42, "seed": 9})");
    CHECK(cfg.modality == "ego_only");
    CHECK(cfg.learning_rate == 0.01);
    CHECK(cfg.steps == 42);
    CHECK(cfg.seed == 9);
    CHECK(cfg.batch_size == 16);  // untouched default
  }
  SUBCASE("unknown keys are rejected by name") {
    CHECK_THROWS_WITH_AS(train_config_from_json(R"({"learming_rate": 0.1})"),
                         "train config: unknown key 'learming_rate'", ConfigError);
  }
  SUBCASE("wrongly typed values are rejected by name") {
    CHECK_THROWS_WITH_AS(train_config_from_json(R"({"steps": "many"})"),
                         "train config: bad value for key 'steps'", ConfigError);
    CHECK_THROWS_WITH_AS(train_config_from_json(R"({"steps": -3})"),
                         "train config: bad value for key 'steps'", ConfigError);
  }
  SUBCASE("files that are missing or not JSON fail as config errors") {
    CHECK_THROWS_AS(load_train_config("/tmp/trajlm_no_such_config.json"), ConfigError);
    CHECK_THROWS_AS(train_config_from_json("steps = 3"), ConfigError);
  }
  SUBCASE("serialization round trips every field") {
    TrainConfig cfg = tiny_config();
    cfg.train_data = "a.jsonl";
    cfg.loss = "smooth_l1";
    cfg.map_kv = "pooled";
    const TrainConfig back = train_config_from_json(train_config_to_json(cfg));
    CHECK(train_config_to_json(back) == train_config_to_json(cfg));
  }
}

TEST_CASE("config selector strings map onto module settings") {
  TrainConfig cfg = tiny_config();
  cfg.modality = "ego_only";
  CHECK_FALSE(cfg.modality_config().use_neighbors);
  CHECK_FALSE(cfg.modality_config().use_map);
  cfg.modality = "ego_neighbor";
  CHECK(cfg.modality_config().use_neighbors);
  CHECK_FALSE(cfg.modality_config().use_map);
  cfg.modality = "ego_neighbor_map";
  CHECK(cfg.modality_config().use_map);
  cfg.modality = "everything";
  CHECK_THROWS_AS(cfg.modality_config(), ConfigError);

  cfg = tiny_config();
  cfg.map_kv = "pooled";
  CHECK(cfg.modality_config().map_kv_mode == MapKvMode::kPooled);
  cfg.map_kv = "mean";
  CHECK_THROWS_AS(cfg.modality_config(), ConfigError);

  cfg = tiny_config();
  cfg.loss = "smooth_l1";
  CHECK(cfg.loss_kind() == LossKind::kSmoothL1);
  cfg.loss = "l2";
  CHECK_THROWS_AS(cfg.loss_kind(), ConfigError);

  cfg = tiny_config();
  CHECK(cfg.map_encoder_config().stage1 == 3);
  CHECK(cfg.map_encoder_config().d_map == 8);
  CHECK(cfg.pipeline_dims().d_scene == 10);
  CHECK(cfg.backbone_spec().d_llm == 16);
}

TEST_CASE("training leaves the frozen backbone untouched and logs every step") {
  const TrainConfig cfg = tiny_config();
  const std::vector<Scene> data = tiny_dataset(4);
  std::vector<double> losses;
  const Checkpoint ck = train(cfg, data, &losses);

  CHECK(ck.step == cfg.steps);
  REQUIRE(losses.size() == cfg.steps);
  for (double l : losses) {
    CHECK(std::isfinite(l));
    CHECK(l >= 0.0);
  }
  const BackboneSpec spec = cfg.backbone_spec();
  const auto fresh = make_backbone(cfg.backbone, cfg.backbone_seed, &spec);
  CHECK(ck.backbone_checksum == fresh->parameter_checksum());
}

TEST_CASE("identical configs train to identical checkpoints") {
  const TrainConfig cfg = tiny_config();
  const std::vector<Scene> data = tiny_dataset(4);
  const Checkpoint a = train(cfg, data);
  const Checkpoint b = train(cfg, data);
  CHECK(checkpoints_equal(a, b));

  TrainConfig other = cfg;
  other.seed = 12;
  const Checkpoint c = train(other, data);
  CHECK_FALSE(checkpoints_equal(a, c));
}

TEST_CASE("checkpoint files restore bit-identical behavior") {
  const TrainConfig cfg = tiny_config();
  const std::vector<Scene> data = tiny_dataset(4);
  const Checkpoint ck = train(cfg, data);
  const Scene probe = tiny_dataset(1, 1234).front();

  const LoadedModel before = assemble_model(ck);
  const PredictedTrajectory pre_save = before.pipeline->predict(probe);

  TempFile file("/tmp/trajlm_roundtrip.ckpt");
  save_checkpoint(ck, file.path);
  const Checkpoint loaded = load_checkpoint(file.path);
  CHECK(checkpoints_equal(ck, loaded));

  const LoadedModel after = assemble_model(loaded);
  const PredictedTrajectory post_load = after.pipeline->predict(probe);
  REQUIRE(post_load.points.size() == pre_save.points.size());
  for (std::size_t i = 0; i < pre_save.points.size(); ++i) {
    CHECK(post_load.points[i].x == pre_save.points[i].x);
    CHECK(post_load.points[i].y == pre_save.points[i].y);
  }
}

TEST_CASE("checkpoint loading rejects damaged archives") {
  const TrainConfig cfg = tiny_config();
  const std::vector<Scene> data = tiny_dataset(2);
  TrainConfig quick = cfg;
  quick.steps = 1;
  const Checkpoint ck = train(quick, data);
  TempFile file("/tmp/trajlm_damage.ckpt");
  save_checkpoint(ck, file.path);

  SUBCASE("missing file") { CHECK_THROWS_AS(load_checkpoint("/tmp/trajlm_absent.ckpt"), DataError); }
  SUBCASE("not a checkpoint") {
    std::ofstream(file.path, std::ios::trunc) << "{\"looks\": \"like json\"}";
    CHECK_THROWS_AS(load_checkpoint(file.path), DataError);
  }
  SUBCASE("future format version") {
    std::ifstream in(file.path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string blob = buf.str();
    blob[8] = 9;  // version lives right after the magic
    std::ofstream(file.path, std::ios::binary | std::ios::trunc) << blob;
    try {
      load_checkpoint(file.path);
      FAIL("expected a DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("format version 9") != std::string::npos);
    }
  }
  SUBCASE("truncated payload") {
    std::ifstream in(file.path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string blob = buf.str();
    blob.resize(blob.size() - 17);
    std::ofstream(file.path, std::ios::binary | std::ios::trunc) << blob;
    try {
      load_checkpoint(file.path);
      FAIL("expected a DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
  }
  SUBCASE("backbone checksum mismatch") {
    Checkpoint tampered = ck;
    tampered.backbone_checksum ^= 1;
    save_checkpoint(tampered, file.path);
    const Checkpoint loaded = load_checkpoint(file.path);
    try {
      assemble_model(loaded);
      FAIL("expected a DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("checksum") != std::string::npos);
    }
  }
}

TEST_CASE("divergent training aborts naming the step") {
  TrainConfig cfg = tiny_config();
  // Layer norms tame merely-huge activations, so overflow the decoder output
  // itself: squared errors at 1e200-scale weights are inf.
  cfg.learning_rate = 1e200;
  cfg.steps = 50;
  cfg.batch_size = 2;
  const std::vector<Scene> data = tiny_dataset(2);
  try {
    train(cfg, data);
    FAIL("expected a NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("diverged at step") != std::string::npos);
  }
}

TEST_CASE("training rejects unusable datasets up front") {
  const TrainConfig cfg = tiny_config();
  CHECK_THROWS_AS(train(cfg, {}), DataError);

  std::vector<Scene> data = tiny_dataset(3);
  data[1].map_raster.reset();
  try {
    train(cfg, data);
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(data[1].id) != std::string::npos);
  }

  data = tiny_dataset(3);
  data[2].future.reset();
  CHECK_THROWS_AS(train(cfg, data), DataError);

  TrainConfig zero_batch = cfg;
  zero_batch.batch_size = 0;
  CHECK_THROWS_AS(train(zero_batch, tiny_dataset(2)), ConfigError);
}

TEST_CASE("evaluation emits the standard report over a dataset") {
  TrainConfig cfg = tiny_config();
  cfg.steps = 4;
  const std::vector<Scene> data = tiny_dataset(5);
  const Checkpoint ck = train(cfg, data);

  TempFile csv("/tmp/trajlm_eval_scenes.csv");
  EvalOptions options;
  options.csv_path = csv.path;
  const MetricsReport report = evaluate(ck, data, options);

  CHECK(report.ade_labels == std::vector<std::string>{"2s", "4s", "6s"});
  CHECK(report.fde_labels == std::vector<std::string>{"6s"});
  CHECK(report.n_scenes == 5);
  CHECK(report.ie_s > 0.0);
  CHECK(report.mr >= 0.0);
  CHECK(report.mr <= 1.0);
  for (const auto& [mean, sd] : report.ade) {
    CHECK(std::isfinite(mean));
    CHECK(sd >= 0.0);
  }

  std::ifstream in(csv.path);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 6);  // header + one row per scene

  SUBCASE("repeat evaluations agree on everything but timing") {
    const MetricsReport again = evaluate(ck, data);
    for (std::size_t h = 0; h < report.ade.size(); ++h) {
      CHECK(again.ade[h].first == report.ade[h].first);
      CHECK(again.ade[h].second == report.ade[h].second);
    }
    CHECK(again.fde[0].first == report.fde[0].first);
    CHECK(again.mr == report.mr);
  }
  SUBCASE("a single-scene dataset still reports") {
    const MetricsReport single = evaluate(ck, {data.front()});
    CHECK(single.n_scenes == 1);
    CHECK(single.ade[0].second == 0.0);
  }
}

TEST_CASE("evaluation lists every scene the modality cannot consume") {
  TrainConfig cfg = tiny_config();
  cfg.steps = 1;
  std::vector<Scene> data = tiny_dataset(4);
  const Checkpoint ck = train(cfg, data);

  data[1].map_raster.reset();
  data[3].map_raster.reset();
  try {
    evaluate(ck, data);
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    const std::string what = e.what();
    CHECK(what.find(data[1].id) != std::string::npos);
    CHECK(what.find(data[3].id) != std::string::npos);
    CHECK(what.find(data[0].id) == std::string::npos);
  }
  CHECK_THROWS_AS(evaluate(ck, std::vector<Scene>{}), DataError);
}

TEST_CASE("map-free modalities run on map-free data") {
  TrainConfig cfg = tiny_config();
  cfg.modality = "ego_neighbor";
  cfg.steps = 2;
  std::vector<Scene> data = tiny_dataset(3);
  for (Scene& s : data) s.map_raster.reset();
  const Checkpoint ck = train(cfg, data);
  const MetricsReport report = evaluate(ck, data);
  CHECK(report.n_scenes == 3);
}

TEST_CASE("the ablation runner produces one row per modality") {
  TrainConfig cfg = tiny_config();
  cfg.steps = 2;
  const std::vector<Scene> train_set = tiny_dataset(4);
  const std::vector<Scene> eval_set = tiny_dataset(3, 7000);

  const AblationTable table = run_ablation(cfg, kAblationModalities, train_set, eval_set);
  REQUIRE(table.rows.size() == 3);
  CHECK(table.rows[0].modality == "ego_only");
  CHECK(table.rows[1].modality == "ego_neighbor");
  CHECK(table.rows[2].modality == "ego_neighbor_map");
  for (const AblationRow& row : table.rows) CHECK(row.report.n_scenes == 3);

  const std::string text = format_ablation_table(table);
  CHECK(text.find("ego_only") != std::string::npos);
  CHECK(text.find("ADE(6s)") != std::string::npos);

  const AblationTable back = ablation_from_json(ablation_to_json(table));
  REQUIRE(back.rows.size() == 3);
  CHECK(back.rows[2].modality == "ego_neighbor_map");
  CHECK(back.rows[0].report.ade[2].first == table.rows[0].report.ade[2].first);

  CHECK_THROWS_AS(run_ablation(cfg, {}, train_set, eval_set), ConfigError);
  CHECK_THROWS_AS(run_ablation(cfg, {"ego_and_friends"}, train_set, eval_set), ConfigError);
}

TEST_CASE("the training loss falls monotonically across 100-step windows") {
  TrainConfig cfg = tiny_config();
  cfg.steps = 300;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.01;
  const std::vector<Scene> data = tiny_dataset(8);
  std::vector<double> losses;
  train(cfg, data, &losses);
  REQUIRE(losses.size() == 300);

  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t window = 0; window < 3; ++window) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 100; ++i) mean += losses[window * 100 + i];
    mean /= 100.0;
    CHECK(mean < previous);
    previous = mean;
  }
  CHECK(losses.back() < losses.front());
}

TEST_CASE("predictions match the golden trajectory frozen at the first verified build") {
  TrainConfig cfg = tiny_config();
  cfg.steps = 0;
  const std::vector<Scene> data = tiny_dataset(2);
  const Checkpoint ck = train(cfg, data);
  const LoadedModel model = assemble_model(ck);
  const PredictedTrajectory got = model.pipeline->predict(data.front());

  REQUIRE(got.points.size() == kFutureLen);
  // Recorded from the first verified build; any drift here means the numeric
  // behavior of some stage changed.
  const Vec2 golden[kFutureLen] = {
      {0.34073713553081247, 1.0720496004837679},
      {0.33641527450593689, 0.16580863304294707},
      {0.29123976285967573, -0.81785136691198079},
      {-0.83960905666015639, 1.0656883311919778},
      {0.1227554185253654, -0.22415055859398442},
      {1.1737845809630958, -0.13038691328190216},
      {0.032340541908958659, 0.99693974758268067},
      {-1.0300054815248532, -0.25740985179131254},
      {-0.13095944815053456, -0.70917207865878573},
      {-0.93543960974877105, 0.075030546776207518},
      {0.33095657005028917, 0.31965953401350544},
      {0.70143169744589529, -0.15128285705535582},
  };
  for (std::size_t i = 0; i < kFutureLen; ++i) {
    CHECK(got.points[i].x == doctest::Approx(golden[i].x).epsilon(1e-9));
    CHECK(got.points[i].y == doctest::Approx(golden[i].y).epsilon(1e-9));
  }
}
