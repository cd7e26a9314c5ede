#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "trajlm/errors.hpp"
#include "trajlm/generator.hpp"
#include "trajlm/scene_io.hpp"

using namespace trajlm;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path("/tmp/trajlm_gen_" + name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

const std::vector<SceneKind> kAllKinds = {SceneKind::kStraight, SceneKind::kTurn,
                                          SceneKind::kIntersection};

}  // namespace

TEST_CASE("generated scenes are schema-complete") {
  const GeneratorConfig config;
  for (SceneKind kind : kAllKinds) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Scene s = generate_synthetic_scene(kind, seed, config);
      CHECK(s.id == std::string(kind_name(kind)) + "_" + std::to_string(seed));
      REQUIRE(s.ego.positions.size() == kRawHistoryLen);
      CHECK(s.ego.fully_present());
      REQUIRE(s.future.has_value());
      CHECK(s.future->size() == kFutureLen);
      CHECK(s.heading.has_value());
      REQUIRE(s.map_raster.has_value());
      CHECK(s.map_raster->height == 100);
      CHECK(s.map_raster->width == 100);
      CHECK(s.neighbors.size() <= config.neighbors_max);
      for (const Track& n : s.neighbors) {
        REQUIRE(n.positions.size() == kRawHistoryLen);
        for (std::size_t t = 0; t < kRawHistoryLen; ++t) {
          if (!n.present[t]) {
            CHECK(n.positions[t].x == 0.0);
            CHECK(n.positions[t].y == 0.0);
          }
        }
      }
      // Every generated scene must survive normalization.
      CHECK_NOTHROW(normalize_scene(s));
    }
  }
}

TEST_CASE("generation is a pure function of kind, seed, and config") {
  const GeneratorConfig config;
  for (SceneKind kind : kAllKinds) {
    const Scene a = generate_synthetic_scene(kind, 17, config);
    const Scene b = generate_synthetic_scene(kind, 17, config);
    CHECK(scenes_equal(a, b));
    const Scene c = generate_synthetic_scene(kind, 18, config);
    CHECK_FALSE(scenes_equal(a, c));
  }
}

TEST_CASE("straight scenes run on a straight line") {
  const GeneratorConfig config;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scene s = generate_synthetic_scene(SceneKind::kStraight, seed, config);
    std::vector<Vec2> pts = s.ego.positions;
    pts.insert(pts.end(), s.future->begin(), s.future->end());
    const Vec2 origin = pts.front();
    const Vec2 dir = pts.back() - origin;
    for (const Vec2& p : pts) {
      const Vec2 rel = p - origin;
      CHECK(std::fabs(dir.x * rel.y - dir.y * rel.x) / norm(dir) <= 1e-9);
    }
  }
}

TEST_CASE("turning futures stay inside the drivable channel") {
  const GeneratorConfig config;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scene s = generate_synthetic_scene(SceneKind::kTurn, seed, config);
    const Vec2 ego_now = s.ego.positions.back();
    for (const Vec2& p : *s.future) {
      const Vec2 in_ego = rotate(p - ego_now, -*s.heading);
      std::size_t row = 0, col = 0;
      REQUIRE(s.map_raster->cell_of(in_ego, row, col));
      CHECK(s.map_raster->at(MapRaster::kDrivable, row, col) == 1);
    }
  }
}

TEST_CASE("the ego starts on the drivable channel at the raster center") {
  const GeneratorConfig config;
  for (SceneKind kind : kAllKinds) {
    const Scene s = generate_synthetic_scene(kind, 3, config);
    std::size_t row = 0, col = 0;
    REQUIRE(s.map_raster->cell_of({0, 0}, row, col));
    CHECK(row == 50);
    CHECK(col == 50);
    CHECK(s.map_raster->at(MapRaster::kDrivable, row, col) == 1);
  }
}

TEST_CASE("intersection scenes paint a junction box") {
  const GeneratorConfig config;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Scene s = generate_synthetic_scene(SceneKind::kIntersection, seed, config);
    std::size_t box_cells = 0;
    for (std::size_t i = 0; i < 100; ++i)
      for (std::size_t j = 0; j < 100; ++j)
        box_cells += s.map_raster->at(MapRaster::kIntersection, i, j);
    // A 7 m box at 0.5 m cells covers roughly 14x14 cells.
    CHECK(box_cells >= 100);
    CHECK(box_cells <= 400);
  }
  const Scene straight = generate_synthetic_scene(SceneKind::kStraight, 0, config);
  std::size_t stray = 0;
  for (std::size_t i = 0; i < 100; ++i)
    for (std::size_t j = 0; j < 100; ++j)
      stray += straight.map_raster->at(MapRaster::kIntersection, i, j);
  CHECK(stray == 0);
}

TEST_CASE("datasets follow the kind weights and number their seeds") {
  GeneratorConfig config;
  config.weight_turn = 0.0;
  config.weight_intersection = 0.0;
  const auto straights = generate_dataset(20, 100, config);
  REQUIRE(straights.size() == 20);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < straights.size(); ++i) {
    CHECK(straights[i].id == "straight_" + std::to_string(100 + i));
    ids.insert(straights[i].id);
  }
  CHECK(ids.size() == 20);

  config = GeneratorConfig{};
  const auto mixed = generate_dataset(40, 7, config);
  std::set<std::string> kinds;
  for (const Scene& s : mixed) kinds.insert(s.id.substr(0, s.id.find('_')));
  CHECK(kinds.size() >= 2);

  config.weight_straight = 0.0;
  config.weight_turn = 0.0;
  config.weight_intersection = 0.0;
  CHECK_THROWS_AS(generate_dataset(1, 0, config), ConfigError);
}

TEST_CASE("generator configs load with defaults and strict keys") {
  SUBCASE("values override defaults") {
    TempFile f("ok.json", R"({"lane_width": 5.0, "neighbors_max": 2})");
    const GeneratorConfig c = load_generator_config(f.path);
    CHECK(c.lane_width == 5.0);
    CHECK(c.neighbors_max == 2);
    CHECK(c.speed_min == 5.0);  // untouched default
  }
  SUBCASE("unknown keys are rejected") {
    TempFile f("unknown.json", R"({"lane_widht": 5.0})");
    CHECK_THROWS_WITH_AS(load_generator_config(f.path),
                         "generator config: unknown key 'lane_widht'", ConfigError);
  }
  SUBCASE("wrong value types are rejected") {
    TempFile f("badval.json", R"({"lane_width": "wide"})");
    CHECK_THROWS_AS(load_generator_config(f.path), ConfigError);
  }
  SUBCASE("missing files are rejected") {
    CHECK_THROWS_AS(load_generator_config("/tmp/trajlm_gen_does_not_exist.json"), ConfigError);
  }
  SUBCASE("malformed JSON is rejected") {
    TempFile f("notjson.json", "{lane_width");
    CHECK_THROWS_AS(load_generator_config(f.path), ConfigError);
  }
}
