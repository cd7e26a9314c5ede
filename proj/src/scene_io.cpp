#include "trajlm/scene_io.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "trajlm/errors.hpp"
#include "trajlm/rng.hpp"

namespace trajlm {
namespace {

using Json = nlohmann::ordered_json;

bool tracks_equal(const Track& a, const Track& b) {
  if (a.present != b.present || a.positions.size() != b.positions.size()) return false;
  for (std::size_t t = 0; t < a.positions.size(); ++t) {
    if (!a.present[t]) continue;
    if (a.positions[t].x != b.positions[t].x || a.positions[t].y != b.positions[t].y) return false;
  }
  return true;
}

Json point_json(Vec2 p) { return Json::array({p.x, p.y}); }

Json track_json(const Track& track, bool nullable) {
  Json arr = Json::array();
  for (std::size_t t = 0; t < track.positions.size(); ++t) {
    if (nullable && !track.present[t])
      arr.push_back(nullptr);
    else
      arr.push_back(point_json(track.positions[t]));
  }
  return arr;
}

Vec2 parse_point(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw DataError(where + " must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

Track parse_track(const Json& j, const std::string& where, bool nullable) {
  if (!j.is_array())
    throw DataError(where + " must be an array of points");
  if (j.size() != kRawHistoryLen)
    throw DataError(where + " length " + std::to_string(j.size()) + ", expected " +
                    std::to_string(kRawHistoryLen));
  Track track;
  track.positions.resize(j.size());
  track.present.resize(j.size());
  for (std::size_t t = 0; t < j.size(); ++t) {
    if (j[t].is_null()) {
      if (!nullable) throw DataError(where + "[" + std::to_string(t) + "] must not be null");
      track.positions[t] = {0.0, 0.0};
      track.present[t] = false;
    } else {
      track.positions[t] = parse_point(j[t], where + "[" + std::to_string(t) + "]");
      track.present[t] = true;
    }
  }
  return track;
}

Json raster_json(const MapRaster& raster) {
  Json channels = Json::array();
  for (const auto& ch : raster.channels) {
    Json rows = Json::array();
    for (std::size_t r = 0; r < raster.height; ++r) {
      Json row = Json::array();
      for (std::size_t c = 0; c < raster.width; ++c) row.push_back(static_cast<int>(ch[r * raster.width + c]));
      rows.push_back(std::move(row));
    }
    channels.push_back(std::move(rows));
  }
  return Json{{"channels", std::move(channels)}, {"resolution", raster.resolution}, {"extent", raster.extent}};
}

MapRaster parse_raster(const Json& j) {
  if (!j.is_object() || !j.contains("channels") || !j.contains("resolution") || !j.contains("extent"))
    throw DataError("map must have keys channels, resolution, extent");
  const Json& channels = j.at("channels");
  if (!channels.is_array() || channels.size() != MapRaster::kChannels)
    throw DataError("map channels count " + std::to_string(channels.size()) + ", expected " +
                    std::to_string(MapRaster::kChannels));
  const Json& first = channels[0];
  if (!first.is_array() || first.empty() || !first[0].is_array())
    throw DataError("map channels must be 3xHxW arrays");
  const std::size_t height = first.size();
  const std::size_t width = first[0].size();
  MapRaster raster = MapRaster::zeros(height, width, j.at("resolution").get<double>(), j.at("extent").get<double>());
  for (std::size_t ch = 0; ch < MapRaster::kChannels; ++ch) {
    const Json& grid = channels[ch];
    if (!grid.is_array() || grid.size() != height) throw DataError("map channel rows mismatch");
    for (std::size_t r = 0; r < height; ++r) {
      const Json& row = grid[r];
      if (!row.is_array() || row.size() != width) throw DataError("map channel row width mismatch");
      for (std::size_t c = 0; c < width; ++c) {
        const int v = row[c].get<int>();
        if (v != 0 && v != 1) throw DataError("map cells must be 0 or 1");
        raster.set(ch, r, c, static_cast<std::uint8_t>(v));
      }
    }
  }
  return raster;
}

Json scene_json(const Scene& scene) {
  Json j;
  j["id"] = scene.id;
  j["ego"] = track_json(scene.ego, /*nullable=*/false);
  Json neighbors = Json::array();
  for (const auto& n : scene.neighbors) neighbors.push_back(track_json(n, /*nullable=*/true));
  j["neighbors"] = std::move(neighbors);
  j["heading"] = scene.heading ? Json(*scene.heading) : Json(nullptr);
  j["map"] = scene.map_raster ? raster_json(*scene.map_raster) : Json(nullptr);
  if (scene.future) {
    Json fut = Json::array();
    for (Vec2 p : *scene.future) fut.push_back(point_json(p));
    j["future"] = std::move(fut);
  } else {
    j["future"] = nullptr;
  }
  return j;
}

Scene parse_scene(const Json& j) {
  if (!j.is_object()) throw DataError("scene must be a JSON object");
  if (!j.contains("id") || !j.at("id").is_string()) throw DataError("missing or non-string id");
  if (!j.contains("ego")) throw DataError("missing key ego");
  Scene scene;
  scene.id = j.at("id").get<std::string>();
  scene.ego = parse_track(j.at("ego"), "ego", /*nullable=*/false);
  if (j.contains("neighbors") && !j.at("neighbors").is_null()) {
    const Json& neighbors = j.at("neighbors");
    if (!neighbors.is_array()) throw DataError("neighbors must be an array");
    for (std::size_t i = 0; i < neighbors.size(); ++i)
      scene.neighbors.push_back(parse_track(neighbors[i], "neighbors[" + std::to_string(i) + "]", true));
  }
  if (j.contains("heading") && !j.at("heading").is_null()) {
    if (!j.at("heading").is_number()) throw DataError("heading must be a number or null");
    scene.heading = j.at("heading").get<double>();
  }
  if (j.contains("map") && !j.at("map").is_null()) scene.map_raster = parse_raster(j.at("map"));
  if (j.contains("future") && !j.at("future").is_null()) {
    const Json& fut = j.at("future");
    if (!fut.is_array())
      throw DataError("future must be an array of points");
    if (fut.size() != kFutureLen)
      throw DataError("future length " + std::to_string(fut.size()) + ", expected " +
                      std::to_string(kFutureLen));
    std::vector<Vec2> points;
    for (std::size_t t = 0; t < fut.size(); ++t)
      points.push_back(parse_point(fut[t], "future[" + std::to_string(t) + "]"));
    scene.future = std::move(points);
  }
  return scene;
}

}  // namespace

bool scenes_equal(const Scene& a, const Scene& b) {
  if (a.id != b.id || !tracks_equal(a.ego, b.ego)) return false;
  if (a.neighbors.size() != b.neighbors.size()) return false;
  for (std::size_t i = 0; i < a.neighbors.size(); ++i)
    if (!tracks_equal(a.neighbors[i], b.neighbors[i])) return false;
  if (a.heading.has_value() != b.heading.has_value()) return false;
  if (a.heading && *a.heading != *b.heading) return false;
  if (a.map_raster.has_value() != b.map_raster.has_value()) return false;
  if (a.map_raster && !(*a.map_raster == *b.map_raster)) return false;
  if (a.future.has_value() != b.future.has_value()) return false;
  if (a.future) {
    if (a.future->size() != b.future->size()) return false;
    for (std::size_t t = 0; t < a.future->size(); ++t)
      if ((*a.future)[t].x != (*b.future)[t].x || (*a.future)[t].y != (*b.future)[t].y) return false;
  }
  return true;
}

void save_scenes(const std::vector<Scene>& scenes, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  for (const Scene& scene : scenes) out << scene_json(scene).dump() << "\n";
}

std::vector<Scene> load_scenes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<Scene> scenes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": invalid JSON (" + e.what() + ")");
    }
    try {
      scenes.push_back(parse_scene(j));
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return scenes;
}

DatasetSplit split_dataset(const std::vector<std::string>& scene_ids, std::uint64_t split_seed,
                           const std::vector<double>& fractions) {
  if (fractions.empty()) throw ConfigError("split fractions must not be empty");
  const double total = std::accumulate(fractions.begin(), fractions.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  for (double f : fractions)
    if (f < 0.0) throw ConfigError("split fractions must be non-negative");
  if (scene_ids.size() < fractions.size())
    throw DataError("cannot split " + std::to_string(scene_ids.size()) + " scenes into " +
                    std::to_string(fractions.size()) + " parts");

  // Fisher-Yates with the project RNG so the split is a pure function of the seed.
  std::vector<std::string> ids = scene_ids;
  Rng rng(split_seed);
  for (std::size_t i = ids.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(ids[i - 1], ids[j]);
  }

  // Cumulative rounding: part k gets round(sum_{<=k}) - round(sum_{<k}) ids.
  DatasetSplit split;
  split.parts.resize(fractions.size());
  const double n = static_cast<double>(ids.size());
  double cumulative = 0.0;
  std::size_t start = 0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    cumulative += fractions[k];
    std::size_t end = (k + 1 == fractions.size())
                          ? ids.size()
                          : static_cast<std::size_t>(std::llround(cumulative * n));
    end = std::min(std::max(end, start), ids.size());
    split.parts[k].assign(ids.begin() + static_cast<std::ptrdiff_t>(start),
                          ids.begin() + static_cast<std::ptrdiff_t>(end));
    start = end;
  }
  return split;
}

}  // namespace trajlm
