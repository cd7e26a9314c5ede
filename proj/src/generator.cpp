#include "trajlm/generator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "trajlm/errors.hpp"
#include "trajlm/raster.hpp"
#include "trajlm/rng.hpp"

namespace trajlm {

namespace {

/// Arc-length parametrized ego path in a local frame: starts at the origin
/// heading +x, with an optional bend or corner beginning at s > 0.
struct PathModel {
  enum class Shape { kStraight, kArc, kCorner } shape = Shape::kStraight;
  double curvature = 0.0;   // kArc: signed, bend begins at s = 0
  double corner_at = 0.0;   // kCorner: straight run before the corner arc
  double corner_radius = 0.0;
  int corner_sign = 0;      // +1 left, -1 right, 0 straight through

  Vec2 at(double s) const {
    if (shape == Shape::kArc && s > 0.0) {
      const double r = 1.0 / std::fabs(curvature);
      const double sign = curvature >= 0.0 ? 1.0 : -1.0;
      const double phi = s / r;
      return {r * std::sin(phi), sign * r * (1.0 - std::cos(phi))};
    }
    if (shape == Shape::kCorner && corner_sign != 0 && s > corner_at) {
      const double r = corner_radius;
      const double arc_len = r * M_PI / 2.0;
      const double into = s - corner_at;
      const double sign = static_cast<double>(corner_sign);
      if (into <= arc_len) {
        const double phi = into / r;
        return {corner_at + r * std::sin(phi), sign * r * (1.0 - std::cos(phi))};
      }
      // Past the 90-degree corner: straight along the crossing direction.
      return {corner_at + r, sign * (r + (into - arc_len))};
    }
    return {s, 0.0};
  }

  double heading(double s) const {
    if (shape == Shape::kArc && s > 0.0) return curvature * s;
    if (shape == Shape::kCorner && corner_sign != 0 && s > corner_at) {
      const double arc_len = corner_radius * M_PI / 2.0;
      const double into = std::min(s - corner_at, arc_len);
      return static_cast<double>(corner_sign) * (into / corner_radius);
    }
    return 0.0;
  }
};

/// Arc length as a function of time. Piecewise linear speed: v_history at
/// t = -2 ramping to v_now at t = 0, then ramping to v_future at t = +6.
struct SpeedProfile {
  double v_history = 5.0;
  double v_now = 5.0;
  double v_future = 5.0;

  double arc_length(double t) const {
    if (t <= 0.0) {
      // v(u) = v_now + (v_history - v_now) * (-u / 2) for u in [-2, 0]
      const double a = (v_history - v_now) / 2.0;
      return v_now * t - a * t * t / 2.0;
    }
    const double a = (v_future - v_now) / 6.0;
    return v_now * t + a * t * t / 2.0;
  }
};

constexpr double kHistoryStart = -2.0;
constexpr double kFutureEnd = 6.0;

std::vector<Vec2> sample_path(const PathModel& path, const SpeedProfile& speed, double t0,
                              double t1, double dt, double s_offset = 0.0) {
  std::vector<Vec2> pts;
  for (double t = t0; t <= t1 + 1e-9; t += dt)
    pts.push_back(path.at(speed.arc_length(t) + s_offset));
  return pts;
}

/// Corridor polygon of half-width hw around path arc lengths [s0, s1].
std::vector<Vec2> corridor_polygon(const PathModel& path, double s0, double s1, double hw) {
  std::vector<Vec2> left, right;
  const double ds = 1.0;
  for (double s = s0; s <= s1 + 1e-9; s += ds) {
    const Vec2 p = path.at(s);
    const double h = path.heading(s);
    const Vec2 n{-std::sin(h), std::cos(h)};
    left.push_back({p.x + hw * n.x, p.y + hw * n.y});
    right.push_back({p.x - hw * n.x, p.y - hw * n.y});
  }
  std::vector<Vec2> poly = left;
  poly.insert(poly.end(), right.rbegin(), right.rend());
  return poly;
}

std::vector<Vec2> centerline(const PathModel& path, double s0, double s1) {
  std::vector<Vec2> pts;
  for (double s = s0; s <= s1 + 1e-9; s += 1.0) pts.push_back(path.at(s));
  return pts;
}

Vec2 to_world(Vec2 local, double theta, Vec2 origin) { return rotate(local, theta) + origin; }

struct NeighborSpec {
  std::vector<Vec2> positions;  // local frame, kRawHistoryLen entries
};

}  // namespace

const char* kind_name(SceneKind kind) {
  switch (kind) {
    case SceneKind::kStraight: return "straight";
    case SceneKind::kTurn: return "turn";
    default: return "intersection";
  }
}

Scene generate_synthetic_scene(SceneKind kind, std::uint64_t seed, const GeneratorConfig& config) {
  const std::uint64_t kind_salt =
      (static_cast<std::uint64_t>(kind) + 1) * 0x9E3779B97F4A7C15ULL;
  Rng rng(seed + kind_salt);

  // Ego path and speed profile per kind.
  PathModel path;
  SpeedProfile speed;
  const double lane = std::max(1.0, config.lane_width);
  double stop_line = 0.0;  // kIntersection: distance from ego to the corner entry
  if (kind == SceneKind::kStraight) {
    const double v = rng.uniform(std::min(config.speed_min, config.speed_max),
                                 std::max(config.speed_min, config.speed_max));
    speed = {v, v, v};
  } else if (kind == SceneKind::kTurn) {
    const double v = rng.uniform(std::min(config.turn_speed_min, config.turn_speed_max),
                                 std::max(config.turn_speed_min, config.turn_speed_max));
    speed = {v, v, v};
    const double mag = rng.uniform(std::min(config.curvature_min, config.curvature_max),
                                   std::max(config.curvature_min, config.curvature_max));
    path.shape = PathModel::Shape::kArc;
    path.curvature = rng.uniform() < 0.5 ? mag : -mag;
  } else {
    path.shape = PathModel::Shape::kCorner;
    stop_line = rng.uniform(2.0, 4.0);
    path.corner_at = stop_line;
    path.corner_radius = lane;
    const double dir = rng.uniform();
    path.corner_sign = dir < 1.0 / 3.0 ? 1 : (dir < 2.0 / 3.0 ? -1 : 0);
    const double v_app = rng.uniform(4.0, 8.0);
    const double v_stop = rng.uniform(0.4, 0.9);
    const double v_exit = rng.uniform(std::min(config.turn_speed_min, config.turn_speed_max),
                                      std::max(config.turn_speed_min, config.turn_speed_max));
    speed = {v_app, v_stop, v_exit};
  }

  // Random world pose; the stored heading is the pose angle because every
  // path leaves the origin heading +x.
  const double theta = rng.uniform(0.0, 2.0 * M_PI);
  const Vec2 origin{rng.uniform(-100.0, 100.0), rng.uniform(-100.0, 100.0)};

  Scene scene;
  scene.id = std::string(kind_name(kind)) + "_" + std::to_string(seed);
  scene.heading = theta;

  std::vector<Vec2> ego_local =
      sample_path(path, speed, kHistoryStart, 0.0, kStepSeconds);
  std::vector<Vec2> future_local =
      sample_path(path, speed, kStepSeconds, kFutureEnd, kStepSeconds);
  std::vector<Vec2> ego_world, future_world;
  for (Vec2 p : ego_local) ego_world.push_back(to_world(p, theta, origin));
  for (Vec2 p : future_local) future_world.push_back(to_world(p, theta, origin));
  scene.ego = Track::all_present(ego_world);
  scene.future = future_world;

  // Neighbors: a leader on the ego's own path, then oncoming / crossing /
  // parked traffic. Jitter and dropout model imperfect observation.
  const std::size_t lo = std::min(config.neighbors_min, config.neighbors_max);
  const std::size_t hi = std::max(config.neighbors_min, config.neighbors_max);
  const std::size_t n_neighbors =
      static_cast<std::size_t>(rng.uniform_int(static_cast<long>(lo), static_cast<long>(hi)));
  std::vector<NeighborSpec> specs;
  for (std::size_t i = 0; i < n_neighbors; ++i) {
    NeighborSpec spec;
    if (i == 0) {
      // Leader ahead on the same path with the same speed profile.
      const double gap = rng.uniform(6.0, 18.0);
      for (int k = 0; k < static_cast<int>(kRawHistoryLen); ++k) {
        const double t = kHistoryStart + kStepSeconds * k;
        spec.positions.push_back(path.at(speed.arc_length(t) + gap));
      }
    } else {
      const double pick = rng.uniform();
      if (pick < 0.4) {
        // Oncoming traffic on the opposite side of the divider.
        const double x0 = rng.uniform(8.0, 30.0);
        const double v = rng.uniform(3.0, 9.0);
        for (int k = 0; k < static_cast<int>(kRawHistoryLen); ++k) {
          const double t = kHistoryStart + kStepSeconds * k;
          spec.positions.push_back({x0 - v * t, 0.5 * lane});
        }
      } else if (pick < 0.7 && kind == SceneKind::kIntersection) {
        // Crossing traffic on the perpendicular road.
        const double cross_x = stop_line + lane + 0.5 * lane * (rng.uniform() < 0.5 ? 1.0 : -1.0);
        const double y0 = rng.uniform(-20.0, -6.0);
        const double v = rng.uniform(3.0, 8.0);
        for (int k = 0; k < static_cast<int>(kRawHistoryLen); ++k) {
          const double t = kHistoryStart + kStepSeconds * k;
          spec.positions.push_back({cross_x, y0 + v * (t - kHistoryStart)});
        }
      } else {
        // Parked off the road edge.
        const Vec2 spot{rng.uniform(-8.0, 25.0),
                        (lane + rng.uniform(0.5, 2.0)) * (rng.uniform() < 0.5 ? 1.0 : -1.0)};
        spec.positions.assign(kRawHistoryLen, spot);
      }
    }
    specs.push_back(std::move(spec));
  }
  for (const NeighborSpec& spec : specs) {
    Track track;
    track.positions.resize(kRawHistoryLen);
    track.present.resize(kRawHistoryLen);
    for (std::size_t k = 0; k < kRawHistoryLen; ++k) {
      const Vec2 noisy{spec.positions[k].x + config.neighbor_jitter * rng.normal(),
                       spec.positions[k].y + config.neighbor_jitter * rng.normal()};
      const bool present = rng.uniform() >= config.neighbor_dropout;
      track.present[k] = present;
      track.positions[k] = present ? to_world(noisy, theta, origin) : Vec2{0.0, 0.0};
    }
    scene.neighbors.push_back(std::move(track));
  }

  // Road geometry: corridor + centerline divider along the ego path; the
  // intersection kind adds the crossing road and junction box.
  MapGeometry geometry;
  const double s_lo = speed.arc_length(kHistoryStart) - 10.0;
  const double s_hi = speed.arc_length(kFutureEnd) + 10.0;
  auto add_world_poly = [&](std::vector<Vec2> poly, std::vector<std::vector<Vec2>>& dest) {
    for (Vec2& p : poly) p = to_world(p, theta, origin);
    dest.push_back(std::move(poly));
  };
  add_world_poly(corridor_polygon(path, s_lo, s_hi, lane), geometry.drivable_polygons);
  add_world_poly(centerline(path, s_lo, s_hi), geometry.lane_dividers);
  if (kind == SceneKind::kIntersection) {
    const double cx = stop_line + lane;  // junction center on the approach axis
    PathModel cross;  // straight road along the local y axis through (cx, 0)
    std::vector<Vec2> cross_poly;
    const double reach = 30.0;
    cross_poly = {{cx - lane, -reach}, {cx + lane, -reach}, {cx + lane, reach}, {cx - lane, reach}};
    add_world_poly(cross_poly, geometry.drivable_polygons);
    add_world_poly({{cx, -reach}, {cx, -lane}}, geometry.lane_dividers);
    add_world_poly({{cx, lane}, {cx, reach}}, geometry.lane_dividers);
    add_world_poly({{cx - lane, -lane}, {cx + lane, -lane}, {cx + lane, lane}, {cx - lane, lane}},
                   geometry.intersection_polygons);
  }
  scene.map_raster = rasterize_map(geometry, ego_world.back(), theta, config.raster_extent,
                                   config.raster_resolution);
  return scene;
}

std::vector<Scene> generate_dataset(std::size_t count, std::uint64_t base_seed,
                                    const GeneratorConfig& config) {
  Rng kind_rng(base_seed ^ 0xC0FFEE5EEDULL);
  const double w0 = std::max(0.0, config.weight_straight);
  const double w1 = std::max(0.0, config.weight_turn);
  const double w2 = std::max(0.0, config.weight_intersection);
  const double total = w0 + w1 + w2;
  if (total <= 0.0) throw ConfigError("generator kind weights must not all be zero");

  std::vector<Scene> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = kind_rng.uniform() * total;
    const SceneKind kind =
        u < w0 ? SceneKind::kStraight : (u < w0 + w1 ? SceneKind::kTurn : SceneKind::kIntersection);
    scenes.push_back(generate_synthetic_scene(kind, base_seed + i, config));
  }
  return scenes;
}

GeneratorConfig load_generator_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open generator config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("generator config " + path + ": " + e.what());
  }
  GeneratorConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "speed_min") c.speed_min = value.get<double>();
      else if (key == "speed_max") c.speed_max = value.get<double>();
      else if (key == "turn_speed_min") c.turn_speed_min = value.get<double>();
      else if (key == "turn_speed_max") c.turn_speed_max = value.get<double>();
      else if (key == "curvature_min") c.curvature_min = value.get<double>();
      else if (key == "curvature_max") c.curvature_max = value.get<double>();
      else if (key == "neighbors_min") c.neighbors_min = value.get<std::size_t>();
      else if (key == "neighbors_max") c.neighbors_max = value.get<std::size_t>();
      else if (key == "neighbor_jitter") c.neighbor_jitter = value.get<double>();
      else if (key == "neighbor_dropout") c.neighbor_dropout = value.get<double>();
      else if (key == "lane_width") c.lane_width = value.get<double>();
      else if (key == "raster_extent") c.raster_extent = value.get<double>();
      else if (key == "raster_resolution") c.raster_resolution = value.get<double>();
      else if (key == "weight_straight") c.weight_straight = value.get<double>();
      else if (key == "weight_turn") c.weight_turn = value.get<double>();
      else if (key == "weight_intersection") c.weight_intersection = value.get<double>();
      else throw ConfigError("generator config: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("generator config: bad value for key '" + key + "'");
    }
  }
  return c;
}

}  // namespace trajlm
