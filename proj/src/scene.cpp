#include "trajlm/scene.hpp"

#include <cmath>

#include "trajlm/errors.hpp"

namespace trajlm {

double norm(Vec2 a) { return std::hypot(a.x, a.y); }

Vec2 rotate(Vec2 p, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

Track Track::all_present(std::vector<Vec2> pos) {
  Track t;
  t.present.assign(pos.size(), true);
  t.positions = std::move(pos);
  return t;
}

bool Track::fully_present() const {
  for (bool p : present)
    if (!p) return false;
  return true;
}

bool MapRaster::cell_of(Vec2 p, std::size_t& row, std::size_t& col) const {
  // Invert the cell-center mapping: col = x/res + W/2 rounded to nearest.
  const double fc = p.x / resolution + 0.5 * static_cast<double>(width);
  const double fr = p.y / resolution + 0.5 * static_cast<double>(height);
  const long c = std::lround(fc);
  const long r = std::lround(fr);
  if (r < 0 || c < 0 || r >= static_cast<long>(height) || c >= static_cast<long>(width)) return false;
  row = static_cast<std::size_t>(r);
  col = static_cast<std::size_t>(c);
  return true;
}

MapRaster MapRaster::zeros(std::size_t height, std::size_t width, double resolution, double extent) {
  MapRaster m;
  m.height = height;
  m.width = width;
  m.resolution = resolution;
  m.extent = extent;
  for (auto& ch : m.channels) ch.assign(height * width, 0);
  return m;
}

bool MapRaster::operator==(const MapRaster& other) const {
  return height == other.height && width == other.width && resolution == other.resolution &&
         extent == other.extent && channels == other.channels;
}

double derive_heading(const Scene& scene, bool& fallback) {
  fallback = false;
  if (scene.heading) return *scene.heading;
  if (scene.ego.positions.size() < 2) throw DataError("ego track too short to derive heading");
  const Vec2 last = scene.ego.positions.back();
  const Vec2 prev = scene.ego.positions[scene.ego.positions.size() - 2];
  const Vec2 d = last - prev;
  if (norm(d) < 1e-3) {
    fallback = true;
    return 0.0;
  }
  return std::atan2(d.y, d.x);
}

static Track transform_track(const Track& track, Vec2 origin, double angle) {
  Track out = track;
  for (auto& p : out.positions) p = rotate(p - origin, angle);
  return out;
}

Scene normalize_scene(const Scene& scene) {
  if (scene.ego.positions.size() != kRawHistoryLen)
    throw DataError("ego history length " + std::to_string(scene.ego.positions.size()) +
                    ", expected " + std::to_string(kRawHistoryLen));
  if (!scene.ego.fully_present()) throw DataError("ego track must be fully present");

  bool fallback = false;
  const double heading = derive_heading(scene, fallback);
  const Vec2 origin = scene.ego.positions.back();

  Scene out = scene;
  out.heading_fallback = fallback;
  out.ego = transform_track(scene.ego, origin, -heading);
  for (std::size_t i = 0; i < scene.neighbors.size(); ++i)
    out.neighbors[i] = transform_track(scene.neighbors[i], origin, -heading);
  if (scene.future) {
    auto& fut = *out.future;
    for (auto& p : fut) p = rotate(p - origin, -heading);
  }
  out.heading = 0.0;
  return out;
}

Scene apply_rigid(const Scene& scene, double angle, Vec2 translation) {
  Scene out = scene;
  auto xf = [&](Vec2 p) { return rotate(p, angle) + translation; };
  for (auto& p : out.ego.positions) p = xf(p);
  for (auto& t : out.neighbors)
    for (auto& p : t.positions) p = xf(p);
  if (out.future)
    for (auto& p : *out.future) p = xf(p);
  if (out.heading) out.heading = *out.heading + angle;
  return out;
}

Vec2 ego_to_world(Vec2 p, Vec2 ego_t0, double heading) {
  return rotate(p, heading) + ego_t0;
}

}  // namespace trajlm
