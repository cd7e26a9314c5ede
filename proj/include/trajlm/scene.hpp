#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace trajlm {

/// Protocol constants: 2 Hz sampling, 2 s history, 6 s horizon. Raw history
/// keeps one extra step so every encoded step has a true predecessor.
inline constexpr std::size_t kRawHistoryLen = 5;   // t in {-2.0,-1.5,-1.0,-0.5,0.0} s
inline constexpr std::size_t kEncodedSteps = 4;    // T
inline constexpr std::size_t kFutureLen = 12;      // N, t in {0.5,...,6.0} s
inline constexpr double kStepSeconds = 0.5;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
double norm(Vec2 a);
Vec2 rotate(Vec2 p, double angle);

/// One observed agent: kRawHistoryLen positions with per-timestamp presence.
/// Positions at absent timestamps are placeholders and are never read.
struct Track {
  std::vector<Vec2> positions;
  std::vector<bool> present;

  static Track all_present(std::vector<Vec2> pos);
  bool fully_present() const;
};

/// Ego-centered multi-channel occupancy grid. Stored in the ego frame: the
/// ego sits at the center pixel and +x (heading) runs along columns. Cell
/// (r,c) is centered at ((c - W/2)*res, (r - H/2)*res).
struct MapRaster {
  static constexpr std::size_t kChannels = 3;
  enum Channel { kDrivable = 0, kLaneDivider = 1, kIntersection = 2 };

  std::size_t height = 0;
  std::size_t width = 0;
  double resolution = 0.5;  // meters per pixel
  double extent = 50.0;     // side length of the covered square, meters
  std::array<std::vector<std::uint8_t>, kChannels> channels;

  std::uint8_t at(std::size_t channel, std::size_t row, std::size_t col) const {
    return channels[channel][row * width + col];
  }
  void set(std::size_t channel, std::size_t row, std::size_t col, std::uint8_t v) {
    channels[channel][row * width + col] = v;
  }
  /// Nearest cell for an ego-frame point; false if outside the grid.
  bool cell_of(Vec2 p, std::size_t& row, std::size_t& col) const;

  static MapRaster zeros(std::size_t height, std::size_t width, double resolution, double extent);
  bool operator==(const MapRaster& other) const;
};

/// One prediction instance.
struct Scene {
  std::string id;
  Track ego;
  std::vector<Track> neighbors;
  std::optional<double> heading;  // radians, world frame
  std::optional<MapRaster> map_raster;
  std::optional<std::vector<Vec2>> future;  // kFutureLen ground-truth points
  /// Set by normalize_scene when the heading had to fall back to 0.
  bool heading_fallback = false;
};

/// Heading from the last observed ego displacement; 0 (with fallback flag)
/// when the ego is effectively stationary over the final step.
double derive_heading(const Scene& scene, bool& fallback);

/// Translate so the ego at t=0 is the origin and rotate by -heading so the
/// ego heading points along +x. Applies to ego, neighbors, and future. The
/// raster is already stored in the ego frame and passes through unchanged.
Scene normalize_scene(const Scene& scene);

/// Rigid motion of a whole scene: rotate all positions by angle, then
/// translate. Adjusts an explicit heading accordingly; the ego-frame raster
/// is untouched.
Scene apply_rigid(const Scene& scene, double angle, Vec2 translation);

/// Map an ego-frame point back to the world frame of the original scene.
Vec2 ego_to_world(Vec2 p, Vec2 ego_t0, double heading);

}  // namespace trajlm
