#include "trajlm/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "trajlm/errors.hpp"

namespace trajlm {
namespace {

/// Liang-Barsky segment/rect clip. Returns false when nothing remains.
bool clip_segment(Vec2& a, Vec2& b, double xmin, double xmax, double ymin, double ymax) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  double t0 = 0.0;
  double t1 = 1.0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - xmin, xmax - a.x, a.y - ymin, ymax - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;  // parallel and outside
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) {
      if (r > t1) return false;
      t0 = std::max(t0, r);
    } else {
      if (r < t0) return false;
      t1 = std::min(t1, r);
    }
  }
  const Vec2 na{a.x + t0 * dx, a.y + t0 * dy};
  const Vec2 nb{a.x + t1 * dx, a.y + t1 * dy};
  a = na;
  b = nb;
  return true;
}

void draw_line(MapRaster& raster, std::size_t channel, Vec2 a, Vec2 b) {
  const double res = raster.resolution;
  const double xmax = (static_cast<double>(raster.width - 1) - 0.5 * static_cast<double>(raster.width)) * res;
  const double ymax = (static_cast<double>(raster.height - 1) - 0.5 * static_cast<double>(raster.height)) * res;
  const double xmin = -0.5 * static_cast<double>(raster.width) * res;
  const double ymin = -0.5 * static_cast<double>(raster.height) * res;
  if (!clip_segment(a, b, xmin, xmax, ymin, ymax)) return;

  std::size_t r0, c0, r1, c1;
  if (!raster.cell_of(a, r0, c0) || !raster.cell_of(b, r1, c1)) return;

  // Integer Bresenham between the clipped endpoints' cells.
  long x0 = static_cast<long>(c0), y0 = static_cast<long>(r0);
  const long x1 = static_cast<long>(c1), y1 = static_cast<long>(r1);
  const long dx = std::labs(x1 - x0);
  const long dy = -std::labs(y1 - y0);
  const long sx = x0 < x1 ? 1 : -1;
  const long sy = y0 < y1 ? 1 : -1;
  long err = dx + dy;
  while (true) {
    raster.set(channel, static_cast<std::size_t>(y0), static_cast<std::size_t>(x0), 1);
    if (x0 == x1 && y0 == y1) break;
    const long e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void fill_polygon(MapRaster& raster, std::size_t channel, const std::vector<Vec2>& poly) {
  if (poly.size() < 3) return;
  const double res = raster.resolution;
  for (std::size_t row = 0; row < raster.height; ++row) {
    const double y = (static_cast<double>(row) - 0.5 * static_cast<double>(raster.height)) * res;
    // Crossings of polygon edges with the scanline through this row's centers.
    std::vector<double> xs;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2 a = poly[i];
      const Vec2 b = poly[(i + 1) % poly.size()];
      // Half-open in y so a vertex on the scanline counts exactly once.
      if ((a.y <= y && b.y > y) || (b.y <= y && a.y > y)) {
        const double t = (y - a.y) / (b.y - a.y);
        xs.push_back(a.x + t * (b.x - a.x));
      }
    }
    if (xs.empty()) continue;
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
      // Cells whose center lies in [xs[i], xs[i+1]).
      const double lo = (xs[i] / res) + 0.5 * static_cast<double>(raster.width);
      const double hi = (xs[i + 1] / res) + 0.5 * static_cast<double>(raster.width);
      long c0 = static_cast<long>(std::ceil(lo));
      long c1 = static_cast<long>(std::ceil(hi)) - 1;
      c0 = std::max(c0, 0L);
      c1 = std::min(c1, static_cast<long>(raster.width) - 1);
      for (long c = c0; c <= c1; ++c)
        raster.set(channel, row, static_cast<std::size_t>(c), 1);
    }
  }
}

std::vector<Vec2> to_ego(const std::vector<Vec2>& pts, Vec2 ego_position, double ego_heading) {
  std::vector<Vec2> out;
  out.reserve(pts.size());
  for (Vec2 p : pts) out.push_back(rotate(p - ego_position, -ego_heading));
  return out;
}

}  // namespace

MapRaster rasterize_map(const MapGeometry& geometry, Vec2 ego_position, double ego_heading,
                        double extent, double resolution) {
  if (resolution <= 0.0 || extent <= 0.0) throw ConfigError("raster extent and resolution must be positive");
  const double cells = extent / resolution;
  const std::size_t side = static_cast<std::size_t>(std::lround(cells));
  if (std::abs(cells - static_cast<double>(side)) > 1e-9 || side == 0)
    throw ConfigError("raster extent must be an integer multiple of the resolution");

  MapRaster raster = MapRaster::zeros(side, side, resolution, extent);
  for (const auto& poly : geometry.drivable_polygons)
    fill_polygon(raster, MapRaster::kDrivable, to_ego(poly, ego_position, ego_heading));
  for (const auto& poly : geometry.intersection_polygons)
    fill_polygon(raster, MapRaster::kIntersection, to_ego(poly, ego_position, ego_heading));
  for (const auto& line : geometry.lane_dividers) {
    const auto pts = to_ego(line, ego_position, ego_heading);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
      draw_line(raster, MapRaster::kLaneDivider, pts[i], pts[i + 1]);
  }
  return raster;
}

}  // namespace trajlm
