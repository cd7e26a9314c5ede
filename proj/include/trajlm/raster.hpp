#pragma once

#include <vector>

#include "trajlm/scene.hpp"

namespace trajlm {

/// World-frame vector map. Polygons are implicitly closed; dividers are open
/// polylines.
struct MapGeometry {
  std::vector<std::vector<Vec2>> drivable_polygons;
  std::vector<std::vector<Vec2>> intersection_polygons;
  std::vector<std::vector<Vec2>> lane_dividers;

  bool empty() const {
    return drivable_polygons.empty() && intersection_polygons.empty() && lane_dividers.empty();
  }
};

/// Burn world-frame geometry into an ego-centered raster: polygons are filled
/// with an even-odd scanline test at cell centers, dividers are drawn as
/// one-pixel Bresenham lines after clipping to the grid.
MapRaster rasterize_map(const MapGeometry& geometry, Vec2 ego_position, double ego_heading,
                        double extent = 50.0, double resolution = 0.5);

}  // namespace trajlm
