#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trajlm/pipeline.hpp"
#include "trajlm/scene.hpp"

namespace trajlm {

struct PlotOptions {
  std::size_t width = 720;
  std::size_t height = 720;
  double margin_m = 3.0;  // view padding when the scene has no raster
};

/// The labels the plot legend will carry, in drawing order. History always;
/// neighbors and ground truth only when the scene has them; one numbered
/// entry per prediction.
std::vector<std::string> plot_legend_entries(const Scene& scene, std::size_t n_predictions);

/// Raster image of one scene in the ego frame: map channels as background,
/// neighbor and ego history, ground truth, and each prediction in its own
/// style, plus a legend. The scene may be world-frame or already normalized.
void render_scene_plot(const Scene& scene, const std::vector<PredictedTrajectory>& predictions,
                       const std::string& out_path, const PlotOptions& options = {});

/// Minimal truecolor PNG writer (8-bit RGB, zlib-compressed, no interlace).
/// `rgb` is row-major, 3 bytes per pixel.
void write_png(const std::string& path, std::size_t width, std::size_t height,
               const std::vector<std::uint8_t>& rgb);

}  // namespace trajlm
