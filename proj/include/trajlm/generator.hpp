#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trajlm/scene.hpp"

namespace trajlm {

enum class SceneKind { kStraight, kTurn, kIntersection };
const char* kind_name(SceneKind kind);

/// All knobs of the synthetic scene generator. Every field is a documented
/// default; parameter ranges are clamped, never rejected.
struct GeneratorConfig {
  double speed_min = 5.0;        // straight-scene ego speed, m/s
  double speed_max = 12.0;
  double turn_speed_min = 2.5;   // turning scenes stay slow enough for the raster
  double turn_speed_max = 4.0;
  double curvature_min = 0.02;   // 1/m
  double curvature_max = 0.08;
  std::size_t neighbors_min = 0;
  std::size_t neighbors_max = 6;
  double neighbor_jitter = 0.05;   // observation noise std, m
  double neighbor_dropout = 0.1;   // per-timestep absence probability
  double lane_width = 3.5;         // corridor half-width, m
  double raster_extent = 50.0;
  double raster_resolution = 0.5;
  // Sampling weights for straight/turn/intersection when generating datasets.
  double weight_straight = 1.0;
  double weight_turn = 1.0;
  double weight_intersection = 1.0;
};

/// Reads a JSON config; absent keys keep defaults, unknown keys are errors.
GeneratorConfig load_generator_config(const std::string& path);

/// One deterministic scene. Ego kinematics per kind: constant speed
/// (straight), constant curvature starting after t=0 (turn), decelerate then
/// accelerate through a corner (intersection). The world pose is random; the
/// map geometry and raster follow the generated road.
Scene generate_synthetic_scene(SceneKind kind, std::uint64_t seed, const GeneratorConfig& config);

/// Dataset of `count` scenes with kinds drawn by weight; scene i uses seed
/// base_seed + i.
std::vector<Scene> generate_dataset(std::size_t count, std::uint64_t base_seed,
                                    const GeneratorConfig& config);

}  // namespace trajlm
