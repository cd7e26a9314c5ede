#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "trajlm/scene.hpp"

namespace trajlm {

/// Mean Euclidean error over the first horizon_steps points (meters).
double ade(const std::vector<Vec2>& pred, const std::vector<Vec2>& truth,
           std::size_t horizon_steps);

/// Euclidean error at exactly the horizon_steps-th point (meters).
double fde(const std::vector<Vec2>& pred, const std::vector<Vec2>& truth,
           std::size_t horizon_steps);

/// Per-scene (default): a miss is a final-displacement error strictly above
/// the threshold. Per-point: fraction of all predicted positions in error.
enum class MissMode { kFinalDisplacement, kPerPoint };

using TrajectoryPair = std::pair<std::vector<Vec2>, std::vector<Vec2>>;  // pred, truth

double miss_rate(const std::vector<TrajectoryPair>& pairs, double threshold = 2.0,
                 MissMode mode = MissMode::kFinalDisplacement);

/// Mean wall-clock seconds per scene after dropping the leading warm-up runs.
double inference_efficiency(const std::vector<double>& samples_seconds, std::size_t warmup = 3);

/// Which horizons the report carries, in 0.5 s steps. Defaults follow the
/// benchmark tables: ADE at 2/4/6 s, FDE at 6 s.
struct HorizonSpec {
  std::vector<std::size_t> ade_steps = {4, 8, 12};
  std::vector<std::size_t> fde_steps = {12};
};

/// "2s" for 4 steps at 2 Hz; half steps render with one decimal.
std::string horizon_label(std::size_t steps);

/// One evaluated scene; vectors align with a HorizonSpec.
struct SceneResult {
  std::string id;
  std::vector<double> ade_m;
  std::vector<double> fde_m;
};

SceneResult evaluate_scene(const std::string& id, const std::vector<Vec2>& pred,
                           const std::vector<Vec2>& truth, const HorizonSpec& spec = {});

struct MetricsReport {
  std::vector<std::string> ade_labels;
  std::vector<std::pair<double, double>> ade;  // mean, population std
  std::vector<std::string> fde_labels;
  std::vector<std::pair<double, double>> fde;
  double mr = 0.0;
  double ie_s = 0.0;
  std::size_t n_scenes = 0;
};

/// Means and population standard deviations across scenes. Every result must
/// carry exactly the spec's horizons.
MetricsReport aggregate(const std::vector<SceneResult>& results, const HorizonSpec& spec,
                        double miss, double ie_seconds);

/// {"ade": {"2s": [mean, std], ...}, "fde": {...}, "mr": .., "ie_s": ..,
///  "n_scenes": ..} — the documented report layout.
std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);
void save_report(const MetricsReport& report, const std::string& path);
MetricsReport load_report(const std::string& path);

/// One row per scene: scene_id, then ADE/FDE columns named by horizon.
void save_per_scene_csv(const std::vector<SceneResult>& results, const HorizonSpec& spec,
                        const std::string& path);

}  // namespace trajlm
