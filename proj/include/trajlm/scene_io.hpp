#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trajlm/scene.hpp"

namespace trajlm {

/// Scene equality for round-trip checks. Neighbor positions at absent
/// timesteps are placeholders and are excluded from the comparison.
bool scenes_equal(const Scene& a, const Scene& b);

/// One scene per line:
///   {"id": str, "ego": 5x2, "neighbors": [Ix[5x([x,y]|null)]],
///    "heading": num|null, "map": {"channels": 3xHxW, "resolution", "extent"}|null,
///    "future": 12x2|null}
/// Coordinates are meters in the world frame.
void save_scenes(const std::vector<Scene>& scenes, const std::string& path);
std::vector<Scene> load_scenes(const std::string& path);

/// Deterministic disjoint covering split of scene ids. Sizes come from
/// cumulative rounding of the fractions, so they always sum to the total.
struct DatasetSplit {
  std::vector<std::vector<std::string>> parts;
};
DatasetSplit split_dataset(const std::vector<std::string>& scene_ids, std::uint64_t split_seed,
                           const std::vector<double>& fractions);

}  // namespace trajlm
