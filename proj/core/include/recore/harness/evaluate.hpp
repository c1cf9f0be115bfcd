#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recore/harness/agent.hpp"
#include "recore/harness/config.hpp"

namespace recore::harness {

struct SceneMetrics {
  std::uint64_t scene_seed = 0;
  env::Metrics metrics;
  int episodes = 0;
};

struct EvalResult {
  env::Metrics average;  // over all episodes; scenes get equal counts
  std::vector<SceneMetrics> per_scene;
};

// Scenes and texture pack of a split: train scenes with train textures,
// train scenes with held-out textures, or held-out scenes with held-out
// textures.
std::vector<std::uint64_t> split_scenes(const RunConfig& cfg, EvalSplit split);
env::Split split_textures(EvalSplit split);

// Runs `episodes` episodes per scene of the split. Observations are not
// recorded. Throws StateError if the agent augmented an image or read depth
// while evaluating.
EvalResult evaluate(Agent& agent, const RunConfig& cfg, EvalSplit split, int episodes, std::uint64_t seed);

// "seed:sr:spl" per scene, joined with ';'.
std::string encode_per_scene(const std::vector<SceneMetrics>& scenes);

}  // namespace recore::harness
