#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "recore/augment/style.hpp"
#include "recore/harness/config.hpp"
#include "recore/model/world_model.hpp"

namespace recore::harness {

// One camera pose rendered with both texture splits; the geometry, and so
// the depth, is shared.
struct DepthFrame {
  std::uint64_t scene_seed = 0;
  Image rgb_train;
  Image rgb_test;
  Image depth;
  env::TaskVector task{};
};

// Random free poses in the training scenes.
std::vector<DepthFrame> sample_depth_frames(const RunConfig& cfg, int n, std::uint64_t seed);

// Depth decoded from the first-step posterior of a single frame (initial
// state, zero action). Requires the depth head.
Image predict_depth(const model::WorldModel& wm, const Image& rgb, const env::TaskVector& task, Rng& rng);

struct DepthProbe {
  double view_mad = 0.0;    // mean |pred(view a) - pred(view b)| over pixels
  double mean_depth = 0.0;  // mean true depth
  double mae_train = 0.0;   // per-pixel MAE on train textures
  double mae_test = 0.0;    // per-pixel MAE on held-out textures
};

// Both views of a frame share one latent sampling stream, so the difference
// reflects the encoder rather than sampling noise.
DepthProbe probe_depth(const model::WorldModel& wm, const std::vector<DepthFrame>& frames,
                       const aug::StyleAugmenter& augmenter, std::uint64_t seed);

// Writes depth_pairs/<id>_{pred,true}.pgm and <id>_rgb.ppm for each frame
// under `dir`, using the held-out texture rendering when `ood` is set.
void dump_depth_pairs(const model::WorldModel& wm, const std::vector<DepthFrame>& frames,
                      const std::filesystem::path& dir, bool ood, std::uint64_t seed);

}  // namespace recore::harness
