#pragma once

// Small configurations and synthetic data shared by the harness tests and the
// acceptance binary.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "recore/harness/config.hpp"

namespace recore::testing {

// Synthetic episode of n entries at 2x3 pixels; pixel values encode (tag, t).
inline env::EpisodeRecord make_episode(int n, int tag) {
  env::EpisodeRecord ep;
  ep.height = 2;
  ep.width = 3;
  for (int t = 0; t < n; ++t) {
    for (int i = 0; i < 18; ++i) ep.rgb.push_back(static_cast<std::uint8_t>((tag * 7 + t) % 256));
    for (int i = 0; i < 6; ++i) ep.depth_mm.push_back(static_cast<std::uint16_t>(1000 * tag + t));
    env::TaskVector task{};
    task[0] = static_cast<float>(tag);
    task[1] = static_cast<float>(t);
    ep.task.push_back(task);
    ep.actions.push_back(t == 0 ? env::Action{} : env::Action{0.5, 0.05});
    ep.rewards.push_back(static_cast<float>(t));
    ep.dones.push_back(t + 1 == n);
  }
  ep.shortest_path_length = 1.0;
  return ep;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("recore_" + name);
  std::filesystem::remove_all(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A run that trains for 10 updates in about a second.
inline harness::RunConfig tiny_run() {
  harness::RunConfig c;
  c.seed = 3;
  c.total_env_steps = 340;
  c.prefill_steps = 300;
  c.train_every = 4;
  c.batch_size = 2;
  c.sequence_length = 6;
  c.replay_capacity = 2000;
  c.eval_episodes = 1;
  c.eval_split = harness::EvalSplit::kTrain;
  c.train_scenes = {101, 102};
  c.test_scenes = {201};
  c.env.scene.width = 6;
  c.env.scene.height = 6;
  c.env.render.height = 16;
  c.env.render.width = 16;
  c.env.t_max = 30;
  c.env.d_min = 0.8;
  c.wm.latent_dims = 4;
  c.wm.latent_classes = 4;
  c.wm.units = 32;
  c.wm.enc_channels = {8, 16};
  c.wm.enc_kernels = {4, 4};
  c.wm.dec_channels = {16, 8};
  c.wm.dec_kernels = {4, 4};
  c.wm.task_mlp = {8, 8};
  c.wm.head_layers = 2;
  c.wm.head_units = 16;
  c.ctrl.horizon = 3;
  c.ctrl.layers = 2;
  c.ctrl.units = 32;
  c.aug.pad_range = 2;
  c.aug.cutout_min = 3;
  c.aug.cutout_max = 6;
  return c;
}

// Upper 1% point of chi-square with k degrees of freedom (Wilson-Hilferty).
inline double chi2_critical_001(double k) {
  const double z = 2.3263478740408408;
  const double a = 2.0 / (9.0 * k);
  return k * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

}  // namespace recore::testing
