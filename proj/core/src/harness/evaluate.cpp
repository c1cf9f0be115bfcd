#include "recore/harness/evaluate.hpp"

#include <cstdio>

#include "recore/common/error.hpp"
#include "recore/common/instrumentation.hpp"

namespace recore::harness {

std::vector<std::uint64_t> split_scenes(const RunConfig& cfg, EvalSplit split) {
  return split == EvalSplit::kOodScene ? cfg.test_scenes : cfg.train_scenes;
}

env::Split split_textures(EvalSplit split) {
  return split == EvalSplit::kTrain ? env::Split::kTrain : env::Split::kTest;
}

EvalResult evaluate(Agent& agent, const RunConfig& cfg, EvalSplit split, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw ConfigError("evaluate: episodes must be >= 1");
  env::EnvConfig env_cfg = cfg.env;
  env_cfg.record_observations = false;
  env::TexWorld world(env_cfg);
  const env::TexturePack pack(split_textures(split));

  const auto before = instrumentation::snapshot();
  EvalResult out;
  std::vector<env::EpisodeSummary> all;
  const auto scenes = split_scenes(cfg, split);
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const env::Scene scene = env::generate_scene(scenes[si], env_cfg.scene);
    std::vector<env::EpisodeSummary> mine;
    for (int e = 0; e < episodes; ++e) {
      Rng rng(derive_seed(seed, si * 100003 + static_cast<std::uint64_t>(e)));
      env::Observation obs = world.reset(scene, pack, rng);
      agent.reset();
      while (!world.done()) obs = world.step(agent.act(obs, world, rng)).obs;
      const env::EpisodeRecord& rec = world.record();
      mine.push_back({rec.shortest_path_length, rec.traveled_length, rec.success});
    }
    out.per_scene.push_back({scenes[si], env::compute_metrics(mine), episodes});
    all.insert(all.end(), mine.begin(), mine.end());
  }
  out.average = env::compute_metrics(all);

  const auto after = instrumentation::snapshot();
  if (after.style_intervene_calls != before.style_intervene_calls || after.depth_reads != before.depth_reads) {
    throw StateError("evaluation augmented " + std::to_string(after.style_intervene_calls - before.style_intervene_calls) +
                     " images and read depth " + std::to_string(after.depth_reads - before.depth_reads) +
                     " times; deployment uses raw RGB and the task vector only");
  }
  return out;
}

std::string encode_per_scene(const std::vector<SceneMetrics>& scenes) {
  std::string out;
  char buf[96];
  for (const SceneMetrics& s : scenes) {
    std::snprintf(buf, sizeof buf, "%llu:%.6g:%.6g", static_cast<unsigned long long>(s.scene_seed), s.metrics.sr,
                  s.metrics.spl);
    if (!out.empty()) out += ';';
    out += buf;
  }
  return out;
}

}  // namespace recore::harness
