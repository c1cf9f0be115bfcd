#include "recore/harness/depth_probe.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <span>

#include "recore/common/error.hpp"

namespace recore::harness {

namespace {

double mean_abs_diff(const Image& a, const Image& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) acc += std::fabs(a.data[i] - b.data[i]);
  return acc / static_cast<double>(a.data.size());
}

}  // namespace

std::vector<DepthFrame> sample_depth_frames(const RunConfig& cfg, int n, std::uint64_t seed) {
  Rng rng(seed);
  const env::TexturePack train(env::Split::kTrain), test(env::Split::kTest);
  std::vector<env::Scene> scenes;
  for (std::uint64_t s : cfg.train_scenes) scenes.push_back(env::generate_scene(s, cfg.env.scene));
  env::TexWorld world(cfg.env);
  std::vector<DepthFrame> out;
  for (int i = 0; i < n; ++i) {
    const auto si = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(scenes.size()) - 1));
    const env::Scene& scene = scenes[si];
    const int cell = scene.spawn_region[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<std::int64_t>(scene.spawn_region.size()) - 1))];
    env::Vec2 p = scene.cell_center(cell);
    p.x += uniform(rng, -0.2, 0.2) * scene.cell_size;
    p.y += uniform(rng, -0.2, 0.2) * scene.cell_size;
    const env::Pose pose{p, uniform(rng, -std::numbers::pi, std::numbers::pi)};
    const env::Frame a = env::render(pose, scene, train, cfg.env.render);
    const env::Frame b = env::render(pose, scene, test, cfg.env.render);
    // The task vector comes from a reset at this pose toward the scene's first goal cell.
    const env::Observation obs = world.reset_to(scene, train, pose, scene.cell_center(scene.goal_region.front()));
    out.push_back({cfg.train_scenes[si], a.rgb, b.rgb, a.depth, obs.task});
  }
  return out;
}

Image predict_depth(const model::WorldModel& wm, const Image& rgb, const env::TaskVector& task, Rng& rng) {
  if (wm.config().aux != model::AuxHead::kDepth) throw StateError("predict_depth: the model has no depth head");
  const model::ParamView p = wm.view(model::ParamMode::kFrozen);
  ad::Array t({1, env::kTaskDim});
  for (int k = 0; k < env::kTaskDim; ++k) t[k] = task[static_cast<std::size_t>(k)];
  const ad::Var feature = wm.encode(p, std::span<const Image>(&rgb, 1), t);
  const model::LatentState post =
      wm.observe(p, wm.initial_state(1), ad::constant(ad::Array({1, 2})), feature, rng).post;
  const ad::Array d = wm.decode(p, post).value();
  Image out(1, rgb.height, rgb.width);
  std::copy(d.data().begin(), d.data().end(), out.data.begin());
  return out;
}

DepthProbe probe_depth(const model::WorldModel& wm, const std::vector<DepthFrame>& frames,
                       const aug::StyleAugmenter& augmenter, std::uint64_t seed) {
  if (frames.empty()) throw ShapeError("probe_depth: no frames");
  Rng rng(seed);
  DepthProbe out;
  for (const DepthFrame& f : frames) {
    const auto [va, vb] = aug::style_intervene(f.rgb_train, augmenter, rng);
    const std::uint64_t latent_seed = rng();
    Rng ra(latent_seed), rb(latent_seed), rt(latent_seed), ro(latent_seed);
    out.view_mad += mean_abs_diff(predict_depth(wm, va, f.task, ra), predict_depth(wm, vb, f.task, rb));
    out.mae_train += mean_abs_diff(predict_depth(wm, f.rgb_train, f.task, rt), f.depth);
    out.mae_test += mean_abs_diff(predict_depth(wm, f.rgb_test, f.task, ro), f.depth);
    out.mean_depth += f.depth.mean();
  }
  const auto n = static_cast<double>(frames.size());
  out.view_mad /= n;
  out.mae_train /= n;
  out.mae_test /= n;
  out.mean_depth /= n;
  return out;
}

void dump_depth_pairs(const model::WorldModel& wm, const std::vector<DepthFrame>& frames,
                      const std::filesystem::path& dir, bool ood, std::uint64_t seed) {
  const auto sub = dir / "depth_pairs";
  std::filesystem::create_directories(sub);
  Rng rng(seed);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const DepthFrame& f = frames[i];
    const Image& rgb = ood ? f.rgb_test : f.rgb_train;
    char id[32];
    std::snprintf(id, sizeof id, "%04zu", i);
    write_depth_pgm(sub / (std::string(id) + "_pred.pgm"), predict_depth(wm, rgb, f.task, rng));
    write_depth_pgm(sub / (std::string(id) + "_true.pgm"), f.depth);
    write_ppm(sub / (std::string(id) + "_rgb.ppm"), rgb);
  }
}

}  // namespace recore::harness
