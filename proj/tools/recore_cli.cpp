#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "recore/common/error.hpp"
#include "recore/harness/depth_probe.hpp"
#include "recore/harness/training.hpp"

namespace fs = std::filesystem;
using namespace recore;

namespace {

harness::RunConfig load_with_overrides(const fs::path& path, const std::vector<std::string>& sets) {
  harness::RunConfig cfg = path.empty() ? harness::RunConfig{} : harness::load_config(path);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    harness::set_key(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  return cfg;
}

void print_eval(const harness::EvalResult& r, harness::EvalSplit split) {
  std::printf("split %s: SR %.4f SPL %.4f\n", harness::to_string(split), r.average.sr, r.average.spl);
  for (const auto& s : r.per_scene) {
    std::printf("  scene %llu: SR %.4f SPL %.4f (%d episodes)\n", static_cast<unsigned long long>(s.scene_seed),
                s.metrics.sr, s.metrics.spl, s.episodes);
  }
}

int run_train(const fs::path& config, const std::vector<std::string>& sets, std::optional<std::uint64_t> seed,
              const fs::path& out) {
  harness::RunConfig cfg = load_with_overrides(config, sets);
  if (seed) cfg.seed = *seed;
  harness::Trainer t(cfg, out);
  t.run();
  const harness::MetricsRow& last = t.rows().back();
  std::printf("%lld env steps, %lld updates; final %s SR %.4f SPL %.4f\n", static_cast<long long>(t.env_steps()),
              static_cast<long long>(t.updates()), last.split.c_str(), last.sr, last.spl);
  return 0;
}

int run_eval(const fs::path& ckpt, const std::string& split_name, int episodes, std::uint64_t seed) {
  const harness::LoadedCheckpoint loaded = harness::load_agent_checkpoint(ckpt);
  const harness::EvalSplit split = harness::eval_split_from_string(split_name);
  harness::LearnedAgent agent(*loaded.models.wm, *loaded.models.ctrl, loaded.cfg.env, true);
  print_eval(harness::evaluate(agent, loaded.cfg, split, episodes, seed), split);
  return 0;
}

int run_ablate(const fs::path& config, const std::vector<std::string>& sets, int seeds, const fs::path& out) {
  const harness::RunConfig base = load_with_overrides(config, sets);
  fs::create_directories(out);
  std::ofstream summary(out / "summary.csv", std::ios::trunc);
  summary << "ablation,seed,split,sr,spl\n";
  for (const harness::RunConfig& cfg : harness::ablation_matrix(base)) {
    for (int s = 0; s < seeds; ++s) {
      harness::RunConfig c = cfg;
      c.seed = base.seed + static_cast<std::uint64_t>(s);
      const fs::path dir = out / harness::to_string(c.ablation) / ("seed" + std::to_string(c.seed));
      std::fprintf(stderr, "training %s seed %llu\n", harness::to_string(c.ablation),
                   static_cast<unsigned long long>(c.seed));
      const auto rows = harness::run_training(c, dir);
      const harness::MetricsRow& last = rows.back();
      summary << harness::to_string(c.ablation) << "," << c.seed << "," << last.split << "," << last.sr << ","
              << last.spl << "\n";
      summary.flush();
    }
  }
  return 0;
}

int run_render(const fs::path& config, std::uint64_t scene_seed, const std::vector<double>& pose_in,
               const std::string& textures, const std::string& prefix) {
  harness::RunConfig cfg = load_with_overrides(config, {});
  cfg.finalize();
  const env::Scene scene = env::generate_scene(scene_seed, cfg.env.scene);
  env::Pose pose;
  if (pose_in.empty()) {
    pose.pos = scene.cell_center(scene.spawn_region.front());
  } else {
    if (pose_in.size() != 3) throw ConfigError("--pose expects x,y,theta");
    pose = {{pose_in[0], pose_in[1]}, pose_in[2]};
  }
  const env::TexturePack pack(textures == "test" ? env::Split::kTest : env::Split::kTrain);
  const env::Frame f = env::render(pose, scene, pack, cfg.env.render);
  write_ppm(prefix + "_rgb.ppm", f.rgb);
  write_depth_pgm(prefix + "_depth.pgm", f.depth);
  std::printf("wrote %s_rgb.ppm and %s_depth.pgm (pose %.3f,%.3f,%.3f)\n", prefix.c_str(), prefix.c_str(), pose.pos.x,
              pose.pos.y, pose.theta);
  return 0;
}

int run_depth_pairs(const fs::path& ckpt, int frames, bool ood, std::uint64_t seed, const fs::path& out) {
  const harness::LoadedCheckpoint loaded = harness::load_agent_checkpoint(ckpt);
  const auto f = harness::sample_depth_frames(loaded.cfg, frames, seed);
  harness::dump_depth_pairs(*loaded.models.wm, f, out, ood, seed);
  if (loaded.cfg.wm.augment) {
    const aug::StyleAugmenter augmenter(loaded.cfg.aug, loaded.cfg.env.render.height, loaded.cfg.env.render.width);
    const harness::DepthProbe p = harness::probe_depth(*loaded.models.wm, f, augmenter, seed);
    std::printf("view MAD %.4f m, mean depth %.4f m, MAE train %.4f m, MAE held-out %.4f m\n", p.view_mad,
                p.mean_depth, p.mae_train, p.mae_test);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("World-model navigation agent for TexWorld");
  app.require_subcommand(1);

  fs::path config, out, ckpt;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::uint64_t eval_seed = 0, scene_seed = 101;
  std::string split = "ood-texture", textures = "train", prefix = "frame";
  int episodes = 10, seeds = 3, frames = 16;
  std::vector<double> pose;
  bool ood = false;

  auto* train = app.add_subcommand("train", "Train one agent, writing metrics.csv and checkpoints");
  train->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "Overrides run.seed");
  train->add_option("--out", out, "Output directory")->required();
  train->add_option("--set", sets, "key=value override, repeatable");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with the deterministic policy");
  eval->add_option("--ckpt", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", split, "train, ood-texture or ood-scene")
      ->check(CLI::IsMember({"train", "ood-texture", "ood-scene"}));
  eval->add_option("--episodes", episodes, "Episodes per scene")->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_seed, "Evaluation seed");

  auto* ablate = app.add_subcommand("ablate", "Train every ablation for several seeds");
  ablate->add_option("--config", config, "Base config file")->required()->check(CLI::ExistingFile);
  ablate->add_option("--out", out, "Output directory")->required();
  ablate->add_option("--seeds", seeds, "Seeds per configuration, counting up from run.seed")
      ->check(CLI::PositiveNumber);
  ablate->add_option("--set", sets, "key=value override, repeatable");

  auto* render = app.add_subcommand("render", "Render one frame as PPM (RGB) and 16-bit PGM (depth, mm)");
  render->add_option("--config", config, "Config file for scene and camera settings")->check(CLI::ExistingFile);
  render->add_option("--scene-seed", scene_seed, "Scene seed");
  render->add_option("--pose", pose, "x,y,theta in meters and radians; default spawn cell facing east")
      ->delimiter(',')
      ->expected(3);
  render->add_option("--textures", textures, "train or test texture pack")->check(CLI::IsMember({"train", "test"}));
  render->add_option("--out", prefix, "Output file prefix");

  auto* pairs = app.add_subcommand("depth-pairs", "Dump predicted and true depth for random frames");
  pairs->add_option("--ckpt", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  pairs->add_option("--frames", frames, "Number of frames")->check(CLI::PositiveNumber);
  pairs->add_flag("--ood", ood, "Use the held-out texture rendering");
  pairs->add_option("--seed", eval_seed, "Frame sampling seed");
  pairs->add_option("--out", out, "Output directory")->required();

  auto* show = app.add_subcommand("config", "Print every config key with its value");
  show->add_option("--config", config, "Config file; defaults when omitted")->check(CLI::ExistingFile);
  show->add_option("--set", sets, "key=value override, repeatable");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_train(config, sets, seed, out);
    if (*eval) return run_eval(ckpt, split, episodes, eval_seed);
    if (*ablate) return run_ablate(config, sets, seeds, out);
    if (*render) return run_render(config, scene_seed, pose, textures, prefix);
    if (*pairs) return run_depth_pairs(ckpt, frames, ood, eval_seed, out);
    if (*show) {
      std::fputs(harness::dump_config(load_with_overrides(config, sets)).c_str(), stdout);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
