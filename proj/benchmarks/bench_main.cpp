#include <benchmark/benchmark.h>

#include "recore/augment/style.hpp"
#include "recore/autodiff/ops.hpp"
#include "recore/control/controller.hpp"
#include "recore/env/texworld.hpp"
#include "recore/harness/replay.hpp"
#include "recore/model/world_model.hpp"

namespace {

using namespace recore;

ad::Array random_array(Rng& rng, ad::Shape shape) {
  ad::Array a(shape);
  for (float& v : a.data()) v = static_cast<float>(uniform(rng, -1, 1));
  return a;
}

// Encoder-sized convolution: batch x 3 x 48 x 64, 32 filters of 4x4, stride 2.
void BM_Conv2dForwardBackward(benchmark::State& state) {
  Rng rng(1);
  const int batch = static_cast<int>(state.range(0));
  const ad::Array x = random_array(rng, {batch, 3, 48, 64});
  const ad::Var w = ad::leaf(random_array(rng, {32, 3, 4, 4}), true);
  const ad::Var b = ad::leaf(random_array(rng, {32}), true);
  for (auto _ : state) {
    const ad::Var y = ad::conv2d(ad::constant(x), w, b, 2, 0);
    ad::backward(ad::sum(y));
    benchmark::DoNotOptimize(w.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(1)->Arg(16)->Unit(benchmark::kMicrosecond);

void BM_Render(benchmark::State& state) {
  const env::Scene scene = env::generate_scene(101, {});
  const env::TexturePack pack(env::Split::kTrain);
  const env::RenderConfig cfg;
  env::Pose pose{scene.cell_center(scene.spawn_region.front()), 0.3};
  for (auto _ : state) {
    pose.theta += 0.01;
    benchmark::DoNotOptimize(env::render(pose, scene, pack, cfg));
  }
}
BENCHMARK(BM_Render)->Unit(benchmark::kMicrosecond);

void BM_StyleIntervene(benchmark::State& state) {
  const aug::StyleAugmenter augmenter(aug::AugmentConfig{}, 48, 64);
  const env::Scene scene = env::generate_scene(101, {});
  const env::Frame f = env::render({scene.cell_center(scene.spawn_region.front()), 0.0}, scene,
                                   env::TexturePack(env::Split::kTrain), env::RenderConfig{});
  Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(aug::style_intervene(f.rgb, augmenter, rng));
}
BENCHMARK(BM_StyleIntervene)->Unit(benchmark::kMicrosecond);

harness::ReplayBuffer random_replay(const env::EnvConfig& cfg, int episodes) {
  harness::ReplayBuffer buf(100000);
  env::TexWorld world(cfg);
  const env::TexturePack pack(env::Split::kTrain);
  Rng rng(3);
  for (int e = 0; e < episodes; ++e) {
    world.reset(env::generate_scene(101 + static_cast<std::uint64_t>(e % 5), cfg.scene), pack, rng);
    while (!world.done()) world.step(env::random_action(cfg, rng));
    buf.add(world.take_record());
  }
  return buf;
}

void BM_ReplaySample(benchmark::State& state) {
  const env::EnvConfig cfg;
  const harness::ReplayBuffer buf = random_replay(cfg, 10);
  Rng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(buf.sample(16, 16, rng, cfg));
}
BENCHMARK(BM_ReplaySample)->Unit(benchmark::kMillisecond);

// One world-model gradient step on a B x L batch at the default model size.
void BM_WorldModelUpdate(benchmark::State& state) {
  const int b = static_cast<int>(state.range(0)), l = static_cast<int>(state.range(1));
  const env::EnvConfig env_cfg;
  const harness::ReplayBuffer buf = random_replay(env_cfg, 10);
  model::WorldModelConfig cfg;
  model::WorldModel wm(cfg, 5);
  const aug::StyleAugmenter augmenter(aug::AugmentConfig{}, cfg.image_height, cfg.image_width);
  Rng rng(6);
  const model::SequenceBatch batch = buf.sample(b, l, rng, env_cfg);
  for (auto _ : state) benchmark::DoNotOptimize(model::world_model_update(wm, batch, &augmenter, rng));
  state.SetItemsProcessed(state.iterations() * b * l);
}
BENCHMARK(BM_WorldModelUpdate)->Args({4, 8})->Args({16, 16})->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_ControllerUpdate(benchmark::State& state) {
  model::WorldModelConfig cfg;
  model::WorldModel wm(cfg, 7);
  control::Controller ctrl(control::ControllerConfig{}, wm.state_dim(), cfg.action_dim, 8);
  Rng rng(9);
  const model::LatentState start = wm.initial_state(256);
  for (auto _ : state) benchmark::DoNotOptimize(ctrl.update(control::WorldModelDynamics(wm), start, rng));
}
BENCHMARK(BM_ControllerUpdate)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
