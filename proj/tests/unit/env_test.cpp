#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <set>

#include "recore/common/error.hpp"
#include "recore/env/render.hpp"
#include "recore/env/scene.hpp"
#include "recore/env/texture.hpp"
#include "recore/env/texworld.hpp"

namespace recore::env {
namespace {

// Empty room with border walls; `extra` marks additional wall cells.
Scene open_room(int w, int h, std::initializer_list<std::pair<int, int>> extra = {}) {
  Scene s;
  s.width = w;
  s.height = h;
  s.cell_size = 0.5;
  s.walls.assign(static_cast<std::size_t>(w) * h, 0);
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < w; ++i) {
      if (i == 0 || j == 0 || i == w - 1 || j == h - 1) s.walls[static_cast<std::size_t>(s.index(i, j))] = 1;
    }
  }
  for (auto [i, j] : extra) s.walls[static_cast<std::size_t>(s.index(i, j))] = 1;
  s.wall_materials.assign(s.walls.size() * 4, 0);
  for (std::size_t k = 0; k < s.wall_materials.size(); ++k) s.wall_materials[k] = static_cast<std::uint32_t>(k * 7 + 3);
  s.floor_material = 5;
  for (int c = 0; c < w * h; ++c) {
    if (!s.walls[static_cast<std::size_t>(c)]) {
      s.spawn_region.push_back(c);
      s.goal_region.push_back(c);
    }
  }
  return s;
}

// Breadth-first search over 4-connected free cells, in steps.
int bfs_steps(const Scene& s, int from, int to) {
  std::vector<int> dist(s.walls.size(), -1);
  std::deque<int> q{from};
  dist[static_cast<std::size_t>(from)] = 0;
  while (!q.empty()) {
    const int c = q.front();
    q.pop_front();
    if (c == to) return dist[static_cast<std::size_t>(c)];
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int i = s.cell_x(c) + di[k], j = s.cell_y(c) + dj[k];
      if (!s.is_free(i, j)) continue;
      const int n = s.index(i, j);
      if (dist[static_cast<std::size_t>(n)] < 0) {
        dist[static_cast<std::size_t>(n)] = dist[static_cast<std::size_t>(c)] + 1;
        q.push_back(n);
      }
    }
  }
  return -1;
}

TEST(Scene, SameSeedIsIdentical) {
  const Scene a = generate_scene(42, {});
  const Scene b = generate_scene(42, {});
  EXPECT_EQ(a.walls, b.walls);
  EXPECT_EQ(a.wall_materials, b.wall_materials);
  EXPECT_EQ(a.floor_material, b.floor_material);
  const Scene c = generate_scene(43, {});
  EXPECT_TRUE(a.walls != c.walls || a.wall_materials != c.wall_materials);
}

TEST(Scene, AllFreeRequestIsConnected) {
  SceneConfig cfg;
  cfg.width = cfg.height = 8;
  cfg.obstacle_density = 0.0;
  const Scene s = generate_scene(7, cfg);
  EXPECT_EQ(s.free_count(), 36);
  for (int c : s.spawn_region) EXPECT_EQ(static_cast<int>(flood_fill(s, c).size()), s.free_count());
}

TEST(Scene, GoalAlwaysReachableFromSpawn) {
  int unreachable = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const Scene s = generate_scene(seed, {});
    const auto reach = flood_fill(s, s.spawn_region.front());
    const std::set<int> r(reach.begin(), reach.end());
    for (int g : s.goal_region) unreachable += r.count(g) ? 0 : 1;
    for (int c : s.spawn_region) ASSERT_FALSE(s.walls[static_cast<std::size_t>(c)]);
  }
  EXPECT_EQ(unreachable, 0);
}

TEST(Scene, DensityIsRespected) {
  const Scene s = generate_scene(3, {});
  const int interior_walls = (s.width - 2) * (s.height - 2) - s.free_count();
  EXPECT_EQ(interior_walls, static_cast<int>(std::lround(0.12 * 64)));
}

TEST(Scene, TooSmallIsConfigError) {
  SceneConfig cfg;
  cfg.width = 5;
  EXPECT_THROW(generate_scene(1, cfg), ConfigError);
}

TEST(Texture, SplitsAreDisjointPerFamily) {
  const TexturePack train(Split::kTrain), test(Split::kTest);
  for (int f = 0; f < kNumFamilies; ++f) {
    const auto fam = static_cast<Family>(f);
    const auto& held = held_out_ids(fam);
    EXPECT_GE(held.size(), 2u);
    EXPECT_LE(held.size(), 3u);
    std::set<int> a, b;
    for (const auto& t : train.family(fam)) a.insert(t.tex.id);
    for (const auto& t : test.family(fam)) b.insert(t.tex.id);
    for (int id : a) EXPECT_EQ(b.count(id), 0u) << family_name(fam);
    EXPECT_EQ(a.size() + b.size(), static_cast<std::size_t>(kIdsPerFamily));
  }
}

TEST(Texture, ResolveStaysInsidePack) {
  const TexturePack test(Split::kTest);
  for (std::uint32_t key = 0; key < 5000; key += 37) {
    const Tile& t = test.resolve(key);
    const auto& held = held_out_ids(t.tex.family);
    EXPECT_NE(std::find(held.begin(), held.end(), t.tex.id), held.end());
  }
}

TEST(Geodesic, StraightCorridorMatchesBfs) {
  // 10 free cells in a row.
  Scene s = open_room(12, 3);
  const int a = s.index(1, 1), b = s.index(10, 1);
  const auto field = geodesic_field(s, b);
  EXPECT_DOUBLE_EQ(field[static_cast<std::size_t>(a)], bfs_steps(s, a, b) * s.cell_size);
  EXPECT_DOUBLE_EQ(field[static_cast<std::size_t>(a)], 4.5);
}

TEST(Geodesic, NoCornerCutting) {
  Scene s = open_room(5, 5, {{2, 1}, {1, 2}});
  s.walls[static_cast<std::size_t>(s.index(2, 2))] = 0;
  const auto field = geodesic_field(s, s.index(2, 2));
  EXPECT_EQ(field[static_cast<std::size_t>(s.index(1, 1))], kUnreachable);
}

TEST(Render, FacingWallAtTwoMeters) {
  Scene s = open_room(12, 12);
  for (int j = 0; j < 12; ++j) s.walls[static_cast<std::size_t>(s.index(6, j))] = 1;
  const TexturePack pack(Split::kTrain);
  TexWorld env({});
  const Observation obs = env.reset_to(s, pack, Pose{{1.0, 3.0}, 0.0}, {0.75, 0.75});
  EXPECT_EQ(obs.depth().at(0, 24, 32), 2.0f);
}

TEST(Render, FlatWallAnalyticDepth) {
  Scene s = open_room(30, 30);
  for (int j = 0; j < 30; ++j) s.walls[static_cast<std::size_t>(s.index(4, j))] = 1;
  const TexturePack pack(Split::kTrain);
  const RenderConfig cfg;
  const Pose pose{{1.0, 7.3}, 0.0};
  const Frame f = render(pose, s, pack, cfg);
  EXPECT_EQ(f.depth.at(0, 0, cfg.width / 2), 1.0f);
  for (int c = 0; c < cfg.width; ++c) {
    const double expected = 1.0 / std::cos(column_angle(cfg, pose.theta, c));
    for (int r = 0; r < cfg.height; ++r) {
      const float d = f.depth.at(0, r, c);
      EXPECT_GE(d, 1.0f);
      EXPECT_LE(d, 10.0f);
      EXPECT_NEAR(d, expected, 1e-6 * expected);
    }
  }
}

TEST(Render, DepthIndependentOfTexturePack) {
  const Scene s = generate_scene(11, {});
  const TexturePack train(Split::kTrain), test(Split::kTest);
  const RenderConfig cfg;
  for (int c : {s.spawn_region.front(), s.spawn_region.back()}) {
    for (double theta : {0.0, 1.0, -2.5}) {
      const Pose pose{s.cell_center(c), theta};
      const Frame a = render(pose, s, train, cfg);
      const Frame b = render(pose, s, test, cfg);
      EXPECT_EQ(a.depth.data, b.depth.data);
      EXPECT_NE(a.rgb.data, b.rgb.data);
    }
  }
}

TEST(Render, FullTurnIsPeriodic) {
  const Scene s = generate_scene(12, {});
  const TexturePack pack(Split::kTrain);
  const RenderConfig cfg;
  const Pose p{s.cell_center(s.spawn_region[3]), 0.7};
  const Pose q{p.pos, 0.7 + 2 * std::numbers::pi};
  const Frame a = render(p, s, pack, cfg), b = render(q, s, pack, cfg);
  // theta + 2pi is not exactly representable, so allow rounding-level noise.
  for (std::size_t i = 0; i < a.depth.data.size(); ++i) EXPECT_NEAR(a.depth.data[i], b.depth.data[i], 1e-5);
  int differing = 0;
  for (std::size_t i = 0; i < a.rgb.data.size(); ++i) {
    EXPECT_NEAR(a.rgb.data[i], b.rgb.data[i], 1.5 / 255);
    differing += a.rgb.data[i] != b.rgb.data[i];
  }
  EXPECT_LE(differing, 3);
}

TEST(Render, RgbInUnitRangeAndQuantized) {
  const Scene s = generate_scene(13, {});
  const TexturePack pack(Split::kTest);
  const Frame f = render(Pose{s.cell_center(s.spawn_region[0]), 0.3}, s, pack, {});
  for (float v : f.rgb.data) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
    ASSERT_EQ(std::round(v * 255.0f), v * 255.0f);
  }
}

TEST(TexWorld, InitialTaskVector) {
  const Scene s = generate_scene(5, {});
  const TexturePack pack(Split::kTrain);
  TexWorld env({});
  Rng rng(1);
  const Observation obs = env.reset(s, pack, rng);
  EXPECT_EQ(obs.task[6], 0.0f);
  EXPECT_EQ(obs.task[7], 0.0f);
  EXPECT_NEAR(obs.task[4] * obs.task[4] + obs.task[5] * obs.task[5], 1.0f, 1e-6f);
  for (float v : obs.task) EXPECT_TRUE(std::isfinite(v));
  EXPECT_GE(env.record().shortest_path_length, env.config().d_min);
}

TEST(TexWorld, IdentityActionChangesNothing) {
  const Scene s = generate_scene(6, {});
  const TexturePack pack(Split::kTrain);
  TexWorld env({});
  Rng rng(2);
  const Observation o0 = env.reset(s, pack, rng);
  const Pose before = env.pose();
  const StepResult r = env.step({0.0, 0.0});
  EXPECT_EQ(env.pose().pos.x, before.pos.x);
  EXPECT_EQ(env.pose().pos.y, before.pos.y);
  EXPECT_EQ(env.pose().theta, before.theta);
  EXPECT_EQ(r.obs.depth().data, o0.depth().data);
}

TEST(TexWorld, SuccessWithinRadius) {
  const Scene s = open_room(8, 8);
  const TexturePack pack(Split::kTrain);
  TexWorld env({});
  env.reset_to(s, pack, Pose{{1.65, 1.75}, 0.0}, {1.75, 1.75});
  const StepResult r = env.step({0.4, 0.1});
  EXPECT_TRUE(r.done);
  EXPECT_TRUE(r.info.success);
  EXPECT_GE(r.reward, env.config().r_success - 1.0);
  EXPECT_THROW(env.step({}), StateError);
}

TEST(TexWorld, ForwardIntoWallStopsAtContact) {
  Scene s = open_room(10, 6, {{5, 2}});
  const TexturePack pack(Split::kTrain);
  EnvConfig cfg;
  cfg.f_max = 1.0;
  TexWorld env(cfg);
  // Wall face at x = 2.5, agent at x = 2.2.
  env.reset_to(s, pack, Pose{{2.2, 1.25}, 0.0}, {0.75, 2.25});
  const StepResult r = env.step({0.0, 1.0});
  EXPECT_TRUE(r.info.collided);
  EXPECT_NEAR(r.info.displacement, 0.3 - cfg.contact_eps, 1e-12);
  EXPECT_NEAR(env.pose().pos.x, 2.5 - cfg.contact_eps, 1e-12);
}

TEST(TexWorld, ActionsAreClamped) {
  const Scene s = open_room(12, 12);
  const TexturePack pack(Split::kTrain);
  TexWorld env({});
  env.reset_to(s, pack, Pose{{3.0, 3.0}, 0.0}, {5.25, 5.25});
  const StepResult r = env.step({5.0, 5.0});
  EXPECT_NEAR(env.pose().theta, env.config().r_max, 1e-12);
  EXPECT_NEAR(r.info.displacement, env.config().f_max, 1e-12);
}

TEST(TexWorld, RewardShaping) {
  const Scene s = open_room(12, 4);
  const TexturePack pack(Split::kTrain);
  TexWorld env({});
  env.reset_to(s, pack, Pose{{0.75, 1.25}, 0.0}, {5.25, 1.25});
  const double g0 = env.geodesic_to_goal();
  const StepResult r = env.step({0.0, env.config().f_max});
  EXPECT_NEAR(r.reward, (g0 - r.info.geodesic) - 0.01, 1e-12);
  EXPECT_NEAR(g0 - r.info.geodesic, env.config().f_max, 1e-12);
}

TEST(TexWorld, TimeoutEndsEpisode) {
  const Scene s = open_room(12, 12);
  const TexturePack pack(Split::kTrain);
  EnvConfig cfg;
  cfg.t_max = 5;
  TexWorld env(cfg);
  env.reset_to(s, pack, Pose{{1.0, 1.0}, 0.0}, {5.25, 5.25});
  for (int t = 0; t < 4; ++t) EXPECT_FALSE(env.step({0.1, 0.0}).done);
  const StepResult r = env.step({0.1, 0.0});
  EXPECT_TRUE(r.done);
  EXPECT_TRUE(r.info.timeout);
  EXPECT_EQ(env.record().size(), 6);
}

EpisodeRecord run_random(std::uint64_t seed, const Scene& s, const TexturePack& pack) {
  TexWorld env({});
  Rng rng(seed);
  env.reset(s, pack, rng);
  while (!env.done()) env.step(random_action(env.config(), rng));
  return env.take_record();
}

TEST(TexWorld, EpisodeDeterminism) {
  const Scene s = generate_scene(21, {});
  const TexturePack pack(Split::kTrain);
  const EpisodeRecord a = run_random(9, s, pack), b = run_random(9, s, pack);
  EXPECT_EQ(a.rgb, b.rgb);
  EXPECT_EQ(a.depth_mm, b.depth_mm);
  EXPECT_EQ(a.task, b.task);
  EXPECT_EQ(a.rewards, b.rewards);
  EXPECT_EQ(a.dones, b.dones);
  EXPECT_EQ(a.traveled_length, b.traveled_length);
  EXPECT_EQ(a.success, b.success);
}

TEST(TexWorld, RecordRoundTripsObservations) {
  const Scene s = generate_scene(22, {});
  const TexturePack pack(Split::kTrain);
  TexWorld env({});
  Rng rng(4);
  const Observation o = env.reset(s, pack, rng);
  EXPECT_EQ(env.record().rgb_at(0).data, o.rgb.data);
  const Image d = env.record().depth_at(0);
  for (std::size_t i = 0; i < d.data.size(); ++i) EXPECT_NEAR(d.data[i], o.depth().data[i], 5e-4);
}

TEST(TexWorld, OracleIsMonotoneAndSucceeds) {
  const TexturePack pack(Split::kTest);
  std::vector<EpisodeRecord> eps;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Scene s = generate_scene(100 + seed, {});
    TexWorld env({});
    Rng rng(seed);
    env.reset(s, pack, rng);
    double prev = env.geodesic_to_goal();
    while (!env.done()) {
      const StepResult r = env.step(oracle_action(env));
      ASSERT_LE(r.info.geodesic, prev + 1e-9) << "seed " << seed << " t " << env.t();
      prev = r.info.geodesic;
    }
    eps.push_back(env.take_record());
  }
  const Metrics m = compute_metrics(std::span<const EpisodeRecord>(eps));
  EXPECT_EQ(m.sr, 1.0);
  EXPECT_GE(m.spl, 0.9);
}

TEST(TexWorld, RandomPolicyRarelySucceeds) {
  const TexturePack pack(Split::kTrain);
  std::vector<EpisodeRecord> eps;
  for (std::uint64_t seed = 0; seed < 100; ++seed) eps.push_back(run_random(seed, generate_scene(seed % 5, {}), pack));
  EXPECT_LE(compute_metrics(std::span<const EpisodeRecord>(eps)).sr, 0.05);
}

TEST(Metrics, ClosedForms) {
  std::vector<EpisodeSummary> fail{{3.0, 5.0, false}, {2.0, 1.0, false}};
  Metrics m = compute_metrics(std::span<const EpisodeSummary>(fail));
  EXPECT_EQ(m.sr, 0.0);
  EXPECT_EQ(m.spl, 0.0);
  std::vector<EpisodeSummary> exact{{4.0, 4.0, true}};
  EXPECT_EQ(compute_metrics(std::span<const EpisodeSummary>(exact)).spl, 1.0);
  std::vector<EpisodeSummary> twice{{4.0, 8.0, true}};
  EXPECT_EQ(compute_metrics(std::span<const EpisodeSummary>(twice)).spl, 0.5);
  EXPECT_THROW(compute_metrics(std::span<const EpisodeSummary>()), std::invalid_argument);
  std::vector<EpisodeSummary> bad{{0.0, 1.0, true}};
  EXPECT_THROW(compute_metrics(std::span<const EpisodeSummary>(bad)), std::invalid_argument);
}

TEST(Metrics, SplNeverExceedsSr) {
  Rng rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<EpisodeSummary> eps(static_cast<std::size_t>(uniform_int(rng, 1, 20)));
    for (auto& e : eps) e = {uniform(rng, 0.1, 10), uniform(rng, 0, 20), bernoulli(rng, 0.5)};
    const Metrics m = compute_metrics(std::span<const EpisodeSummary>(eps));
    EXPECT_LE(m.spl, m.sr + 1e-15);
  }
}

}  // namespace
}  // namespace recore::env
