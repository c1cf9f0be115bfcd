#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "recore/common/image.hpp"
#include "recore/common/instrumentation.hpp"
#include "recore/common/rng.hpp"
#include "recore/env/render.hpp"
#include "recore/env/scene.hpp"
#include "recore/env/texture.hpp"

namespace recore::env {

inline constexpr int kTaskDim = 8;
using TaskVector = std::array<float, kTaskDim>;

struct EnvConfig {
  SceneConfig scene;
  RenderConfig render;
  double r_max = std::numbers::pi / 2;  // radians per step
  double f_max = 0.10;                  // meters per step
  double success_radius = 0.36;
  double r_success = 10.0;
  double k_prog = 1.0;
  double k_time = 0.01;
  int t_max = 200;
  double d_min = 2.0;  // minimum spawn-goal geodesic distance, meters
  double contact_eps = 0.01;
  // Keep compressed observations in the episode record. Evaluation turns
  // this off so it never touches depth.
  bool record_observations = true;
};

struct Action {
  double rotation = 0.0;
  double forward = 0.0;
};

class Observation {
 public:
  Image rgb;
  // (goal_x, goal_y, pos_x, pos_y, cos, sin, linear_velocity, angular_velocity);
  // positions map the scene extent onto [-1, 1].
  TaskVector task{};

  Observation() = default;
  Observation(Image rgb_img, Image depth_img, TaskVector t)
      : rgb(std::move(rgb_img)), task(t), depth_(std::move(depth_img)) {}

  // Ground truth depth; every read is counted.
  const Image& depth() const {
    instrumentation::count_depth_read();
    return depth_;
  }

 private:
  Image depth_;
};

// Per-step storage in the layout the world model consumes: entry t holds the
// observation at t, the action that led to it and the reward it produced.
// Entry 0 has a zero action and zero reward. Images are stored as 8-bit RGB
// and 16-bit millimeter depth.
struct EpisodeRecord {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;
  std::vector<std::uint16_t> depth_mm;
  std::vector<TaskVector> task;
  std::vector<Action> actions;
  std::vector<float> rewards;
  std::vector<std::uint8_t> dones;
  double shortest_path_length = 0.0;
  double traveled_length = 0.0;
  bool success = false;
  std::uint64_t scene_id = 0;

  // Number of stored entries (steps + 1).
  int size() const { return static_cast<int>(actions.size()); }
  bool has_observations() const { return !rgb.empty(); }
  Image rgb_at(int t) const;
  Image depth_at(int t) const;
};

struct EpisodeSummary {
  double shortest_path_length = 0.0;
  double traveled_length = 0.0;
  bool success = false;
};

struct Metrics {
  double sr = 0.0;
  double spl = 0.0;
};

// SR = mean success; SPL = mean of success * l / max(p, l).
Metrics compute_metrics(std::span<const EpisodeSummary> episodes);
Metrics compute_metrics(std::span<const EpisodeRecord> episodes);

struct StepInfo {
  bool success = false;
  bool collided = false;
  bool timeout = false;
  double displacement = 0.0;
  double geodesic = 0.0;
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

class TexWorld {
 public:
  explicit TexWorld(EnvConfig cfg);

  const EnvConfig& config() const { return cfg_; }

  // Samples spawn and goal with geodesic distance >= d_min and a uniform
  // heading. `pack` must outlive the episode.
  Observation reset(const Scene& scene, const TexturePack& pack, Rng& rng);
  // Deterministic start for tests and tools.
  Observation reset_to(const Scene& scene, const TexturePack& pack, Pose start, Vec2 goal);
  StepResult step(Action action);

  const Pose& pose() const { return pose_; }
  Vec2 goal() const { return goal_; }
  bool done() const { return done_; }
  int t() const { return t_; }
  const Scene& scene() const { return scene_; }
  const std::vector<double>& field() const { return field_; }
  double geodesic_to_goal() const;
  const EpisodeRecord& record() const { return record_; }
  EpisodeRecord take_record();

 private:
  TaskVector task_vector(const Action& last) const;
  // Renders the current pose, appends it to the record and returns it.
  Observation emit(const Action& last, double reward, bool done);

  EnvConfig cfg_;
  Scene scene_;
  const TexturePack* pack_ = nullptr;
  std::vector<double> field_;
  Pose pose_;
  Vec2 goal_;
  double geodesic_ = 0.0;
  int t_ = 0;
  bool done_ = true;
  EpisodeRecord record_;
};

// Greedy geodesic follower: turns toward the best reachable neighbour cell
// (or the goal once in its cell) and moves when roughly aligned.
Action oracle_action(const TexWorld& env);

// Uniform in the action box.
Action random_action(const EnvConfig& cfg, Rng& rng);

}  // namespace recore::env
