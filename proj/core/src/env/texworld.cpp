#include "recore/env/texworld.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "recore/common/error.hpp"

namespace recore::env {

namespace {

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Closest approach of segment [a, b] to point p.
double segment_distance(Vec2 a, Vec2 b, Vec2 p) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance({a.x + t * vx, a.y + t * vy}, p);
}

}  // namespace

Image EpisodeRecord::rgb_at(int t) const {
  Image img(3, height, width);
  const std::size_t n = img.data.size();
  const std::uint8_t* src = rgb.data() + static_cast<std::size_t>(t) * n;
  for (std::size_t i = 0; i < n; ++i) img.data[i] = static_cast<float>(src[i]) / 255.0f;
  return img;
}

Image EpisodeRecord::depth_at(int t) const {
  Image img(1, height, width);
  const std::size_t n = img.data.size();
  const std::uint16_t* src = depth_mm.data() + static_cast<std::size_t>(t) * n;
  for (std::size_t i = 0; i < n; ++i) img.data[i] = static_cast<float>(src[i]) * 1e-3f;
  return img;
}

Metrics compute_metrics(std::span<const EpisodeSummary> episodes) {
  if (episodes.empty()) throw std::invalid_argument("compute_metrics: empty episode list");
  double sr = 0.0, spl = 0.0;
  for (const auto& e : episodes) {
    if (!(e.shortest_path_length > 0)) throw std::invalid_argument("compute_metrics: shortest_path_length must be > 0");
    if (e.success) {
      sr += 1.0;
      spl += e.shortest_path_length / std::max(e.traveled_length, e.shortest_path_length);
    }
  }
  const auto n = static_cast<double>(episodes.size());
  return {sr / n, spl / n};
}

Metrics compute_metrics(std::span<const EpisodeRecord> episodes) {
  std::vector<EpisodeSummary> s;
  s.reserve(episodes.size());
  for (const auto& e : episodes) s.push_back({e.shortest_path_length, e.traveled_length, e.success});
  return compute_metrics(std::span<const EpisodeSummary>(s));
}

TexWorld::TexWorld(EnvConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.r_max < 0 || cfg_.f_max < 0 || cfg_.t_max < 1 || cfg_.success_radius <= 0) {
    throw ConfigError("invalid environment config");
  }
}

double TexWorld::geodesic_to_goal() const { return geodesic_distance(scene_, field_, pose_.pos); }

TaskVector TexWorld::task_vector(const Action& last) const {
  const double ex = scene_.width * scene_.cell_size, ey = scene_.height * scene_.cell_size;
  return {static_cast<float>(2.0 * goal_.x / ex - 1.0),       static_cast<float>(2.0 * goal_.y / ey - 1.0),
          static_cast<float>(2.0 * pose_.pos.x / ex - 1.0),   static_cast<float>(2.0 * pose_.pos.y / ey - 1.0),
          static_cast<float>(std::cos(pose_.theta)),          static_cast<float>(std::sin(pose_.theta)),
          static_cast<float>(last.forward),                   static_cast<float>(last.rotation)};
}

Observation TexWorld::emit(const Action& last, double reward, bool done) {
  Frame f = render(pose_, scene_, *pack_, cfg_.render);
  const TaskVector task = task_vector(last);
  if (cfg_.record_observations) {
    for (float v : f.rgb.data) record_.rgb.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
    for (float v : f.depth.data) {
      record_.depth_mm.push_back(static_cast<std::uint16_t>(std::clamp(std::lround(v * 1000.0f), 0L, 65535L)));
    }
  }
  record_.task.push_back(task);
  record_.actions.push_back(last);
  record_.rewards.push_back(static_cast<float>(reward));
  record_.dones.push_back(done ? 1 : 0);
  return Observation(std::move(f.rgb), std::move(f.depth), task);
}

Observation TexWorld::reset(const Scene& scene, const TexturePack& pack, Rng& rng) {
  if (scene.spawn_region.empty() || scene.goal_region.empty()) throw StateError("scene has no spawn or goal cells");
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const int goal_cell = scene.goal_region[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<std::int64_t>(scene.goal_region.size()) - 1))];
    const int spawn_cell = scene.spawn_region[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<std::int64_t>(scene.spawn_region.size()) - 1))];
    const double theta = uniform(rng, -std::numbers::pi, std::numbers::pi);
    const auto field = geodesic_field(scene, goal_cell);
    const double d = field[static_cast<std::size_t>(spawn_cell)];
    if (d == kUnreachable || d < cfg_.d_min) continue;
    return reset_to(scene, pack, Pose{scene.cell_center(spawn_cell), theta}, scene.cell_center(goal_cell));
  }
  throw StateError("no spawn/goal pair at least " + std::to_string(cfg_.d_min) + " m apart in scene " +
                   std::to_string(scene.scene_id));
}

Observation TexWorld::reset_to(const Scene& scene, const TexturePack& pack, Pose start, Vec2 goal) {
  scene_ = scene;
  pack_ = &pack;
  const int goal_cell = scene_.cell_at(goal);
  const int start_cell = scene_.cell_at(start.pos);
  if (goal_cell < 0 || start_cell < 0 || scene_.walls[static_cast<std::size_t>(goal_cell)] ||
      scene_.walls[static_cast<std::size_t>(start_cell)]) {
    throw StateError("start and goal must lie in free cells");
  }
  field_ = geodesic_field(scene_, goal_cell);
  pose_ = start;
  goal_ = goal;
  geodesic_ = geodesic_to_goal();
  if (geodesic_ == kUnreachable) throw StateError("goal unreachable from start");
  t_ = 0;
  done_ = false;
  record_ = EpisodeRecord{};
  record_.height = cfg_.render.height;
  record_.width = cfg_.render.width;
  record_.shortest_path_length = geodesic_;
  record_.scene_id = scene_.scene_id;
  return emit(Action{}, 0.0, false);
}

StepResult TexWorld::step(Action action) {
  if (done_) throw StateError("step called on a finished episode; call reset first");
  action.rotation = std::clamp(action.rotation, -cfg_.r_max, cfg_.r_max);
  action.forward = std::clamp(action.forward, 0.0, cfg_.f_max);

  StepInfo info;
  const Vec2 before = pose_.pos;
  if (action.rotation != 0.0) pose_.theta = wrap_angle(pose_.theta + action.rotation);
  double move = action.forward;
  if (move > 0) {
    const RayHit hit = cast_ray(scene_, pose_.pos, pose_.theta, move + cfg_.contact_eps + 1.0);
    if (hit.hit && hit.distance - cfg_.contact_eps < move) {
      move = std::max(0.0, hit.distance - cfg_.contact_eps);
      info.collided = true;
    }
    pose_.pos = {pose_.pos.x + move * std::cos(pose_.theta), pose_.pos.y + move * std::sin(pose_.theta)};
  }
  info.displacement = move;
  record_.traveled_length += move;
  ++t_;

  const double prev = geodesic_;
  geodesic_ = geodesic_to_goal();
  info.geodesic = geodesic_;
  info.success = segment_distance(before, pose_.pos, goal_) <= cfg_.success_radius;
  info.timeout = !info.success && t_ >= cfg_.t_max;
  double reward = cfg_.k_prog * (prev - geodesic_) - cfg_.k_time;
  if (info.success) reward += cfg_.r_success;
  done_ = info.success || info.timeout;
  if (info.success) record_.success = true;

  StepResult r;
  r.obs = emit(action, reward, done_);
  r.reward = reward;
  r.done = done_;
  r.info = info;
  return r;
}

EpisodeRecord TexWorld::take_record() {
  EpisodeRecord out = std::move(record_);
  record_ = EpisodeRecord{};
  return out;
}

Action oracle_action(const TexWorld& env) {
  const Scene& s = env.scene();
  const auto& field = env.field();
  const Pose& pose = env.pose();
  const Vec2 goal = env.goal();
  Vec2 target = goal;
  const int cell = s.cell_at(pose.pos);
  if (cell != s.cell_at(goal)) {
    const int ci = s.cell_x(cell), cj = s.cell_y(cell);
    double best = kUnreachable;
    for (int dj = -1; dj <= 1; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        const int i = ci + di, j = cj + dj;
        if ((!di && !dj) || s.is_wall(i, j)) continue;
        if (di && dj && (s.is_wall(ci + di, cj) || s.is_wall(ci, cj + dj))) continue;
        const int n = s.index(i, j);
        const Vec2 c = s.cell_center(n);
        const double v = distance(pose.pos, c) + field[static_cast<std::size_t>(n)];
        if (v < best - 1e-12) {
          best = v;
          target = c;
        }
      }
    }
  }
  const auto& cfg = env.config();
  const double dist = distance(pose.pos, target);
  if (dist < 1e-9) return {};
  const double diff = wrap_angle(std::atan2(target.y - pose.pos.y, target.x - pose.pos.x) - pose.theta);
  Action a;
  a.rotation = std::clamp(diff, -cfg.r_max, cfg.r_max);
  if (std::abs(diff - a.rotation) < 0.05) a.forward = std::min(cfg.f_max, dist);
  return a;
}

Action random_action(const EnvConfig& cfg, Rng& rng) {
  Action a;
  a.rotation = uniform(rng, -cfg.r_max, cfg.r_max);
  a.forward = uniform(rng, 0.0, cfg.f_max);
  return a;
}

}  // namespace recore::env
