#include "recore/env/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>

#include "recore/common/error.hpp"
#include "recore/common/rng.hpp"

namespace recore::env {

int Scene::cell_at(Vec2 p) const {
  const int i = static_cast<int>(std::floor(p.x / cell_size));
  const int j = static_cast<int>(std::floor(p.y / cell_size));
  if (i < 0 || j < 0 || i >= width || j >= height) return -1;
  return index(i, j);
}

int Scene::free_count() const {
  return static_cast<int>(std::count(walls.begin(), walls.end(), std::uint8_t{0}));
}

std::vector<int> flood_fill(const Scene& scene, int start) {
  std::vector<int> out;
  if (start < 0 || scene.is_wall(scene.cell_x(start), scene.cell_y(start))) return out;
  std::vector<std::uint8_t> seen(scene.walls.size(), 0);
  std::vector<int> stack{start};
  seen[static_cast<std::size_t>(start)] = 1;
  constexpr int di[4] = {1, -1, 0, 0};
  constexpr int dj[4] = {0, 0, 1, -1};
  while (!stack.empty()) {
    const int c = stack.back();
    stack.pop_back();
    out.push_back(c);
    for (int k = 0; k < 4; ++k) {
      const int i = scene.cell_x(c) + di[k], j = scene.cell_y(c) + dj[k];
      if (scene.is_free(i, j)) {
        const int n = scene.index(i, j);
        if (!seen[static_cast<std::size_t>(n)]) {
          seen[static_cast<std::size_t>(n)] = 1;
          stack.push_back(n);
        }
      }
    }
  }
  return out;
}

namespace {

bool free_space_connected(const Scene& s) {
  const auto it = std::find(s.walls.begin(), s.walls.end(), std::uint8_t{0});
  if (it == s.walls.end()) return false;
  const int start = static_cast<int>(it - s.walls.begin());
  return static_cast<int>(flood_fill(s, start).size()) == s.free_count();
}

bool try_generate(Rng& rng, const SceneConfig& cfg, Scene& s) {
  s.walls.assign(static_cast<std::size_t>(cfg.width) * cfg.height, 0);
  for (int i = 0; i < cfg.width; ++i) {
    s.walls[static_cast<std::size_t>(s.index(i, 0))] = 1;
    s.walls[static_cast<std::size_t>(s.index(i, cfg.height - 1))] = 1;
  }
  for (int j = 0; j < cfg.height; ++j) {
    s.walls[static_cast<std::size_t>(s.index(0, j))] = 1;
    s.walls[static_cast<std::size_t>(s.index(cfg.width - 1, j))] = 1;
  }
  const int interior = (cfg.width - 2) * (cfg.height - 2);
  const int target = static_cast<int>(std::lround(cfg.obstacle_density * interior));
  int placed = 0;
  for (int attempt = 0; attempt < 40 * std::max(target, 1) && placed < target; ++attempt) {
    const int len = static_cast<int>(uniform_int(rng, 1, 3));
    const bool horizontal = bernoulli(rng, 0.5);
    const int i0 = static_cast<int>(uniform_int(rng, 1, cfg.width - 2));
    const int j0 = static_cast<int>(uniform_int(rng, 1, cfg.height - 2));
    std::vector<int> added;
    for (int k = 0; k < len && placed + static_cast<int>(added.size()) < target; ++k) {
      const int i = horizontal ? i0 + k : i0;
      const int j = horizontal ? j0 : j0 + k;
      if (i >= cfg.width - 1 || j >= cfg.height - 1) break;
      const int idx = s.index(i, j);
      if (s.walls[static_cast<std::size_t>(idx)]) continue;
      s.walls[static_cast<std::size_t>(idx)] = 1;
      added.push_back(idx);
    }
    if (added.empty()) continue;
    if (s.free_count() < 2 || !free_space_connected(s)) {
      for (int idx : added) s.walls[static_cast<std::size_t>(idx)] = 0;
      continue;
    }
    placed += static_cast<int>(added.size());
  }
  return s.free_count() >= 2 && free_space_connected(s);
}

}  // namespace

Scene generate_scene(std::uint64_t seed, const SceneConfig& config) {
  if (config.width < 6 || config.height < 6) {
    throw ConfigError("scene size must be at least 6x6 cells, got " + std::to_string(config.width) + "x" +
                      std::to_string(config.height));
  }
  if (config.cell_size <= 0 || config.obstacle_density < 0 || config.obstacle_density >= 1) {
    throw ConfigError("invalid scene cell_size or obstacle_density");
  }
  Rng rng(derive_seed(seed, 0x5CE7E));
  Scene s;
  s.width = config.width;
  s.height = config.height;
  s.cell_size = config.cell_size;
  s.scene_id = seed;
  bool ok = false;
  for (int attempt = 0; attempt < std::max(config.max_retries, 1) && !ok; ++attempt) ok = try_generate(rng, config, s);
  if (!ok) {
    throw std::runtime_error("scene generation failed to produce connected free space for seed " +
                             std::to_string(seed));
  }

  std::array<std::uint32_t, 4> palette{};
  for (auto& m : palette) m = static_cast<std::uint32_t>(rng() >> 32);
  s.wall_materials.assign(s.walls.size() * 4, 0);
  for (std::size_t c = 0; c < s.walls.size(); ++c) {
    if (!s.walls[c]) continue;
    const auto key = palette[static_cast<std::size_t>(uniform_int(rng, 0, 3))];
    for (int f = 0; f < 4; ++f) s.wall_materials[c * 4 + static_cast<std::size_t>(f)] = key;
  }
  s.floor_material = static_cast<std::uint32_t>(rng() >> 32);
  for (int c = 0; c < static_cast<int>(s.walls.size()); ++c) {
    if (!s.walls[static_cast<std::size_t>(c)]) {
      s.spawn_region.push_back(c);
      s.goal_region.push_back(c);
    }
  }
  return s;
}

std::vector<double> geodesic_field(const Scene& scene, int target) {
  std::vector<double> dist(scene.walls.size(), kUnreachable);
  if (target < 0 || scene.is_wall(scene.cell_x(target), scene.cell_y(target))) return dist;
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[static_cast<std::size_t>(target)] = 0.0;
  pq.emplace(0.0, target);
  const double diag = std::sqrt(2.0) * scene.cell_size;
  while (!pq.empty()) {
    const auto [d, c] = pq.top();
    pq.pop();
    if (d > dist[static_cast<std::size_t>(c)]) continue;
    const int ci = scene.cell_x(c), cj = scene.cell_y(c);
    for (int dj = -1; dj <= 1; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        if (!di && !dj) continue;
        const int i = ci + di, j = cj + dj;
        if (scene.is_wall(i, j)) continue;
        if (di && dj && (scene.is_wall(ci + di, cj) || scene.is_wall(ci, cj + dj))) continue;
        const double nd = d + ((di && dj) ? diag : scene.cell_size);
        const int n = scene.index(i, j);
        if (nd < dist[static_cast<std::size_t>(n)]) {
          dist[static_cast<std::size_t>(n)] = nd;
          pq.emplace(nd, n);
        }
      }
    }
  }
  return dist;
}

double geodesic_distance(const Scene& scene, const std::vector<double>& field, Vec2 p) {
  const int c = scene.cell_at(p);
  if (c < 0) return kUnreachable;
  const int ci = scene.cell_x(c), cj = scene.cell_y(c);
  double best = kUnreachable;
  for (int dj = -1; dj <= 1; ++dj) {
    for (int di = -1; di <= 1; ++di) {
      const int i = ci + di, j = cj + dj;
      if (scene.is_wall(i, j)) continue;
      if (di && dj && (scene.is_wall(ci + di, cj) || scene.is_wall(ci, cj + dj))) continue;
      const int n = scene.index(i, j);
      const double f = field[static_cast<std::size_t>(n)];
      if (f == kUnreachable) continue;
      const Vec2 q = scene.cell_center(n);
      best = std::min(best, std::hypot(p.x - q.x, p.y - q.y) + f);
    }
  }
  return best;
}

RayHit cast_ray(const Scene& scene, Vec2 origin, double angle, double max_range) {
  const double cs = scene.cell_size;
  const double ox = origin.x / cs, oy = origin.y / cs;
  const double dx = std::cos(angle), dy = std::sin(angle);
  int i = static_cast<int>(std::floor(ox));
  int j = static_cast<int>(std::floor(oy));
  RayHit hit;
  if (scene.is_wall(i, j)) {
    hit.hit = true;
    hit.cell = i >= 0 && j >= 0 && i < scene.width && j < scene.height ? scene.index(i, j) : -1;
    return hit;
  }
  const double inf = std::numeric_limits<double>::infinity();
  const int step_x = dx > 0 ? 1 : -1;
  const int step_y = dy > 0 ? 1 : -1;
  double t_max_x = dx > 0 ? (i + 1 - ox) / dx : (dx < 0 ? (ox - i) / -dx : inf);
  double t_max_y = dy > 0 ? (j + 1 - oy) / dy : (dy < 0 ? (oy - j) / -dy : inf);
  const double t_delta_x = dx != 0 ? 1.0 / std::abs(dx) : inf;
  const double t_delta_y = dy != 0 ? 1.0 / std::abs(dy) : inf;
  const double t_limit = max_range / cs;

  while (true) {
    double t;
    bool x_side;
    if (t_max_x < t_max_y) {
      t = t_max_x;
      i += step_x;
      t_max_x += t_delta_x;
      x_side = true;
    } else {
      t = t_max_y;
      j += step_y;
      t_max_y += t_delta_y;
      x_side = false;
    }
    if (t > t_limit) break;
    if (!scene.is_wall(i, j)) continue;
    hit.hit = true;
    hit.distance = t * cs;
    hit.cell = (i >= 0 && j >= 0 && i < scene.width && j < scene.height) ? scene.index(i, j) : -1;
    const double hx = ox + t * dx, hy = oy + t * dy;
    if (x_side) {
      hit.face = step_x > 0 ? kWest : kEast;
      hit.u = hy - std::floor(hy);
    } else {
      hit.face = step_y > 0 ? kSouth : kNorth;
      hit.u = hx - std::floor(hx);
    }
    return hit;
  }
  hit.distance = max_range;
  return hit;
}

}  // namespace recore::env
