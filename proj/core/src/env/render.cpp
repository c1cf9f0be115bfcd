#include "recore/env/render.hpp"

#include <algorithm>
#include <cmath>

namespace recore::env {

namespace {

float quantize(double v) { return static_cast<float>(std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0); }

int texel_index(double f) { return std::clamp(static_cast<int>(std::floor(f * kTileSize)), 0, kTileSize - 1); }

double frac(double x) { return x - std::floor(x); }

}  // namespace

double column_angle(const RenderConfig& cfg, double theta, int c) {
  return theta - cfg.fov * (c - cfg.width / 2) / cfg.width;
}

Frame render(const Pose& pose, const Scene& scene, const TexturePack& pack, const RenderConfig& cfg) {
  const int H = cfg.height, W = cfg.width;
  Frame f{Image(3, H, W), Image(1, H, W)};
  const double focal = (W / 2.0) / std::tan(cfg.fov / 2);
  const Tile& floor_tile = pack.resolve(scene.floor_material);

  for (int c = 0; c < W; ++c) {
    const double angle = column_angle(cfg, pose.theta, c);
    const double rel = angle - pose.theta;
    const double cos_rel = std::cos(rel);
    const RayHit hit = cast_ray(scene, pose.pos, angle, cfg.max_range);
    const double dist = std::min(hit.distance, cfg.max_range);
    for (int r = 0; r < H; ++r) f.depth.at(0, r, c) = static_cast<float>(dist);

    const double perp = std::max(dist * cos_rel, 1e-6);
    const double top = hit.hit ? focal * (cfg.wall_height - cfg.eye_height) / perp : 0.0;
    const double bottom = hit.hit ? -focal * cfg.eye_height / perp : 0.0;
    const Tile* wall_tile = hit.hit && hit.cell >= 0 ? &pack.resolve(scene.material(hit.cell, hit.face)) : nullptr;
    const double wall_shade = 1.0 / (1.0 + dist);

    for (int r = 0; r < H; ++r) {
      const double dy = H / 2.0 - (r + 0.5);  // up is positive
      std::array<double, 3> px{};
      if (hit.hit && dy <= top && dy >= bottom) {
        const double z = cfg.eye_height + dy * perp / focal;
        const float* t = wall_tile ? wall_tile->texel(texel_index(hit.u), texel_index(frac(z / scene.cell_size)))
                                   : floor_tile.texel(0, 0);
        for (int k = 0; k < 3; ++k) px[k] = t[k] * wall_shade;
      } else if (dy < 0) {
        const double along = cfg.eye_height * focal / (-dy) / cos_rel;
        const double wx = pose.pos.x + along * std::cos(angle);
        const double wy = pose.pos.y + along * std::sin(angle);
        const float* t = floor_tile.texel(texel_index(frac(wx / scene.cell_size)), texel_index(frac(wy / scene.cell_size)));
        const double shade = 1.0 / (1.0 + along);
        for (int k = 0; k < 3; ++k) px[k] = t[k] * shade;
      } else {
        for (int k = 0; k < 3; ++k) px[k] = cfg.ceiling[static_cast<std::size_t>(k)];
      }
      for (int k = 0; k < 3; ++k) f.rgb.at(k, r, c) = quantize(px[static_cast<std::size_t>(k)]);
    }
  }
  return f;
}

}  // namespace recore::env
