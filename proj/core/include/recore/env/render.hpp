#pragma once

#include <array>
#include <numbers>

#include "recore/common/image.hpp"
#include "recore/env/scene.hpp"
#include "recore/env/texture.hpp"

namespace recore::env {

struct Pose {
  Vec2 pos;
  double theta = 0.0;  // radians, counter-clockwise from +x
};

struct RenderConfig {
  int height = 48;
  int width = 64;
  double fov = std::numbers::pi / 2;  // horizontal
  double max_range = 10.0;            // meters
  double wall_height = 1.0;           // meters
  double eye_height = 0.5;            // meters
  std::array<float, 3> ceiling{0.82f, 0.84f, 0.88f};
};

struct Frame {
  Image rgb;    // 3 x H x W, multiples of 1/255 in [0, 1]
  Image depth;  // 1 x H x W, meters in [0, max_range]
};

// Angle of image column c. Column W/2 looks exactly along theta; columns to
// the left look counter-clockwise.
double column_angle(const RenderConfig& cfg, double theta, int c);

// Column ray cast. Depth is the Euclidean distance along each column's ray,
// the same for every row of that column, and never depends on the pack.
Frame render(const Pose& pose, const Scene& scene, const TexturePack& pack, const RenderConfig& cfg);

}  // namespace recore::env
