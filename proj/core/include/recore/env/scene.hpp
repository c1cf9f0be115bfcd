#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace recore::env {

struct SceneConfig {
  int width = 10;   // cells
  int height = 10;  // cells
  double cell_size = 0.5;  // meters
  // Fraction of interior cells turned into wall blocks.
  double obstacle_density = 0.12;
  int max_retries = 64;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Wall faces of a cell, indexed by the outward normal.
enum Face : int { kEast = 0, kNorth = 1, kWest = 2, kSouth = 3 };

// Occupancy grid floor plan. Cell (i, j) covers
// [i * cell_size, (i + 1) * cell_size] x [j * cell_size, (j + 1) * cell_size];
// x grows east, y grows north.
struct Scene {
  int width = 0;
  int height = 0;
  double cell_size = 0.5;
  std::vector<std::uint8_t> walls;            // width * height, 1 = wall
  std::vector<std::uint32_t> wall_materials;  // 4 faces per cell
  std::uint32_t floor_material = 0;
  std::vector<int> spawn_region;  // free cell indices
  std::vector<int> goal_region;   // free cell indices
  std::uint64_t scene_id = 0;

  int index(int i, int j) const { return j * width + i; }
  int cell_x(int idx) const { return idx % width; }
  int cell_y(int idx) const { return idx / width; }
  // Out-of-bounds cells count as walls.
  bool is_wall(int i, int j) const {
    return i < 0 || j < 0 || i >= width || j >= height || walls[static_cast<std::size_t>(index(i, j))] != 0;
  }
  bool is_free(int i, int j) const { return !is_wall(i, j); }
  Vec2 cell_center(int idx) const {
    return {(cell_x(idx) + 0.5) * cell_size, (cell_y(idx) + 0.5) * cell_size};
  }
  // Cell containing a world point, or -1 outside the grid.
  int cell_at(Vec2 p) const;
  std::uint32_t material(int idx, Face f) const { return wall_materials[static_cast<std::size_t>(idx) * 4 + f]; }
  int free_count() const;
};

// Deterministic in (seed, config). Interior wall blocks are only kept when
// free space stays 4-connected. Throws ConfigError for grids smaller than
// 6x6 and std::runtime_error (naming the seed) if generation fails.
Scene generate_scene(std::uint64_t seed, const SceneConfig& config);

// Cells reachable from `start` through 4-connected free cells.
std::vector<int> flood_fill(const Scene& scene, int start);

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

// Shortest path lengths in meters from every cell to `target`, moving
// between 8-connected free cells (diagonals only when both orthogonal
// neighbours are free). Walls and unreachable cells hold kUnreachable.
std::vector<double> geodesic_field(const Scene& scene, int target);

// Continuous geodesic distance from a point to the field's target: the best
// of |p - c| + field[c] over the containing cell and its directly reachable
// neighbours.
double geodesic_distance(const Scene& scene, const std::vector<double>& field, Vec2 p);

struct RayHit {
  bool hit = false;
  double distance = 0.0;  // Euclidean, meters
  int cell = -1;          // wall cell that was hit
  Face face = kEast;      // face of that cell facing the ray origin
  double u = 0.0;         // position along the face in [0, 1)
};

// Grid traversal (Amanatides-Woo) from `origin` along `angle`. Returns
// hit=false with distance=max_range if no wall is met within max_range.
RayHit cast_ray(const Scene& scene, Vec2 origin, double angle, double max_range);

}  // namespace recore::env
