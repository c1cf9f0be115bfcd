#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace recore::env {

inline constexpr int kTileSize = 16;

enum class Split { kTrain, kTest };

const char* to_string(Split s);

// Procedural material families. Every family has kIdsPerFamily texture ids,
// some of which are reserved for the test split.
enum class Family : int { kStripes, kChecker, kNoise, kGradient, kDots, kBricks, kWaves, kPlaid, kCount };

inline constexpr int kNumFamilies = static_cast<int>(Family::kCount);
inline constexpr int kIdsPerFamily = 8;

const char* family_name(Family f);
// Held-out ids (2 or 3 per family).
const std::vector<int>& held_out_ids(Family f);

struct TextureId {
  Family family;
  int id;
  friend bool operator==(const TextureId&, const TextureId&) = default;
};

// 16x16 RGB tile, interleaved, values in [0, 1].
struct Tile {
  TextureId tex;
  std::array<float, kTileSize * kTileSize * 3> rgb{};

  const float* texel(int u, int v) const { return &rgb[(static_cast<std::size_t>(v) * kTileSize + u) * 3]; }
};

// Deterministic tile for a (family, id) pair.
Tile make_tile(TextureId tex);

// Textures of one split, grouped by family.
class TexturePack {
 public:
  explicit TexturePack(Split split);

  Split split() const { return split_; }
  std::size_t size() const;
  const std::vector<Tile>& family(Family f) const { return by_family_[static_cast<std::size_t>(f)]; }
  // Scenes store opaque material keys; the pack maps a key to one of its
  // own tiles: family = key mod families, member = (key / families) mod count.
  const Tile& resolve(std::uint32_t material_key) const;
  std::vector<TextureId> ids() const;

 private:
  Split split_;
  std::array<std::vector<Tile>, kNumFamilies> by_family_;
};

}  // namespace recore::env
