#include "recore/env/texture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "recore/common/rng.hpp"

namespace recore::env {

const char* to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

const char* family_name(Family f) {
  switch (f) {
    case Family::kStripes: return "stripes";
    case Family::kChecker: return "checker";
    case Family::kNoise: return "noise";
    case Family::kGradient: return "gradient";
    case Family::kDots: return "dots";
    case Family::kBricks: return "bricks";
    case Family::kWaves: return "waves";
    case Family::kPlaid: return "plaid";
    case Family::kCount: break;
  }
  return "?";
}

const std::vector<int>& held_out_ids(Family f) {
  static const std::array<std::vector<int>, kNumFamilies> table = {{
      {1, 5},     // stripes
      {2, 6},     // checker
      {0, 3, 7},  // noise
      {4, 6},     // gradient
      {1, 2, 7},  // dots
      {3, 5},     // bricks
      {0, 6},     // waves
      {2, 4, 5},  // plaid
  }};
  return table.at(static_cast<std::size_t>(f));
}

namespace {

using Rgb = std::array<float, 3>;

Rgb hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double i = std::floor(h * 6.0);
  const double f = h * 6.0 - i;
  const double p = v * (1 - s), q = v * (1 - f * s), t = v * (1 - (1 - f) * s);
  double r, g, b;
  switch (static_cast<int>(i) % 6) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
  return {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
}

Rgb mix(const Rgb& a, const Rgb& b, double t) {
  Rgb out;
  for (int c = 0; c < 3; ++c) out[c] = static_cast<float>(a[c] * (1 - t) + b[c] * t);
  return out;
}

}  // namespace

Tile make_tile(TextureId tex) {
  if (tex.id < 0 || tex.id >= kIdsPerFamily) throw std::out_of_range("texture id out of range");
  Rng rng(derive_seed(0x7E37u + static_cast<std::uint64_t>(tex.family) * 131, static_cast<std::uint64_t>(tex.id)));
  const double hue = uniform01(rng);
  const Rgb c1 = hsv_to_rgb(hue, uniform(rng, 0.35, 0.9), uniform(rng, 0.45, 0.95));
  const Rgb c2 = hsv_to_rgb(hue + uniform(rng, 0.25, 0.75), uniform(rng, 0.3, 0.9), uniform(rng, 0.2, 0.7));
  const double angle = std::numbers::pi * 0.25 * static_cast<double>(uniform_int(rng, 0, 3));
  const double period = static_cast<double>(uniform_int(rng, 3, 8));
  const int cell = static_cast<int>(uniform_int(rng, 2, 8));

  Tile tile{tex, {}};
  constexpr int n = kTileSize;
  std::array<double, n * n> noise{};
  for (auto& v : noise) v = uniform01(rng);

  for (int v = 0; v < n; ++v) {
    for (int u = 0; u < n; ++u) {
      const double proj = u * std::cos(angle) + v * std::sin(angle);
      Rgb px{};
      switch (tex.family) {
        case Family::kStripes: {
          const double t = proj / period - std::floor(proj / period);
          px = t < 0.5 ? c1 : c2;
          break;
        }
        case Family::kChecker:
          px = ((u / cell + v / cell) % 2 == 0) ? c1 : c2;
          break;
        case Family::kNoise: {
          // Box-smoothed white noise.
          double acc = 0;
          for (int dv = -1; dv <= 1; ++dv) {
            for (int du = -1; du <= 1; ++du) acc += noise[((v + dv + n) % n) * n + (u + du + n) % n];
          }
          px = mix(c1, c2, std::clamp((acc / 9.0 - 0.5) * 2.5 + 0.5, 0.0, 1.0));
          break;
        }
        case Family::kGradient:
          px = mix(c1, c2, std::clamp((proj + n) / (3.0 * n), 0.0, 1.0));
          break;
        case Family::kDots: {
          const double cu = std::fmod(u + 0.5, period) - period / 2;
          const double cv = std::fmod(v + 0.5, period) - period / 2;
          px = (cu * cu + cv * cv) < (period * period * 0.12) ? c2 : c1;
          break;
        }
        case Family::kBricks: {
          const int row = v / 4;
          const int shift = (row % 2) * 4;
          const bool mortar = (v % 4 == 3) || ((u + shift) % 8 == 7);
          px = mortar ? mix(c2, Rgb{0.9f, 0.9f, 0.9f}, 0.5) : c1;
          break;
        }
        case Family::kWaves: {
          const double t = 0.5 + 0.5 * std::sin(2 * std::numbers::pi * (u / period + 0.3 * std::sin(2 * std::numbers::pi * v / n)));
          px = mix(c1, c2, t);
          break;
        }
        case Family::kPlaid: {
          const bool hs = (v % cell) < cell / 2;
          const bool vs = (u % cell) < cell / 2;
          px = hs && vs ? mix(c1, c2, 0.5) : (hs ? c1 : (vs ? c2 : mix(c1, Rgb{1, 1, 1}, 0.4)));
          break;
        }
        case Family::kCount: break;
      }
      for (int c = 0; c < 3; ++c) tile.rgb[(static_cast<std::size_t>(v) * n + u) * 3 + c] = std::clamp(px[c], 0.0f, 1.0f);
    }
  }
  return tile;
}

TexturePack::TexturePack(Split split) : split_(split) {
  for (int f = 0; f < kNumFamilies; ++f) {
    const auto fam = static_cast<Family>(f);
    const auto& held = held_out_ids(fam);
    for (int id = 0; id < kIdsPerFamily; ++id) {
      const bool is_test = std::find(held.begin(), held.end(), id) != held.end();
      if (is_test == (split == Split::kTest)) by_family_[static_cast<std::size_t>(f)].push_back(make_tile({fam, id}));
    }
    if (by_family_[static_cast<std::size_t>(f)].empty()) throw std::logic_error("empty texture family in pack");
  }
}

std::size_t TexturePack::size() const {
  std::size_t n = 0;
  for (const auto& f : by_family_) n += f.size();
  return n;
}

const Tile& TexturePack::resolve(std::uint32_t material_key) const {
  const auto& fam = by_family_[material_key % kNumFamilies];
  return fam[(material_key / kNumFamilies) % fam.size()];
}

std::vector<TextureId> TexturePack::ids() const {
  std::vector<TextureId> out;
  for (const auto& f : by_family_) {
    for (const auto& t : f) out.push_back(t.tex);
  }
  return out;
}

}  // namespace recore::env
