#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace recore {

// Planar (CHW) float image.
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height + y) * width + x;
  }
  float& at(int c, int y, int x) { return data[index(c, y, x)]; }
  float at(int c, int y, int x) const { return data[index(c, y, x)]; }
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  bool same_shape(const Image& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  float mean() const;

  friend bool operator==(const Image&, const Image&) = default;
};

// Binary PPM (P6) from a 3-channel image in [0, 1].
void write_ppm(const std::filesystem::path& path, const Image& rgb);
// Binary 16-bit PGM (P5) of a 1-channel depth image in meters, stored as millimeters.
void write_depth_pgm(const std::filesystem::path& path, const Image& depth);
Image read_ppm(const std::filesystem::path& path);
Image read_depth_pgm(const std::filesystem::path& path);

}  // namespace recore
