#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "recore/common/image.hpp"

namespace recore {

float Image::mean() const {
  if (data.empty()) return 0.0f;
  const double s = std::accumulate(data.begin(), data.end(), 0.0);
  return static_cast<float>(s / static_cast<double>(data.size()));
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

// Reads "P?\n<w> <h>\n<maxval>\n" skipping '#' comments.
void read_header(std::ifstream& in, const std::string& magic, int& w, int& h, int& maxval,
                 const std::filesystem::path& path) {
  std::string m;
  in >> m;
  if (m != magic) throw std::runtime_error(path.string() + ": expected " + magic + " header");
  auto next_int = [&]() {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
      in >> std::ws;
    }
    int v = 0;
    in >> v;
    return v;
  };
  w = next_int();
  h = next_int();
  maxval = next_int();
  in.get();
  if (!in || w <= 0 || h <= 0) throw std::runtime_error(path.string() + ": malformed header");
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Image& rgb) {
  if (rgb.channels != 3) throw std::invalid_argument("write_ppm needs a 3-channel image");
  auto out = open_out(path);
  out << "P6\n" << rgb.width << ' ' << rgb.height << "\n255\n";
  std::string row;
  for (int y = 0; y < rgb.height; ++y) {
    for (int x = 0; x < rgb.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(rgb.at(c, y, x), 0.0f, 1.0f);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f))));
      }
    }
  }
}

void write_depth_pgm(const std::filesystem::path& path, const Image& depth) {
  if (depth.channels != 1) throw std::invalid_argument("write_depth_pgm needs a 1-channel image");
  auto out = open_out(path);
  out << "P5\n" << depth.width << ' ' << depth.height << "\n65535\n";
  for (float d : depth.data) {
    const auto mm = static_cast<std::uint16_t>(std::clamp(std::lround(static_cast<double>(d) * 1000.0), 0L, 65535L));
    out.put(static_cast<char>(mm >> 8));
    out.put(static_cast<char>(mm & 0xFF));
  }
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  int w, h, maxval;
  read_header(in, "P6", w, h, maxval, path);
  Image img(3, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(static_cast<unsigned char>(in.get())) / maxval;
    }
  }
  if (!in) throw std::runtime_error(path.string() + ": truncated pixel data");
  return img;
}

Image read_depth_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  int w, h, maxval;
  read_header(in, "P5", w, h, maxval, path);
  if (maxval < 256) throw std::runtime_error(path.string() + ": expected a 16-bit PGM");
  Image img(1, h, w);
  for (auto& v : img.data) {
    const int hi = in.get();
    const int lo = in.get();
    v = static_cast<float>((hi << 8) | lo) / 1000.0f;
  }
  if (!in) throw std::runtime_error(path.string() + ": truncated pixel data");
  return img;
}

}  // namespace recore
