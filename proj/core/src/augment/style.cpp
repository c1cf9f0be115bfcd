#include "recore/augment/style.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "recore/common/error.hpp"
#include "recore/common/instrumentation.hpp"

namespace recore::aug {

namespace {

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

// Mirror index into [0, n) without repeating the edge sample.
int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0 ? d / mx : 0.0;
  if (d <= 0) {
    h = 0;
    return;
  }
  if (mx == r) {
    h = (g - b) / d;
  } else if (mx == g) {
    h = 2.0 + (b - r) / d;
  } else {
    h = 4.0 + (r - g) / d;
  }
  h /= 6.0;
  h -= std::floor(h);
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  h = (h - std::floor(h)) * 6.0;
  const int i = static_cast<int>(std::floor(h)) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("augment config: " + what);
}

}  // namespace

void AugmentConfig::validate(int height, int width) const {
  require(height > 0 && width > 0, "image extents must be positive");
  require(pad_range >= 0 && pad_range < std::min(height, width), "pad_range must be in [0, min(H, W))");
  require(hue_delta >= 0 && hue_delta <= 0.5, "hue_delta must be in [0, 0.5]");
  require(brightness_delta >= 0 && contrast_delta >= 0 && saturation_delta >= 0, "deltas must be >= 0");
  require(blur_sigma_min > 0 && blur_sigma_min <= blur_sigma_max, "need 0 < blur_sigma_min <= blur_sigma_max");
  require(cutout_min >= 1 && cutout_min <= cutout_max, "need 1 <= cutout_min <= cutout_max");
  require(cutout_max <= std::min(height, width),
          "cutout_max " + std::to_string(cutout_max) + " exceeds image side " + std::to_string(std::min(height, width)));
  for (double p : {p_jitter, p_color, p_gray, p_blur, p_cutout}) require(p >= 0 && p <= 1, "probabilities must be in [0, 1]");
}

StyleAugmenter::StyleAugmenter(AugmentConfig cfg, int height, int width)
    : cfg_(std::move(cfg)), height_(height), width_(width) {
  cfg_.validate(height_, width_);
}

ViewParams StyleAugmenter::sample(Rng& rng) const {
  // Every field is drawn unconditionally so the stream consumption is fixed.
  ViewParams p;
  const int pad = cfg_.pad_range;
  p.jitter = bernoulli(rng, cfg_.p_jitter) && pad > 0;
  const int cy = static_cast<int>(uniform_int(rng, 0, 2 * pad));
  const int cx = static_cast<int>(uniform_int(rng, 0, 2 * pad));
  p.crop_y = p.jitter ? cy : pad;
  p.crop_x = p.jitter ? cx : pad;

  p.color = bernoulli(rng, cfg_.p_color);
  const double b = uniform(rng, std::max(0.0, 1 - cfg_.brightness_delta), 1 + cfg_.brightness_delta);
  const double c = uniform(rng, std::max(0.0, 1 - cfg_.contrast_delta), 1 + cfg_.contrast_delta);
  const double s = uniform(rng, std::max(0.0, 1 - cfg_.saturation_delta), 1 + cfg_.saturation_delta);
  const double h = uniform(rng, -cfg_.hue_delta, cfg_.hue_delta);
  if (p.color) {
    p.brightness = b;
    p.contrast = c;
    p.saturation = s;
    p.hue = h;
  }

  p.gray = bernoulli(rng, cfg_.p_gray);
  p.blur = bernoulli(rng, cfg_.p_blur);
  const double sigma = uniform(rng, cfg_.blur_sigma_min, cfg_.blur_sigma_max);
  p.sigma = p.blur ? sigma : 0.0;

  p.cutout = bernoulli(rng, cfg_.p_cutout);
  const int ch = static_cast<int>(uniform_int(rng, cfg_.cutout_min, cfg_.cutout_max));
  const int cw = static_cast<int>(uniform_int(rng, cfg_.cutout_min, cfg_.cutout_max));
  const int y = static_cast<int>(uniform_int(rng, 0, height_ - ch));
  const int x = static_cast<int>(uniform_int(rng, 0, width_ - cw));
  if (p.cutout) {
    p.cut_h = ch;
    p.cut_w = cw;
    p.cut_y = y;
    p.cut_x = x;
  }
  return p;
}

Image StyleAugmenter::apply(const Image& rgb, const ViewParams& p) const {
  if (rgb.channels != 3 || rgb.height != height_ || rgb.width != width_) {
    throw ShapeError("style augmenter expects 3x" + std::to_string(height_) + "x" + std::to_string(width_) +
                     " RGB, got " + std::to_string(rgb.channels) + "x" + std::to_string(rgb.height) + "x" +
                     std::to_string(rgb.width));
  }
  Image out = rgb;
  for (Transform t : cfg_.order) {
    switch (t) {
      case Transform::kJitter:
        if (p.jitter) out = reflect_pad_crop(out, cfg_.pad_range, p.crop_y, p.crop_x);
        break;
      case Transform::kColor:
        if (p.color) {
          adjust_brightness(out, p.brightness);
          adjust_contrast(out, p.contrast);
          adjust_saturation(out, p.saturation);
          shift_hue(out, p.hue);
        }
        break;
      case Transform::kGray:
        if (p.gray) to_grayscale(out);
        break;
      case Transform::kBlur:
        if (p.blur) gaussian_blur(out, p.sigma);
        break;
      case Transform::kCutout:
        if (p.cutout) cutout(out, p.cut_y, p.cut_x, p.cut_h, p.cut_w);
        break;
    }
  }
  for (float& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

std::pair<Image, Image> style_intervene(const Image& rgb, const StyleAugmenter& aug, Rng& rng) {
  instrumentation::count_style_intervene();
  const ViewParams a = aug.sample(rng);
  const ViewParams b = aug.sample(rng);
  return {aug.apply(rgb, a), aug.apply(rgb, b)};
}

std::pair<std::vector<Image>, std::vector<Image>> batch_intervene(const std::vector<Image>& batch,
                                                                  const StyleAugmenter& aug, Rng& rng) {
  std::pair<std::vector<Image>, std::vector<Image>> out;
  out.first.reserve(batch.size());
  out.second.reserve(batch.size());
  for (const Image& img : batch) {
    auto [a, b] = style_intervene(img, aug, rng);
    out.first.push_back(std::move(a));
    out.second.push_back(std::move(b));
  }
  return out;
}

Image reflect_pad_crop(const Image& rgb, int pad, int crop_y, int crop_x) {
  Image out(rgb.channels, rgb.height, rgb.width);
  for (int c = 0; c < rgb.channels; ++c) {
    for (int y = 0; y < rgb.height; ++y) {
      const int sy = reflect(y + crop_y - pad, rgb.height);
      for (int x = 0; x < rgb.width; ++x) out.at(c, y, x) = rgb.at(c, sy, reflect(x + crop_x - pad, rgb.width));
    }
  }
  return out;
}

void adjust_brightness(Image& rgb, double factor) {
  if (factor == 1.0) return;
  for (float& v : rgb.data) v = clamp01(v * factor);
}

void adjust_contrast(Image& rgb, double factor) {
  if (factor == 1.0) return;
  const std::size_t n = rgb.plane();
  double m = 0;
  for (std::size_t i = 0; i < n; ++i) m += luma(rgb.data[i], rgb.data[n + i], rgb.data[2 * n + i]);
  m /= static_cast<double>(n);
  for (float& v : rgb.data) v = clamp01((v - m) * factor + m);
}

void adjust_saturation(Image& rgb, double factor) {
  if (factor == 1.0) return;
  const std::size_t n = rgb.plane();
  for (std::size_t i = 0; i < n; ++i) {
    const double g = luma(rgb.data[i], rgb.data[n + i], rgb.data[2 * n + i]);
    for (int c = 0; c < 3; ++c) {
      float& v = rgb.data[c * n + i];
      v = clamp01(g + (v - g) * factor);
    }
  }
}

void shift_hue(Image& rgb, double shift) {
  if (shift == 0.0) return;
  const std::size_t n = rgb.plane();
  for (std::size_t i = 0; i < n; ++i) {
    double h, s, v, r, g, b;
    rgb_to_hsv(rgb.data[i], rgb.data[n + i], rgb.data[2 * n + i], h, s, v);
    hsv_to_rgb(h + shift, s, v, r, g, b);
    rgb.data[i] = clamp01(r);
    rgb.data[n + i] = clamp01(g);
    rgb.data[2 * n + i] = clamp01(b);
  }
}

void to_grayscale(Image& rgb) {
  const std::size_t n = rgb.plane();
  for (std::size_t i = 0; i < n; ++i) {
    const float g = clamp01(luma(rgb.data[i], rgb.data[n + i], rgb.data[2 * n + i]));
    rgb.data[i] = rgb.data[n + i] = rgb.data[2 * n + i] = g;
  }
}

void gaussian_blur(Image& rgb, double sigma) {
  if (sigma <= 0) return;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  const int taps = 2 * radius + 1;
  std::vector<float> k(static_cast<std::size_t>(taps));
  double total = 0;
  for (int i = -radius; i <= radius; ++i) total += std::exp(-0.5 * i * i / (sigma * sigma));
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)) / total);
  }

  const int H = rgb.height, W = rgb.width;
  // Reflected source index for every tap position of the padded line.
  std::vector<int> rx(static_cast<std::size_t>(W + 2 * radius)), ry(static_cast<std::size_t>(H + 2 * radius));
  for (int i = 0; i < W + 2 * radius; ++i) rx[static_cast<std::size_t>(i)] = reflect(i - radius, W);
  for (int i = 0; i < H + 2 * radius; ++i) ry[static_cast<std::size_t>(i)] = reflect(i - radius, H);

  std::vector<float> line(static_cast<std::size_t>(std::max(W, H) + 2 * radius));
  std::vector<float> tmp(static_cast<std::size_t>(H) * W);
  for (int c = 0; c < rgb.channels; ++c) {
    float* plane = rgb.data.data() + static_cast<std::size_t>(c) * rgb.plane();
    for (int y = 0; y < H; ++y) {
      const float* src = plane + static_cast<std::size_t>(y) * W;
      for (int i = 0; i < W + 2 * radius; ++i) line[static_cast<std::size_t>(i)] = src[rx[static_cast<std::size_t>(i)]];
      float* dst = tmp.data() + static_cast<std::size_t>(y) * W;
      for (int x = 0; x < W; ++x) {
        float s = 0;
        for (int t = 0; t < taps; ++t) s += k[static_cast<std::size_t>(t)] * line[static_cast<std::size_t>(x + t)];
        dst[x] = s;
      }
    }
    std::vector<float> acc(static_cast<std::size_t>(W));
    for (int y = 0; y < H; ++y) {
      std::fill(acc.begin(), acc.end(), 0.0f);
      for (int t = 0; t < taps; ++t) {
        const float kt = k[static_cast<std::size_t>(t)];
        const float* src = tmp.data() + static_cast<std::size_t>(ry[static_cast<std::size_t>(y + t)]) * W;
        for (int x = 0; x < W; ++x) acc[static_cast<std::size_t>(x)] += kt * src[x];
      }
      float* dst = plane + static_cast<std::size_t>(y) * W;
      for (int x = 0; x < W; ++x) dst[x] = std::clamp(acc[static_cast<std::size_t>(x)], 0.0f, 1.0f);
    }
  }
}

void cutout(Image& rgb, int y, int x, int h, int w) {
  const std::size_t n = rgb.plane();
  for (int c = 0; c < rgb.channels; ++c) {
    double m = 0;
    for (std::size_t i = 0; i < n; ++i) m += rgb.data[c * n + i];
    const float fill = static_cast<float>(m / static_cast<double>(n));
    for (int yy = y; yy < y + h; ++yy) {
      for (int xx = x; xx < x + w; ++xx) rgb.at(c, yy, xx) = fill;
    }
  }
}

}  // namespace recore::aug
