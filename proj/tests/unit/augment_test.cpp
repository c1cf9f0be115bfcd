#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "recore/augment/style.hpp"
#include "recore/common/error.hpp"
#include "recore/common/instrumentation.hpp"

namespace recore::aug {
namespace {

constexpr int kH = 48, kW = 64;

Image random_image(Rng& rng, int h = kH, int w = kW) {
  Image img(3, h, w);
  for (float& v : img.data) v = static_cast<float>(uniform01(rng));
  return img;
}

AugmentConfig everything_off() {
  AugmentConfig c;
  c.pad_range = 0;
  c.hue_delta = c.brightness_delta = c.contrast_delta = c.saturation_delta = 0;
  c.p_jitter = c.p_color = c.p_gray = c.p_blur = c.p_cutout = 0;
  return c;
}

TEST(StyleAugment, IdentityConfiguration) {
  Rng rng(1);
  const Image img = random_image(rng);
  AugmentConfig cfg = everything_off();
  cfg.p_color = 1.0;  // zero deltas make color jitter a no-op as well
  const StyleAugmenter aug(cfg, kH, kW);
  const auto [a, b] = style_intervene(img, aug, rng);
  EXPECT_EQ(a, img);
  EXPECT_EQ(b, img);
}

TEST(StyleAugment, GrayscaleOfGrayImage) {
  Rng rng(2);
  Image img(3, kH, kW);
  for (std::size_t i = 0; i < img.plane(); ++i) {
    const auto v = static_cast<float>(uniform01(rng));
    img.data[i] = img.data[img.plane() + i] = img.data[2 * img.plane() + i] = v;
  }
  Image g = img;
  to_grayscale(g);
  for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(g.data[i], img.data[i], 1e-6);
}

TEST(StyleAugment, CutoutTouchesExactlyOneRectangle) {
  Rng rng(3);
  AugmentConfig cfg = everything_off();
  cfg.p_cutout = 1.0;
  cfg.cutout_min = cfg.cutout_max = 8;
  const StyleAugmenter aug(cfg, kH, kW);
  for (int trial = 0; trial < 50; ++trial) {
    const Image img = random_image(rng);
    const ViewParams p = aug.sample(rng);
    const Image out = aug.apply(img, p);
    float mean[3];
    for (int c = 0; c < 3; ++c) {
      double s = 0;
      for (std::size_t i = 0; i < img.plane(); ++i) s += img.data[c * img.plane() + i];
      mean[c] = static_cast<float>(s / static_cast<double>(img.plane()));
    }
    int changed = 0, y0 = kH, y1 = -1, x0 = kW, x1 = -1;
    for (int y = 0; y < kH; ++y) {
      for (int x = 0; x < kW; ++x) {
        bool diff = false;
        for (int c = 0; c < 3; ++c) diff |= out.at(c, y, x) != img.at(c, y, x);
        if (!diff) continue;
        ++changed;
        y0 = std::min(y0, y), y1 = std::max(y1, y), x0 = std::min(x0, x), x1 = std::max(x1, x);
        for (int c = 0; c < 3; ++c) EXPECT_EQ(out.at(c, y, x), mean[c]);
      }
    }
    EXPECT_EQ(changed, 64);
    EXPECT_EQ(y1 - y0 + 1, 8);
    EXPECT_EQ(x1 - x0 + 1, 8);
  }
}

TEST(StyleAugment, SingleImageGivesDistinctViews) {
  Rng rng(4);
  const Image img = random_image(rng);
  const StyleAugmenter aug({}, kH, kW);
  const auto [a, b] = batch_intervene({img}, aug, rng);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_NE(a[0], b[0]);
}

TEST(StyleAugment, FixedSeedIsBitIdentical) {
  Rng src(5);
  std::vector<Image> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(random_image(src));
  const StyleAugmenter aug({}, kH, kW);
  Rng r1(99), r2(99);
  const auto x = batch_intervene(batch, aug, r1);
  const auto y = batch_intervene(batch, aug, r2);
  EXPECT_EQ(x.first, y.first);
  EXPECT_EQ(x.second, y.second);
}

TEST(StyleAugment, BlurSigmaIsUniform) {
  AugmentConfig cfg;
  cfg.p_blur = 1.0;
  const StyleAugmenter aug(cfg, kH, kW);
  Rng rng(6);
  constexpr int kBins = 10, kDraws = 10000;
  std::array<int, kBins> hist{};
  for (int i = 0; i < kDraws; ++i) {
    const double s = aug.sample(rng).sigma;
    ASSERT_GE(s, 0.1);
    ASSERT_LT(s, 2.0);
    ++hist[static_cast<std::size_t>(std::min(kBins - 1, static_cast<int>((s - 0.1) / 1.9 * kBins)))];
  }
  double chi2 = 0;
  const double expected = static_cast<double>(kDraws) / kBins;
  for (int h : hist) chi2 += (h - expected) * (h - expected) / expected;
  EXPECT_LT(chi2, 21.666);  // chi-square, 9 dof, p = 0.01
}

TEST(StyleAugment, ShapeAndRangePreserved) {
  Rng rng(7);
  AugmentConfig cfg;
  cfg.p_color = cfg.p_gray = cfg.p_blur = cfg.p_cutout = 0.5;
  const StyleAugmenter aug(cfg, kH, kW);
  for (int trial = 0; trial < 200; ++trial) {
    const Image img = random_image(rng);
    const auto [a, b] = style_intervene(img, aug, rng);
    for (const Image* v : {&a, &b}) {
      ASSERT_TRUE(v->same_shape(img));
      for (float x : v->data) {
        ASSERT_GE(x, 0.0f);
        ASSERT_LE(x, 1.0f);
      }
    }
  }
}

TEST(StyleAugment, InvalidConfigFailsAtConstruction) {
  AugmentConfig cfg;
  EXPECT_THROW(StyleAugmenter(cfg, 10, 64), ConfigError);  // cutout larger than height
  cfg = {};
  cfg.brightness_delta = -0.1;
  EXPECT_THROW(StyleAugmenter(cfg, kH, kW), ConfigError);
  cfg = {};
  cfg.cutout_min = 21;
  EXPECT_THROW(StyleAugmenter(cfg, kH, kW), ConfigError);
  EXPECT_NO_THROW(StyleAugmenter(AugmentConfig{}, kH, kW));
}

TEST(StyleAugment, WrongImageShapeIsRejected) {
  const StyleAugmenter aug({}, kH, kW);
  Rng rng(8);
  EXPECT_THROW(style_intervene(Image(3, 32, 32), aug, rng), ShapeError);
}

TEST(StyleAugment, OrderIsConfigurable) {
  Rng rng(9);
  const Image img = random_image(rng);
  AugmentConfig fwd = everything_off();
  fwd.pad_range = 4;
  fwd.p_jitter = fwd.p_cutout = 1.0;
  AugmentConfig rev = fwd;
  rev.order = {Transform::kCutout, Transform::kJitter};
  const StyleAugmenter a(fwd, kH, kW), b(rev, kH, kW);
  ViewParams p = a.sample(rng);
  while (p.crop_y == 4 && p.crop_x == 4) p = a.sample(rng);
  const Image x = a.apply(img, p), y = b.apply(img, p);
  EXPECT_TRUE(x.same_shape(y));
  EXPECT_NE(x, y);
}

TEST(StyleAugment, CenteredCropIsIdentity) {
  Rng rng(10);
  const Image img = random_image(rng);
  EXPECT_EQ(reflect_pad_crop(img, 4, 4, 4), img);
  const Image shifted = reflect_pad_crop(img, 4, 5, 4);
  EXPECT_EQ(shifted.at(0, 0, 0), img.at(0, 1, 0));
  EXPECT_EQ(reflect_pad_crop(img, 4, 0, 4).at(1, 0, 3), img.at(1, 4, 3));
}

TEST(StyleAugment, BlurKeepsConstantImages) {
  Image img(3, kH, kW, 0.4f);
  gaussian_blur(img, 1.7);
  for (float v : img.data) EXPECT_NEAR(v, 0.4f, 1e-6);
}

TEST(StyleAugment, HueShiftRoundTrip) {
  Rng rng(11);
  const Image img = random_image(rng);
  Image x = img;
  shift_hue(x, 0.3);
  shift_hue(x, -0.3);
  for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(x.data[i], img.data[i], 1e-5);
}

TEST(StyleAugment, CallsAreCounted) {
  Rng rng(12);
  const StyleAugmenter aug({}, kH, kW);
  const auto before = instrumentation::snapshot().style_intervene_calls;
  batch_intervene(std::vector<Image>(5, random_image(rng)), aug, rng);
  EXPECT_EQ(instrumentation::snapshot().style_intervene_calls - before, 5u);
}

}  // namespace
}  // namespace recore::aug
