#pragma once

#include <utility>
#include <vector>

#include "recore/common/image.hpp"
#include "recore/common/rng.hpp"

namespace recore::aug {

enum class Transform { kJitter, kColor, kGray, kBlur, kCutout };

struct AugmentConfig {
  int pad_range = 4;
  double hue_delta = 0.1;  // fraction of the hue circle
  double brightness_delta = 0.4;
  double contrast_delta = 0.4;
  double saturation_delta = 0.2;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 2.0;
  int cutout_min = 12;
  int cutout_max = 20;
  double p_jitter = 1.0;
  double p_color = 0.8;
  double p_gray = 0.2;
  double p_blur = 0.5;
  double p_cutout = 0.5;
  std::vector<Transform> order{Transform::kJitter, Transform::kColor, Transform::kGray, Transform::kBlur,
                               Transform::kCutout};

  // Throws ConfigError naming the offending field.
  void validate(int height, int width) const;
};

// Every random draw for one view. Fields of transforms that were not
// selected keep their neutral values.
struct ViewParams {
  bool jitter = false;
  int crop_y = 0;  // offset into the padded image; pad_range means no shift
  int crop_x = 0;
  bool color = false;
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue = 0.0;
  bool gray = false;
  bool blur = false;
  double sigma = 0.0;
  bool cutout = false;
  int cut_y = 0;
  int cut_x = 0;
  int cut_h = 0;
  int cut_w = 0;
};

// Style interventions for images of one fixed size. The config is checked
// against that size on construction.
class StyleAugmenter {
 public:
  StyleAugmenter(AugmentConfig cfg, int height, int width);

  const AugmentConfig& config() const { return cfg_; }
  ViewParams sample(Rng& rng) const;
  // Applies the transforms in config order, clamping the result to [0, 1].
  Image apply(const Image& rgb, const ViewParams& p) const;

 private:
  AugmentConfig cfg_;
  int height_;
  int width_;
};

// Two independently augmented views of one RGB image. Counted by the
// instrumentation layer.
std::pair<Image, Image> style_intervene(const Image& rgb, const StyleAugmenter& aug, Rng& rng);

// Views for every image of a flattened batch; entry i of both outputs is a
// positive pair.
std::pair<std::vector<Image>, std::vector<Image>> batch_intervene(const std::vector<Image>& batch,
                                                                  const StyleAugmenter& aug, Rng& rng);

// Individual transforms, exposed for tests.
Image reflect_pad_crop(const Image& rgb, int pad, int crop_y, int crop_x);
void adjust_brightness(Image& rgb, double factor);
void adjust_contrast(Image& rgb, double factor);
void adjust_saturation(Image& rgb, double factor);
void shift_hue(Image& rgb, double shift);
void to_grayscale(Image& rgb);
void gaussian_blur(Image& rgb, double sigma);
void cutout(Image& rgb, int y, int x, int h, int w);

}  // namespace recore::aug
