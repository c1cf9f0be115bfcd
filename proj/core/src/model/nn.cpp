#include "recore/model/nn.hpp"

#include <cmath>

#include "recore/common/error.hpp"

namespace recore::model {

ParamView::ParamView(const ParamSet& set, ParamMode mode)
    : set_(&set), mode_(mode), cache_(std::make_shared<std::map<std::string, Var>>()) {
  if (mode == ParamMode::kEma && !set.has_ema()) throw StateError("EMA view of '" + set.name() + "' without shadows");
}

Var ParamView::operator()(const std::string& name) const {
  if (mode_ == ParamMode::kOnline) return set_->get(name);
  auto it = cache_->find(name);
  if (it != cache_->end()) return it->second;
  Array value = mode_ == ParamMode::kEma ? set_->ema(name) : set_->get(name).value();
  return cache_->emplace(name, ad::constant(std::move(value))).first->second;
}

Array glorot(Shape shape, std::int64_t fan_in, std::int64_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Array a(std::move(shape));
  for (float& v : a.data()) v = static_cast<float>(uniform(rng, -limit, limit));
  return a;
}

void add_dense(ParamSet& set, const std::string& prefix, int in, int out, Rng& rng) {
  set.add(prefix + ".w", glorot({in, out}, in, out, rng));
  set.add(prefix + ".b", Array({out}));
}

Var dense(const ParamView& p, const std::string& prefix, const Var& x) {
  return ad::linear(x, p(prefix + ".w"), p(prefix + ".b"));
}

void add_mlp(ParamSet& set, const std::string& prefix, int in, const std::vector<int>& sizes, Rng& rng) {
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    add_dense(set, prefix + "." + std::to_string(i), in, sizes[i], rng);
    in = sizes[i];
  }
}

Var mlp(const ParamView& p, const std::string& prefix, const Var& x, std::size_t layers) {
  Var y = x;
  for (std::size_t i = 0; i < layers; ++i) {
    y = dense(p, prefix + "." + std::to_string(i), y);
    if (i + 1 < layers) y = ad::elu(y);
  }
  return y;
}

Var image_batch(std::span<const Image> images, float offset) {
  if (images.empty()) throw ShapeError("image_batch: empty batch");
  const Image& first = images.front();
  Array out({static_cast<std::int64_t>(images.size()), first.channels, first.height, first.width});
  float* dst = out.ptr();
  for (const Image& img : images) {
    if (!img.same_shape(first)) throw ShapeError("image_batch: images differ in shape");
    for (float v : img.data) *dst++ = v + offset;
  }
  return ad::constant(std::move(out));
}

}  // namespace recore::model
