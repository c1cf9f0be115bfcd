#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "recore/autodiff/ops.hpp"
#include "recore/autodiff/param_set.hpp"
#include "recore/common/image.hpp"
#include "recore/common/rng.hpp"

namespace recore::model {

using ad::Array;
using ad::ParamSet;
using ad::Shape;
using ad::Var;

enum class ParamMode {
  kOnline,  // trainable leaves
  kFrozen,  // snapshot of the online values, no parameter gradient
  kEma,     // snapshot of the EMA shadows, no parameter gradient
};

// Read access to a parameter set in one mode. Frozen and EMA views copy each
// array once, on first use, so a view is a consistent snapshot as long as it
// is not held across an optimizer step.
class ParamView {
 public:
  ParamView(const ParamSet& set, ParamMode mode);

  Var operator()(const std::string& name) const;
  ParamMode mode() const { return mode_; }
  const ParamSet& set() const { return *set_; }

 private:
  const ParamSet* set_;
  ParamMode mode_;
  std::shared_ptr<std::map<std::string, Var>> cache_;
};

// Glorot-uniform weights.
Array glorot(Shape shape, std::int64_t fan_in, std::int64_t fan_out, Rng& rng);

// <prefix>.w [in, out] and <prefix>.b [out].
void add_dense(ParamSet& set, const std::string& prefix, int in, int out, Rng& rng);
Var dense(const ParamView& p, const std::string& prefix, const Var& x);

// Layers <prefix>.0 ... <prefix>.{n-1}; ELU after all but the last.
void add_mlp(ParamSet& set, const std::string& prefix, int in, const std::vector<int>& sizes, Rng& rng);
Var mlp(const ParamView& p, const std::string& prefix, const Var& x, std::size_t layers);

// Stacks same-shaped images into [N, C, H, W], adding `offset` to every value.
Var image_batch(std::span<const Image> images, float offset = 0.0f);

}  // namespace recore::model
