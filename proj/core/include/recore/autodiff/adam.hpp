#pragma once

#include "recore/autodiff/param_set.hpp"

namespace recore::ad {

struct AdamOptions {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-5f;
};

struct AdamStats {
  double grad_norm = 0.0;   // before clipping
  double clip_scale = 1.0;  // factor applied to every gradient
};

// Clips the global gradient norm to `clip`, applies one bias-corrected Adam
// update to every entry and zeroes the gradients. A non-finite gradient
// aborts the step (parameters untouched) with the offending entry's name.
AdamStats adam_step(ParamSet& params, float lr, float clip, const AdamOptions& options = {});

}  // namespace recore::ad
