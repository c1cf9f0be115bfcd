#include "recore/autodiff/adam.hpp"

#include <cmath>

#include "recore/common/error.hpp"

namespace recore::ad {

AdamStats adam_step(ParamSet& params, float lr, float clip, const AdamOptions& options) {
  double sq = 0.0;
  for (const auto& [name, v] : params.entries()) {
    const Array& g = v.grad();
    if (g.empty()) continue;
    if (!g.all_finite()) {
      params.zero_grad();
      throw NonFiniteError("non-finite gradient in parameter '" + name + "'");
    }
    for (float x : g.data()) sq += static_cast<double>(x) * x;
  }
  AdamStats stats;
  stats.grad_norm = std::sqrt(sq);
  if (clip > 0 && stats.grad_norm > clip) stats.clip_scale = clip / stats.grad_norm;

  params.set_adam_steps(params.adam_steps() + 1);
  const double t = static_cast<double>(params.adam_steps());
  const double c1 = 1.0 - std::pow(static_cast<double>(options.beta1), t);
  const double c2 = 1.0 - std::pow(static_cast<double>(options.beta2), t);
  const float b1 = options.beta1, b2 = options.beta2;
  const float scale = static_cast<float>(stats.clip_scale);
  auto& moments = params.adam_moments();
  for (const auto& [name, v] : params.entries()) {
    auto [it, inserted] = moments.try_emplace(name);
    if (inserted) it->second = ParamSet::Moments{Array(v.shape()), Array(v.shape())};
    auto& [m, s] = it->second;
    const Array& g = v.grad();
    Var alias = v;
    Array& p = alias.mutable_value();
    for (std::int64_t i = 0; i < p.size(); ++i) {
      const float gi = g.empty() ? 0.0f : g[i] * scale;
      m[i] = b1 * m[i] + (1.0f - b1) * gi;
      s[i] = b2 * s[i] + (1.0f - b2) * gi * gi;
      const double mh = m[i] / c1;
      const double vh = s[i] / c2;
      p[i] -= static_cast<float>(lr * mh / (std::sqrt(vh) + options.eps));
    }
  }
  params.zero_grad();
  return stats;
}

}  // namespace recore::ad
