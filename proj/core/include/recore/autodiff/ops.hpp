#pragma once

#include <vector>

#include "recore/autodiff/graph.hpp"
#include "recore/common/rng.hpp"

// Differentiable primitives. Every function is instantiated for float (the
// training path) and double (the finite-difference oracle path).
//
// Binary elementwise ops accept equal shapes, or one operand whose shape
// (after dropping leading unit extents) is a suffix of the other's shape.
// A single-element operand therefore broadcasts as a scalar and a [C]
// operand broadcasts over the last axis of [N, C].
namespace recore::ad {

template <typename T> BasicVar<T> add(const BasicVar<T>& a, const BasicVar<T>& b);
template <typename T> BasicVar<T> sub(const BasicVar<T>& a, const BasicVar<T>& b);
template <typename T> BasicVar<T> mul(const BasicVar<T>& a, const BasicVar<T>& b);
template <typename T> BasicVar<T> div(const BasicVar<T>& a, const BasicVar<T>& b);

template <typename T> BasicVar<T> scale(const BasicVar<T>& x, T s);
template <typename T> BasicVar<T> add_scalar(const BasicVar<T>& x, T s);
template <typename T> BasicVar<T> neg(const BasicVar<T>& x) { return scale(x, T(-1)); }

// [M, K] x [K, N] -> [M, N]
template <typename T> BasicVar<T> matmul(const BasicVar<T>& a, const BasicVar<T>& b);
// [M, N] -> [N, M]
template <typename T> BasicVar<T> transpose(const BasicVar<T>& a);
// x[N, in] * w[in, out] + b[out]
template <typename T> BasicVar<T> linear(const BasicVar<T>& x, const BasicVar<T>& w, const BasicVar<T>& b);

// x[N, C, H, W], w[O, C, kh, kw], optional b[O] (pass an invalid Var to skip).
template <typename T>
BasicVar<T> conv2d(const BasicVar<T>& x, const BasicVar<T>& w, const BasicVar<T>& b, int stride, int pad);
// x[N, Cin, H, W], w[Cin, Cout, kh, kw], optional b[Cout].
// Output extent: (H - 1) * stride - 2 * pad + kh + output_pad.
template <typename T>
BasicVar<T> conv_transpose2d(const BasicVar<T>& x, const BasicVar<T>& w, const BasicVar<T>& b, int stride,
                             int pad, int output_pad);

template <typename T> BasicVar<T> elu(const BasicVar<T>& x);
template <typename T> BasicVar<T> relu(const BasicVar<T>& x);
template <typename T> BasicVar<T> tanh(const BasicVar<T>& x);
template <typename T> BasicVar<T> sigmoid(const BasicVar<T>& x);
template <typename T> BasicVar<T> softplus(const BasicVar<T>& x);
template <typename T> BasicVar<T> exp(const BasicVar<T>& x);
template <typename T> BasicVar<T> log(const BasicVar<T>& x);
template <typename T> BasicVar<T> square(const BasicVar<T>& x);
// max(x, lo); gradient passes where x > lo.
template <typename T> BasicVar<T> clamp_min(const BasicVar<T>& x, T lo);

// Over the last axis.
template <typename T> BasicVar<T> softmax(const BasicVar<T>& x);
template <typename T> BasicVar<T> log_softmax(const BasicVar<T>& x);

template <typename T> BasicVar<T> reshape(const BasicVar<T>& x, Shape shape);
template <typename T> BasicVar<T> concat(const std::vector<BasicVar<T>>& xs, int axis);
template <typename T> BasicVar<T> slice(const BasicVar<T>& x, int axis, std::int64_t start, std::int64_t length);

// Full reductions return rank-0 arrays.
template <typename T> BasicVar<T> sum(const BasicVar<T>& x);
template <typename T> BasicVar<T> mean(const BasicVar<T>& x);
// Reduce one axis, removing it from the shape.
template <typename T> BasicVar<T> sum_axis(const BasicVar<T>& x, int axis);
template <typename T> BasicVar<T> mean_axis(const BasicVar<T>& x, int axis);

// Normalizes over the last axis, then applies gain[D] and bias[D].
template <typename T>
BasicVar<T> layer_norm(const BasicVar<T>& x, const BasicVar<T>& gain, const BasicVar<T>& bias, T eps = T(1e-5));

// One gated recurrent unit step.
// x[N, I], h[N, U], wx[I, 3U], wh[U, 3U], b[3U]; gate order (reset, update, candidate).
// h' = (1 - z) * n + z * h, so |h'| <= max(1, |h|).
template <typename T>
BasicVar<T> gru_cell(const BasicVar<T>& x, const BasicVar<T>& h, const BasicVar<T>& wx, const BasicVar<T>& wh,
                     const BasicVar<T>& b);

// Categorical sample per row of logits[..., C]. The forward value is an
// exact one-hot; the backward pass uses the softmax Jacobian, i.e. the
// output behaves like one_hot + probs - stop_gradient(probs).
template <typename T> BasicVar<T> straight_through_sample(const BasicVar<T>& logits, Rng& rng);

// Same value, no gradient.
template <typename T> BasicVar<T> detach(const BasicVar<T>& x) { return constant(x.value()); }

}  // namespace recore::ad
