#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "recore/autodiff/adam.hpp"
#include "recore/autodiff/checkpoint.hpp"
#include "recore/autodiff/ops.hpp"
#include "recore/autodiff/param_set.hpp"
#include "recore/common/error.hpp"
#include "support/gradcheck.hpp"

namespace recore::ad {
namespace {

Array filled(Shape s, std::vector<float> v) { return Array(std::move(s), std::move(v)); }

TEST(Array, ShapeAndDataAgree) {
  const Array a({2, 3, 4});
  EXPECT_EQ(a.size(), 24);
  EXPECT_EQ(a.dim(-1), 4);
  EXPECT_THROW(Array(Shape{2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  EXPECT_EQ(Array::scalar(3.0f).item(), 3.0f);
}

TEST(Ops, EluAtZeroAndMinusOne) {
  const Var y = elu(constant(filled({2}, {0.0f, -1.0f})));
  EXPECT_EQ(y.value()[0], 0.0f);
  EXPECT_NEAR(y.value()[1], std::exp(-1.0) - 1.0, 1e-7);
}

TEST(Ops, SoftmaxOfEqualEntries) {
  const Var y = softmax(constant(Array({4}, 2.5f)));
  for (float v : y.value().data()) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(Ops, ConvAllOnesKernelSumsImage) {
  Rng rng(3);
  Array64 img({1, 1, 4, 4});
  for (auto& v : img.data()) v = uniform(rng, -1, 1);
  const Var64 y = conv2d(constant(img), constant(Array64({1, 1, 4, 4}, 1.0)), Var64{}, 2, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  double s = 0;
  for (double v : img.data()) s += v;
  EXPECT_NEAR(y.value()[0], s, 1e-12);
}

// Brute-force sliding-window correlation.
Array64 naive_conv(const Array64& x, const Array64& w, int stride, int pad) {
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const auto o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const auto oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
  Array64 out({n, o, oh, ow});
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t oc = 0; oc < o; ++oc)
      for (std::int64_t i = 0; i < oh; ++i)
        for (std::int64_t j = 0; j < ow; ++j) {
          double s = 0;
          for (std::int64_t ic = 0; ic < c; ++ic)
            for (std::int64_t a = 0; a < kh; ++a)
              for (std::int64_t bb = 0; bb < kw; ++bb) {
                const auto y = i * stride - pad + a, xx = j * stride - pad + bb;
                if (y < 0 || xx < 0 || y >= h || xx >= wd) continue;
                s += x[((b * c + ic) * h + y) * wd + xx] * w[((oc * c + ic) * kh + a) * kw + bb];
              }
          out[((b * o + oc) * oh + i) * ow + j] = s;
        }
  return out;
}

TEST(Ops, ConvMatchesSlidingWindow) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const int stride = static_cast<int>(uniform_int(rng, 1, 3)), pad = static_cast<int>(uniform_int(rng, 0, 2));
    const auto k = uniform_int(rng, 1, 4);
    Array64 x({2, uniform_int(rng, 1, 3), uniform_int(rng, k, 9), uniform_int(rng, k, 9)});
    Array64 w({uniform_int(rng, 1, 3), x.dim(1), k, k});
    for (auto& v : x.data()) v = uniform(rng, -1, 1);
    for (auto& v : w.data()) v = uniform(rng, -1, 1);
    const Var64 y = conv2d(constant(x), constant(w), Var64{}, stride, pad);
    const Array64 ref = naive_conv(x, w, stride, pad);
    ASSERT_EQ(y.shape(), ref.shape());
    for (std::int64_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.value()[i], ref[i], 1e-12);
  }
}

TEST(Ops, ConvTransposeIsAdjointOfConv) {
  // <conv(x), y> == <x, conv_transpose(y)> with the weight axes swapped.
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const int stride = static_cast<int>(uniform_int(rng, 1, 3));
    const int k = static_cast<int>(uniform_int(rng, stride, 4)), pad = static_cast<int>(uniform_int(rng, 0, k - 1));
    const auto c = uniform_int(rng, 1, 3), o = uniform_int(rng, 1, 3);
    const auto yh = uniform_int(rng, 1, 4), yw = uniform_int(rng, 1, 4);
    const auto h = (yh - 1) * stride - 2 * pad + k, w = (yw - 1) * stride - 2 * pad + k;
    if (h <= 0 || w <= 0) continue;
    Array64 x({1, c, h, w}), kern({o, c, k, k}), y({1, o, yh, yw});
    for (auto* a : {&x, &kern, &y})
      for (auto& v : a->data()) v = uniform(rng, -1, 1);
    const Var64 cx = conv2d(constant(x), constant(kern), Var64{}, stride, pad);
    ASSERT_EQ(cx.shape(), y.shape());
    const Var64 ty = conv_transpose2d(constant(y), constant(kern), Var64{}, stride, pad, 0);
    ASSERT_EQ(ty.shape(), x.shape());
    double lhs = 0, rhs = 0;
    for (std::int64_t i = 0; i < y.size(); ++i) lhs += cx.value()[i] * y[i];
    for (std::int64_t i = 0; i < x.size(); ++i) rhs += x[i] * ty.value()[i];
    EXPECT_NEAR(lhs, rhs, 1e-10);
  }
}

TEST(Ops, ShapeErrorNamesPrimitiveAndShapes) {
  try {
    add(constant(Array({2, 3})), constant(Array({4})));
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("add"), std::string::npos);
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4]"), std::string::npos) << msg;
  }
  EXPECT_THROW(matmul(constant(Array({2, 3})), constant(Array({2, 3}))), ShapeError);
}

TEST(Ops, NonFiniteOutputIsAnError) {
  EXPECT_THROW(log(constant(Array({2}, 0.0f))), NonFiniteError);
}

TEST(Autodiff, FanOutAccumulates) {
  const Var x = leaf(Array::scalar(3.0f), true);
  const Var y = add(mul(x, x), x);  // x^2 + x
  backward(y);
  EXPECT_FLOAT_EQ(x.grad().item(), 7.0f);
  backward(y);
  EXPECT_FLOAT_EQ(x.grad().item(), 14.0f);
}

TEST(Autodiff, GradShapeEqualsValueShape) {
  const Var x = leaf(Array({3, 4}, 0.5f), true);
  const Var b = leaf(Array({4}, 0.1f), true);
  backward(sum(tanh(add(x, b))));
  EXPECT_EQ(x.grad().shape(), x.shape());
  EXPECT_EQ(b.grad().shape(), b.shape());
}

TEST(Autodiff, BackwardRequiresScalar) {
  const Var x = leaf(Array({3}, 1.0f), true);
  EXPECT_THROW(backward(exp(x)), ShapeError);
}

TEST(Autodiff, DetachBlocksGradient) {
  const Var x = leaf(Array::scalar(2.0f), true);
  const Var y = mul(detach(x), x);
  backward(y);
  EXPECT_FLOAT_EQ(x.grad().item(), 2.0f);
}

TEST(Autodiff, GradientFreePathsKeepNoGraph) {
  const Var y = exp(constant(Array({2}, 1.0f)));
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.node()->parents.empty());
}

TEST(GradCheck, DetectsAWrongBackwardRule) {
  // Sanity check of the oracle itself: a deliberately wrong derivative fails.
  testing::GradCase c;
  c.inputs = {Array64({5}, 0.7)};
  c.f = [](const std::vector<Var64>& v) {
    Array64 out = v[0].value();
    for (auto& e : out.data()) e = e * e;
    return make_node<double>("bad_square", std::move(out), {v[0].ptr()}, [](Node<double>& self) {
      auto& p = *self.parents[0];
      auto& g = p.ensure_grad();
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * p.value[i];  // should be 2x
    });
  };
  Rng rng(1);
  EXPECT_GT(testing::grad_rel_error(c, rng), 0.1);
}

TEST(GruCell, StaysBoundedOverLongUnroll) {
  Rng rng(8);
  const int in = 6, u = 10;
  Array wx({in, 3 * u}), wh({u, 3 * u}), b({3 * u});
  for (auto* a : {&wx, &wh, &b})
    for (auto& v : a->data()) v = static_cast<float>(normal(rng) * 2.0);
  Var h = constant(Array({2, u}, 0.0f));
  for (int t = 0; t < 50; ++t) {
    Array x({2, in});
    for (auto& v : x.data()) v = static_cast<float>(normal(rng) * 5.0);
    h = gru_cell(constant(x), h, constant(wx), constant(wh), constant(b));
    for (float v : h.value().data()) ASSERT_LE(std::abs(v), 1.0f);
  }
}

TEST(StraightThrough, RowsAreOneHotAndFollowProbabilities) {
  Rng rng(9);
  const Array logits = filled({1, 3}, {0.0f, std::log(2.0f), std::log(5.0f)});
  std::array<int, 3> counts{};
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const Var s = straight_through_sample(constant(logits), rng);
    float row = 0;
    for (int k = 0; k < 3; ++k) {
      row += s.value()[k];
      if (s.value()[k] == 1.0f) ++counts[static_cast<std::size_t>(k)];
      ASSERT_TRUE(s.value()[k] == 0.0f || s.value()[k] == 1.0f);
    }
    ASSERT_EQ(row, 1.0f);
  }
  // Chi-square with 2 dof; 13.8 is the 0.001 critical value.
  const double p[3] = {1.0 / 8, 2.0 / 8, 5.0 / 8};
  double chi2 = 0;
  for (int k = 0; k < 3; ++k) chi2 += std::pow(counts[static_cast<std::size_t>(k)] - n * p[k], 2) / (n * p[k]);
  EXPECT_LT(chi2, 13.8);
}

TEST(ParamSet, EmaMirrorsEntries) {
  ParamSet ps("t");
  ps.add("a.w", Array({2, 2}, 1.0f));
  ps.add("a.b", Array({2}, 0.0f));
  ps.init_ema();
  EXPECT_EQ(ps.ema("a.w"), ps.get("a.w").value());
  Var w = ps.get("a.w");
  w.mutable_value().fill(3.0f);
  ps.ema_update(0.5f);
  EXPECT_FLOAT_EQ(ps.ema("a.w")[0], 2.0f);
  ps.ema_copy_from_online();
  EXPECT_EQ(ps.ema("a.w"), ps.get("a.w").value());
  EXPECT_THROW(ps.add("late", Array({1})), StateError);
  EXPECT_THROW(ps.add("a.w", Array({1})), StateError);
}

TEST(Adam, MatchesHandComputedSteps) {
  ParamSet ps("t");
  ps.add("x", Array::scalar(1.0f));
  const float lr = 0.1f;
  double x = 1.0, m = 0, v = 0;
  for (int t = 1; t <= 5; ++t) {
    const Var& p = ps.get("x");
    backward(square(p));  // grad 2x
    const double g = 2 * x;
    adam_step(ps, lr, 0.0f);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= lr * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-5);
    EXPECT_NEAR(ps.get("x").value().item(), x, 1e-5);
  }
  EXPECT_EQ(ps.adam_steps(), 5);
  EXPECT_TRUE(ps.get("x").grad().empty() || ps.get("x").grad().item() == 0.0f);
}

TEST(Adam, ClipsGlobalNorm) {
  ParamSet ps("t");
  ps.add("a", Array({2}, 0.0f));
  ps.add("b", Array({1}, 0.0f));
  Var a = ps.get("a"), b = ps.get("b");
  a.node()->ensure_grad() = filled({2}, {3.0f, 0.0f});
  b.node()->ensure_grad() = filled({1}, {4.0f});
  const AdamStats s = adam_step(ps, 1e-3f, 1.0f);
  EXPECT_NEAR(s.grad_norm, 5.0, 1e-6);
  EXPECT_NEAR(s.clip_scale, 0.2, 1e-6);
  EXPECT_NEAR(ps.adam_moments().at("b").m[0], 0.1f * 0.8f, 1e-6);
}

TEST(Adam, NonFiniteGradientIsNamed) {
  ParamSet ps("t");
  ps.add("bad.param", Array({1}, 0.0f));
  Var p = ps.get("bad.param");
  p.node()->ensure_grad()[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    adam_step(ps, 1e-3f, 0.0f);
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.param"), std::string::npos);
  }
  EXPECT_EQ(ps.get("bad.param").value()[0], 0.0f);
}

TEST(Checkpoint, RoundTrip) {
  ParamSet ps("wm");
  Rng rng(2);
  Array w({3, 4});
  for (auto& v : w.data()) v = static_cast<float>(normal(rng));
  ps.add("wm.w", w);
  ps.add("wm.s", Array::scalar(2.5f));
  ps.init_ema();
  backward(sum(square(ps.get("wm.w"))));
  adam_step(ps, 1e-2f, 0.0f);
  ps.ema_update(0.9f);

  Checkpoint ck;
  ck.meta["note"] = "hello world";
  ps.write_to(ck);
  const auto path = std::filesystem::temp_directory_path() / "recore_ckpt_roundtrip.bin";
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_EQ(back.meta.at("note"), "hello world");

  ParamSet other("wm");
  other.add("wm.w", Array({3, 4}));
  other.add("wm.s", Array::scalar(0.0f));
  other.init_ema();
  other.read_from(back);
  EXPECT_EQ(other.get("wm.w").value(), ps.get("wm.w").value());
  EXPECT_EQ(other.ema("wm.w"), ps.ema("wm.w"));
  EXPECT_EQ(other.adam_steps(), 1);
  EXPECT_EQ(other.adam_moments().at("wm.w").v, ps.adam_moments().at("wm.w").v);

  ParamSet wrong("wm");
  wrong.add("wm.w", Array({4, 3}));
  EXPECT_THROW(wrong.read_from(back), ConfigError);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto path = std::filesystem::temp_directory_path() / "recore_ckpt_bad.bin";
  {
    std::ofstream f(path);
    f << "NOT-A-CKPT\n";
  }
  EXPECT_ANY_THROW(load_checkpoint(path));
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace recore::ad
