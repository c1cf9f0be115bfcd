#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "recore/common/error.hpp"
#include "recore/control/controller.hpp"

namespace recore::control {
namespace {

// Next state holds the action taken; reward is -|a|^2.
class ActionEcho final : public LatentDynamics {
 public:
  LatentState step(const LatentState& st, const Var& action, Rng&) const override {
    LatentState n;
    n.h = action;
    n.s = ad::constant(Array({st.batch(), 1, 1}));
    n.logits = n.s;
    return n;
  }
  Var reward(const LatentState& st) const override { return ad::neg(ad::sum_axis(ad::square(st.h), 1)); }
};

// State never changes; reward is a constant.
class ConstantReward final : public LatentDynamics {
 public:
  explicit ConstantReward(float r) : r_(r) {}
  LatentState step(const LatentState& st, const Var&, Rng&) const override { return st; }
  Var reward(const LatentState& st) const override { return ad::constant(Array({st.batch()}, r_)); }

 private:
  float r_;
};

// Emits a NaN state on call `bad`.
class BreaksAt final : public LatentDynamics {
 public:
  explicit BreaksAt(int bad) : bad_(bad) {}
  LatentState step(const LatentState& st, const Var& action, Rng& rng) const override {
    LatentState n = echo_.step(st, action, rng);
    if (calls_++ == bad_) n.h = ad::constant(Array(action.shape(), std::numeric_limits<float>::quiet_NaN()));
    return n;
  }
  Var reward(const LatentState& st) const override { return echo_.reward(st); }

 private:
  ActionEcho echo_;
  int bad_;
  mutable int calls_ = 0;
};

ControllerConfig small_config() {
  ControllerConfig c;
  c.horizon = 3;
  c.layers = 2;
  c.units = 32;
  return c;
}

LatentState echo_state(Rng& rng, std::int64_t n, double range = 1.0) {
  Array h({n, 2});
  for (float& v : h.data()) v = static_cast<float>(uniform(rng, -range, range));
  LatentState st;
  st.h = ad::constant(std::move(h));
  st.s = ad::constant(Array({n, 1, 1}));
  st.logits = st.s;
  return st;
}

bool all_zero_or_empty(const ParamSet& set) {
  for (const auto& [name, v] : set.entries()) {
    for (float g : v.grad().data()) {
      if (g != 0.0f) return false;
    }
  }
  return true;
}

bool same_values(const ParamSet& a, const ParamSet& b) {
  for (const auto& [name, v] : a.entries()) {
    if (v.value() != b.get(name).value()) return false;
  }
  return true;
}

// Independent oracle: weighted n-step returns,
// V_t = (1 - l) sum_{n=1}^{H-t-1} l^{n-1} G_t^n + l^{H-t-1} G_t^{H-t}.
std::vector<double> expanded_returns(const std::vector<double>& r, const std::vector<double>& v, double g,
                                     double l) {
  const int h = static_cast<int>(r.size());
  auto nstep = [&](int t, int n) {
    double acc = 0;
    for (int k = 0; k < n; ++k) acc += std::pow(g, k) * r[static_cast<std::size_t>(t + k)];
    return acc + std::pow(g, n) * v[static_cast<std::size_t>(t + n)];
  };
  std::vector<double> out;
  for (int t = 0; t < h; ++t) {
    double acc = 0;
    for (int n = 1; n < h - t; ++n) acc += (1 - l) * std::pow(l, n - 1) * nstep(t, n);
    acc += std::pow(l, h - t - 1) * nstep(t, h - t);
    out.push_back(acc);
  }
  return out;
}

TEST(LambdaReturns, GeometricSum) {
  const auto t = lambda_returns({1, 1, 1}, {5, 5, 5, 0}, 0.9, 1.0);
  EXPECT_NEAR(t[0], 2.71, 1e-12);
}

TEST(LambdaReturns, LambdaZeroIsOneStep) {
  const std::vector<double> r{0.3, -1.0, 2.0}, v{4, 5, 6, 7};
  const auto t = lambda_returns(r, v, 0.8, 0.0);
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(t[i], r[i] + 0.8 * v[i + 1], 1e-12);
}

TEST(LambdaReturns, MatchesExpansionOracle) {
  Rng rng(1);
  for (int h = 1; h <= 5; ++h) {
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> r(static_cast<std::size_t>(h)), v(static_cast<std::size_t>(h + 1));
      for (double& x : r) x = uniform(rng, -2, 2);
      for (double& x : v) x = uniform(rng, -5, 5);
      const double g = uniform(rng, 0.01, 1.0), l = uniform(rng, 0.0, 1.0);
      const auto got = lambda_returns(r, v, g, l);
      const auto expect = expanded_returns(r, v, g, l);
      for (int t = 0; t < h; ++t) ASSERT_NEAR(got[static_cast<std::size_t>(t)], expect[static_cast<std::size_t>(t)], 1e-9);
    }
  }
}

TEST(LambdaReturns, GraphVersionMatchesScalarVersion) {
  Rng rng(2);
  std::vector<Var> r, v;
  std::vector<double> rd, vd;
  for (int i = 0; i < 5; ++i) {
    rd.push_back(uniform(rng, -1, 1));
    r.push_back(ad::constant(Array({1}, static_cast<float>(rd.back()))));
  }
  for (int i = 0; i < 6; ++i) {
    vd.push_back(uniform(rng, -1, 1));
    v.push_back(ad::constant(Array({1}, static_cast<float>(vd.back()))));
  }
  const auto got = lambda_returns(r, v, 0.99, 0.95);
  const auto expect = lambda_returns(rd, vd, 0.99, 0.95);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(got[static_cast<std::size_t>(i)].value()[0], expect[static_cast<std::size_t>(i)], 1e-5);
  EXPECT_THROW(lambda_returns(r, r, 0.99, 0.95), ShapeError);
}

TEST(Policy, ActionsStayInBounds) {
  const Controller c(small_config(), 3, 2, 3);
  Rng rng(4);
  Array f({10000, 3});
  for (float& x : f.data()) x = static_cast<float>(uniform(rng, -20, 20));
  const ParamView p(c.actor(), ParamMode::kFrozen);
  for (Rng* r : {&rng, static_cast<Rng*>(nullptr)}) {
    const Array a = c.policy(p, ad::constant(f), r).action.value();
    for (std::int64_t i = 0; i < 10000; ++i) {
      const EnvAction e = to_env_action(a[i * 2], a[i * 2 + 1], 1.5708, 0.1);
      ASSERT_LE(std::fabs(a[i * 2]), 1.0f);
      ASSERT_LE(std::fabs(e.rotation), 1.5708);
      ASSERT_GE(e.forward, 0.0);
      ASSERT_LE(e.forward, 0.1);
    }
  }
}

TEST(Policy, DeterministicModeIgnoresRng) {
  const Controller c(small_config(), 3, 2, 5);
  Rng a(1), b(2);
  const LatentState st = echo_state(a, 8);
  EXPECT_EQ(c.act(st, a, true), c.act(st, b, true));
  EXPECT_NE(c.act(st, a, false), c.act(st, b, false));
}

TEST(Policy, ReparameterizedGradientIsFinite) {
  Controller c(small_config(), 3, 2, 6);
  Rng rng(7);
  const ParamView p(c.actor(), ParamMode::kOnline);
  const PolicyOutput po = c.policy(p, ad::constant(Array({4, 3}, 0.5f)), &rng);
  ad::backward(ad::sum(po.action));
  ASSERT_FALSE(po.mean.grad().empty());
  double norm = 0;
  for (float g : po.mean.grad().data()) {
    ASSERT_TRUE(std::isfinite(g));
    norm += g * g;
  }
  EXPECT_GT(norm, 0.0);
  EXPECT_FALSE(po.log_std.grad().empty());
}

TEST(Policy, EnvActionMapsRoundTrip) {
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const auto a0 = static_cast<float>(uniform(rng, -1, 1)), a1 = static_cast<float>(uniform(rng, -1, 1));
    const EnvAction e = to_env_action(a0, a1, 1.5708, 0.1);
    const auto [b0, b1] = from_env_action(e.rotation, e.forward, 1.5708, 0.1);
    ASSERT_NEAR(b0, a0, 1e-6);
    ASSERT_NEAR(b1, a1, 1e-6);
  }
}

model::WorldModelConfig tiny_world() {
  model::WorldModelConfig c;
  c.image_height = 16;
  c.image_width = 16;
  c.latent_dims = 4;
  c.latent_classes = 4;
  c.units = 32;
  c.enc_channels = {8, 16};
  c.enc_kernels = {4, 4};
  c.dec_channels = {16, 8};
  c.dec_kernels = {4, 4};
  c.task_mlp = {8, 8};
  c.head_layers = 2;
  c.head_units = 16;
  return c;
}

LatentState posterior_start(const model::WorldModel& wm, int n, Rng& rng) {
  Array feat({n, wm.feature_dim()});
  for (float& x : feat.data()) x = static_cast<float>(uniform(rng, -1, 1));
  return model::detach(wm.observe(wm.view(ParamMode::kOnline), wm.initial_state(n), ad::constant(Array({n, 2})),
                                  ad::constant(std::move(feat)), rng)
                           .post);
}

TEST(Rollout, HorizonOneShapes) {
  const model::WorldModel wm(tiny_world(), 1);
  ControllerConfig cfg = small_config();
  cfg.horizon = 1;
  const Controller c(cfg, wm.state_dim(), 2, 2);
  Rng rng(3);
  const WorldModelDynamics dyn(wm);
  const ImaginedTrajectory tr = c.imagine(ParamView(c.actor(), ParamMode::kOnline), dyn, posterior_start(wm, 5, rng), rng);
  EXPECT_EQ(tr.states.size(), 2u);
  EXPECT_EQ(tr.actions.size(), 1u);
  EXPECT_EQ(tr.reward_means.size(), 1u);
  EXPECT_EQ(tr.values.size(), 2u);
  EXPECT_EQ(tr.actions[0].shape(), (ad::Shape{5, 2}));
  EXPECT_EQ(tr.reward_means[0].shape(), (ad::Shape{5}));
}

TEST(Rollout, WorldModelReceivesNoGradient) {
  model::WorldModel wm(tiny_world(), 4);
  const Controller c(small_config(), wm.state_dim(), 2, 5);
  Rng rng(6);
  const WorldModelDynamics dyn(wm);
  const ImaginedTrajectory tr = c.imagine(ParamView(c.actor(), ParamMode::kOnline), dyn, posterior_start(wm, 4, rng), rng);
  const auto targets = lambda_returns(tr.reward_means, tr.values, 0.99, 0.95);
  ad::backward(c.actor_loss(tr, targets));
  EXPECT_TRUE(all_zero_or_empty(wm.params()));
  EXPECT_FALSE(all_zero_or_empty(c.actor()));
  EXPECT_TRUE(all_zero_or_empty(c.critic()));
  EXPECT_TRUE(all_zero_or_empty(c.slow_critic()));
}

TEST(Rollout, CriticTargetsCarryNoGradient) {
  const model::WorldModel wm(tiny_world(), 7);
  const Controller c(small_config(), wm.state_dim(), 2, 8);
  Rng rng(9);
  const WorldModelDynamics dyn(wm);
  const ImaginedTrajectory tr = c.imagine(ParamView(c.actor(), ParamMode::kOnline), dyn, posterior_start(wm, 4, rng), rng);
  ad::backward(c.critic_loss(tr, lambda_returns(tr.reward_means, tr.values, 0.99, 0.95)));
  EXPECT_TRUE(all_zero_or_empty(c.actor()));
  EXPECT_TRUE(all_zero_or_empty(wm.params()));
  EXPECT_FALSE(all_zero_or_empty(c.critic()));
}

TEST(Rollout, MatchesManualReplay) {
  const model::WorldModel wm(tiny_world(), 10);
  const Controller c(small_config(), wm.state_dim(), 2, 11);
  Rng init(12);
  const LatentState start = posterior_start(wm, 3, init);
  Rng r1(13), r2(13);
  const ImaginedTrajectory tr = c.imagine(ParamView(c.actor(), ParamMode::kOnline), WorldModelDynamics(wm), start, r1);

  const ParamView actor(c.actor(), ParamMode::kFrozen);
  const ParamView frozen = wm.view(ParamMode::kFrozen);
  LatentState st = start;
  for (int t = 0; t < tr.horizon(); ++t) {
    const Var a = c.policy(actor, model::state_features(st), &r2).action;
    st = wm.imagine(frozen, st, a, r2);
    const auto i = static_cast<std::size_t>(t);
    ASSERT_EQ(a.value(), tr.actions[i].value());
    ASSERT_EQ(st.h.value(), tr.states[i + 1].h.value());
    ASSERT_EQ(st.s.value(), tr.states[i + 1].s.value());
    ASSERT_EQ(wm.reward(frozen, st).value(), tr.reward_means[i].value());
  }
}

TEST(Rollout, NonFiniteStateNamesTheStep) {
  const Controller c(small_config(), 3, 2, 14);
  Rng rng(15);
  try {
    c.imagine(ParamView(c.actor(), ParamMode::kOnline), BreaksAt(2), echo_state(rng, 2), rng);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("imagination step 2"), std::string::npos) << e.what();
  }
}

TEST(Update, CriticConvergesToConstantReturn) {
  ControllerConfig cfg = small_config();
  cfg.horizon = 2;
  cfg.discount = 0.5;
  cfg.slow_critic_interval = 1;
  cfg.critic_lr = 1e-3;
  Controller c(cfg, 3, 2, 16);
  Rng rng(17);
  const LatentState start = echo_state(rng, 32);
  const ConstantReward dyn(0.5f);  // fixed point 0.5 / (1 - 0.5) = 1
  for (int i = 0; i < 5000; ++i) c.update(dyn, start, rng);
  const Array v = c.value(ParamView(c.critic(), ParamMode::kFrozen), model::state_features(start)).value();
  for (float x : v.data()) EXPECT_NEAR(x, 1.0, 1e-2);
}

TEST(Update, ActorMovesTowardZeroAction) {
  ControllerConfig cfg = small_config();
  cfg.entropy_scale = 0.0;
  cfg.actor_lr = 1e-3;
  cfg.critic_lr = 1e-3;
  Controller c(cfg, 3, 2, 18);
  // Start far from the optimum: mean bias 1.5 on both action dims.
  Var bias = c.actor().get("actor.2.b");
  bias.mutable_value()[0] = 1.5f;
  bias.mutable_value()[1] = 1.5f;
  Rng rng(19);
  const ActionEcho dyn;
  auto mean_abs_action = [&] {
    Rng probe(20);
    const Array a = c.act(echo_state(probe, 256), probe, true);
    double acc = 0;
    for (float x : a.data()) acc += std::fabs(x);
    return acc / static_cast<double>(a.size());
  };
  const double before = mean_abs_action();
  for (int i = 0; i < 1500; ++i) c.update(dyn, echo_state(rng, 16), rng);
  const double after = mean_abs_action();
  EXPECT_GT(before, 0.8);
  EXPECT_LT(after, 0.1);
}

TEST(Update, SlowCriticChangesOnlyAtSync) {
  Controller c(small_config(), 3, 2, 21);
  Rng rng(22);
  const ActionEcho dyn;
  ParamSet initial("copy");
  Rng unused(0);
  model::add_mlp(initial, "critic", 3, {32, 32, 1}, unused);
  initial.copy_values_from(c.slow_critic());
  for (int i = 0; i < 99; ++i) c.update(dyn, echo_state(rng, 8), rng);
  EXPECT_TRUE(same_values(c.slow_critic(), initial));
  EXPECT_FALSE(same_values(c.critic(), initial));
  c.update(dyn, echo_state(rng, 8), rng);
  EXPECT_EQ(c.updates(), 100);
  EXPECT_TRUE(same_values(c.slow_critic(), c.critic()));
  initial.copy_values_from(c.slow_critic());
  c.update(dyn, echo_state(rng, 8), rng);
  EXPECT_TRUE(same_values(c.slow_critic(), initial));
  EXPECT_FALSE(same_values(c.critic(), initial));
}

TEST(Update, CheckpointRoundTripContinuesBitwise) {
  Controller a(small_config(), 3, 2, 23);
  Rng rng(24);
  const ActionEcho dyn;
  for (int i = 0; i < 5; ++i) a.update(dyn, echo_state(rng, 4), rng);
  ad::Checkpoint ckpt;
  a.write_to(ckpt);
  Controller b(small_config(), 3, 2, 999);
  b.read_from(ckpt);
  EXPECT_EQ(b.updates(), 5);
  Rng ra(25), rb(25);
  const LatentState st = echo_state(ra, 4);
  rb = ra;
  const ControllerStats sa = a.update(dyn, st, ra);
  const ControllerStats sb = b.update(dyn, st, rb);
  EXPECT_EQ(sa.actor_loss, sb.actor_loss);
  EXPECT_EQ(sa.critic_loss, sb.critic_loss);
  EXPECT_TRUE(same_values(a.actor(), b.actor()));
  EXPECT_TRUE(same_values(a.critic(), b.critic()));

  ad::Checkpoint missing;
  EXPECT_THROW(b.read_from(missing), ConfigError);
}

TEST(Config, Validation) {
  ControllerConfig c;
  c.horizon = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ControllerConfig{};
  c.discount = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ControllerConfig{};
  c.lambda = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ControllerConfig{};
  c.slow_critic_interval = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_NO_THROW(ControllerConfig{}.validate());
}

}  // namespace
}  // namespace recore::control
