#include "recore/control/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "recore/common/error.hpp"

namespace recore::control {

namespace {

std::vector<int> hidden(const ControllerConfig& c, int out) {
  std::vector<int> sizes(static_cast<std::size_t>(c.layers), c.units);
  sizes.push_back(out);
  return sizes;
}

Var detached_features(const LatentState& st) { return ad::detach(model::state_features(st)); }

std::string with_step(const std::exception& e, int t) {
  return "imagination step " + std::to_string(t) + ": " + e.what();
}

}  // namespace

void ControllerConfig::validate() const {
  if (horizon < 1) throw ConfigError("ctrl.horizon must be >= 1");
  if (!(discount > 0.0 && discount <= 1.0)) throw ConfigError("ctrl.discount must lie in (0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("ctrl.lambda must lie in [0, 1]");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw ConfigError("ctrl learning rates must be positive");
  if (slow_critic_interval < 1) throw ConfigError("ctrl.slow_critic_interval must be >= 1");
  if (entropy_scale < 0.0) throw ConfigError("ctrl.entropy_scale must be >= 0");
  if (!(grad_clip > 0.0)) throw ConfigError("ctrl.grad_clip must be positive");
  if (layers < 1 || units < 1) throw ConfigError("ctrl.layers and ctrl.units must be >= 1");
  if (!(min_log_std < max_log_std)) throw ConfigError("ctrl.min_log_std must be below ctrl.max_log_std");
}

std::vector<Var> lambda_returns(const std::vector<Var>& rewards, const std::vector<Var>& values, double discount,
                                double lambda) {
  const std::size_t h = rewards.size();
  if (values.size() != h + 1) {
    throw ShapeError("lambda_returns: " + std::to_string(h) + " rewards need " + std::to_string(h + 1) +
                     " values, got " + std::to_string(values.size()));
  }
  std::vector<Var> out(h);
  Var next = values[h];
  for (std::size_t i = h; i-- > 0;) {
    const Var mix = ad::add(ad::scale(values[i + 1], static_cast<float>(1.0 - lambda)),
                            ad::scale(next, static_cast<float>(lambda)));
    next = ad::add(rewards[i], ad::scale(mix, static_cast<float>(discount)));
    out[i] = next;
  }
  return out;
}

std::vector<double> lambda_returns(const std::vector<double>& rewards, const std::vector<double>& values,
                                   double discount, double lambda) {
  const std::size_t h = rewards.size();
  if (values.size() != h + 1) throw ShapeError("lambda_returns: values must have one more entry than rewards");
  std::vector<double> out(h);
  double next = values[h];
  for (std::size_t i = h; i-- > 0;) {
    next = rewards[i] + discount * ((1.0 - lambda) * values[i + 1] + lambda * next);
    out[i] = next;
  }
  return out;
}

EnvAction to_env_action(float a0, float a1, double r_max, double f_max) {
  const double x = std::clamp(static_cast<double>(a0), -1.0, 1.0);
  const double y = std::clamp(static_cast<double>(a1), -1.0, 1.0);
  return {r_max * x, f_max * (y + 1.0) / 2.0};
}

std::pair<float, float> from_env_action(double rotation, double forward, double r_max, double f_max) {
  return {static_cast<float>(rotation / r_max), static_cast<float>(2.0 * forward / f_max - 1.0)};
}

Controller::Controller(ControllerConfig cfg, int state_dim, int action_dim, std::uint64_t seed)
    : cfg_(std::move(cfg)), state_dim_(state_dim), action_dim_(action_dim) {
  cfg_.validate();
  if (state_dim < 1 || action_dim < 1) throw ConfigError("controller needs positive state and action sizes");
  Rng rng(seed);
  model::add_mlp(actor_, "actor", state_dim, hidden(cfg_, 2 * action_dim), rng);
  model::add_mlp(critic_, "critic", state_dim, hidden(cfg_, 1), rng);
  Rng unused(0);
  model::add_mlp(slow_critic_, "critic", state_dim, hidden(cfg_, 1), unused);
  slow_critic_.copy_values_from(critic_);
}

PolicyOutput Controller::policy(const ParamView& p, const Var& features, Rng* rng) const {
  const Var out = model::mlp(p, "actor", features, static_cast<std::size_t>(cfg_.layers) + 1);
  PolicyOutput po;
  po.mean = ad::slice(out, 1, 0, action_dim_);
  const Var raw = ad::slice(out, 1, action_dim_, action_dim_);
  const auto lo = static_cast<float>(cfg_.min_log_std);
  const auto span = static_cast<float>(cfg_.max_log_std - cfg_.min_log_std);
  po.log_std = ad::add_scalar(ad::scale(ad::sigmoid(raw), span), lo);
  if (rng == nullptr) {
    po.action = ad::tanh(po.mean);
    return po;
  }
  Array eps(po.mean.shape());
  for (float& v : eps.data()) v = static_cast<float>(normal(*rng));
  const Var noise = ad::mul(ad::exp(po.log_std), ad::constant(std::move(eps)));
  po.action = ad::tanh(ad::add(po.mean, noise));
  return po;
}

Var Controller::value(const ParamView& p, const Var& features) const {
  const Var v = model::mlp(p, "critic", features, static_cast<std::size_t>(cfg_.layers) + 1);
  return ad::reshape(v, {v.dim(0)});
}

Array Controller::act(const LatentState& st, Rng& rng, bool deterministic) const {
  const ParamView p(actor_, ParamMode::kFrozen);
  return policy(p, detached_features(st), deterministic ? nullptr : &rng).action.value();
}

ImaginedTrajectory Controller::imagine(const ParamView& actor, const LatentDynamics& dyn, const LatentState& start,
                                       Rng& rng) const {
  const ParamView slow(slow_critic_, ParamMode::kFrozen);
  ImaginedTrajectory tr;
  tr.states.push_back(model::detach(start));
  tr.values.push_back(value(slow, model::state_features(tr.states.back())));
  for (int t = 0; t < cfg_.horizon; ++t) {
    try {
      const PolicyOutput po = policy(actor, model::state_features(tr.states.back()), &rng);
      LatentState next = dyn.step(tr.states.back(), po.action, rng);
      tr.reward_means.push_back(dyn.reward(next));
      tr.values.push_back(value(slow, model::state_features(next)));
      tr.actions.push_back(po.action);
      tr.log_stds.push_back(po.log_std);
      tr.states.push_back(std::move(next));
    } catch (const NonFiniteError& e) {
      throw NonFiniteError(with_step(e, t));
    }
  }
  return tr;
}

namespace {

const float kHalfLog2PiE = static_cast<float>(0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e));

}  // namespace

Var Controller::actor_loss(const ImaginedTrajectory& tr, const std::vector<Var>& targets) const {
  // Entropy of the pre-squash Gaussian, summed over action dims.
  const Var entropy = ad::scale(ad::add_scalar(ad::mean(ad::concat(tr.log_stds, 0)), kHalfLog2PiE),
                                static_cast<float>(action_dim_));
  const Var ret = ad::mean(ad::concat(targets, 0));
  return ad::sub(ad::neg(ret), ad::scale(entropy, static_cast<float>(cfg_.entropy_scale)));
}

Var Controller::critic_loss(const ImaginedTrajectory& tr, const std::vector<Var>& targets) const {
  std::vector<Var> feats, tgts;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    feats.push_back(detached_features(tr.states[t]));
    tgts.push_back(ad::detach(targets[t]));
  }
  const ParamView critic(critic_, ParamMode::kOnline);
  const Var err = ad::sub(value(critic, ad::concat(feats, 0)), ad::concat(tgts, 0));
  return ad::scale(ad::mean(ad::square(err)), 0.5f);
}

ControllerStats Controller::update(const LatentDynamics& dyn, const LatentState& start, Rng& rng) {
  ControllerStats stats;
  const ImaginedTrajectory tr = imagine(ParamView(actor_, ParamMode::kOnline), dyn, start, rng);
  const std::vector<Var> targets = lambda_returns(tr.reward_means, tr.values, cfg_.discount, cfg_.lambda);

  double ent = 0.0;
  for (const Var& ls : tr.log_stds) ent += ad::mean(ls).value().item();
  stats.entropy = action_dim_ * (ent / static_cast<double>(tr.log_stds.size()) + kHalfLog2PiE);
  double ret = 0.0;
  for (const Var& v : targets) ret += ad::mean(v).value().item();
  stats.imagined_return = ret / static_cast<double>(targets.size());

  const Var a_loss = actor_loss(tr, targets);
  stats.actor_loss = a_loss.value().item();
  if (!std::isfinite(stats.actor_loss)) throw NonFiniteError("controller: actor loss is not finite");
  actor_.zero_grad();
  ad::backward(a_loss);
  stats.actor_adam = ad::adam_step(actor_, static_cast<float>(cfg_.actor_lr), static_cast<float>(cfg_.grad_clip));

  const Var c_loss = critic_loss(tr, targets);
  stats.critic_loss = c_loss.value().item();
  if (!std::isfinite(stats.critic_loss)) throw NonFiniteError("controller: critic loss is not finite");
  critic_.zero_grad();
  ad::backward(c_loss);
  stats.critic_adam =
      ad::adam_step(critic_, static_cast<float>(cfg_.critic_lr), static_cast<float>(cfg_.grad_clip));

  ++updates_;
  if (updates_ % cfg_.slow_critic_interval == 0) slow_critic_.copy_values_from(critic_);
  return stats;
}

void Controller::write_to(ad::Checkpoint& ckpt) const {
  actor_.write_to(ckpt);
  // Critic and slow critic share entry names, so the critic optimizer state
  // keeps its names and the slow copy goes under its own prefix.
  critic_.write_to(ckpt);
  for (const auto& [name, v] : slow_critic_.entries()) ckpt.tensors["slow:" + name] = v.value();
  ckpt.counters["controller.updates"] = updates_;
}

void Controller::read_from(const ad::Checkpoint& ckpt) {
  actor_.read_from(ckpt);
  critic_.read_from(ckpt);
  for (const auto& [name, v] : slow_critic_.entries()) {
    auto it = ckpt.tensors.find("slow:" + name);
    if (it == ckpt.tensors.end() || it->second.shape() != v.shape()) {
      throw ConfigError("checkpoint has no matching slow critic tensor '" + name + "'");
    }
    Var alias = v;
    alias.mutable_value() = it->second;
  }
  auto it = ckpt.counters.find("controller.updates");
  if (it == ckpt.counters.end()) throw ConfigError("checkpoint is missing counter 'controller.updates'");
  updates_ = it->second;
}

}  // namespace recore::control
