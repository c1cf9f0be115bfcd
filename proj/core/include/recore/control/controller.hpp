#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "recore/autodiff/adam.hpp"
#include "recore/autodiff/checkpoint.hpp"
#include "recore/model/world_model.hpp"

namespace recore::control {

using ad::Array;
using ad::ParamSet;
using ad::Var;
using model::LatentState;
using model::ParamMode;
using model::ParamView;

struct ControllerConfig {
  int horizon = 15;
  double discount = 0.99;
  double lambda = 0.95;
  double actor_lr = 1e-4;
  double critic_lr = 1e-4;
  int slow_critic_interval = 100;
  double entropy_scale = 1e-4;
  double grad_clip = 100.0;

  int layers = 4;
  int units = 128;
  // The raw log-std output is squashed into [min_log_std, max_log_std].
  double min_log_std = -5.0;
  double max_log_std = 1.0;

  void validate() const;
};

// Latent transition and reward model the controller imagines in. Actions are
// in [-1, 1]^action_dim.
class LatentDynamics {
 public:
  virtual ~LatentDynamics() = default;
  virtual LatentState step(const LatentState& st, const Var& action, Rng& rng) const = 0;
  // Reward mean [N] of a state.
  virtual Var reward(const LatentState& st) const = 0;
};

// Imagination through a frozen world model: the parameters are constants but
// gradients flow through the states. The parameters are copied on first use,
// so build a fresh adapter after every world-model update.
class WorldModelDynamics final : public LatentDynamics {
 public:
  explicit WorldModelDynamics(const model::WorldModel& wm) : wm_(&wm), view_(wm.view(ParamMode::kFrozen)) {}
  LatentState step(const LatentState& st, const Var& action, Rng& rng) const override {
    return wm_->imagine(view_, st, action, rng);
  }
  Var reward(const LatentState& st) const override { return wm_->reward(view_, st); }

 private:
  const model::WorldModel* wm_;
  ParamView view_;
};

struct PolicyOutput {
  Var mean;     // pre-squash [N, A]
  Var log_std;  // [N, A]
  Var action;   // tanh-squashed, in [-1, 1]
};

struct ImaginedTrajectory {
  std::vector<LatentState> states;  // H + 1; states[0] is the start
  std::vector<Var> actions;         // H, [N, A]
  std::vector<Var> log_stds;        // H, [N, A]
  std::vector<Var> reward_means;    // H, [N]; reward of states[t + 1]
  std::vector<Var> values;          // H + 1, [N]; slow critic

  int horizon() const { return static_cast<int>(actions.size()); }
};

// targets[t] = r[t] + discount * ((1 - lambda) * values[t + 1] + lambda * targets[t + 1]),
// with targets[H] = values[H]. Returns the H targets.
std::vector<Var> lambda_returns(const std::vector<Var>& rewards, const std::vector<Var>& values, double discount,
                                double lambda);
std::vector<double> lambda_returns(const std::vector<double>& rewards, const std::vector<double>& values,
                                   double discount, double lambda);

// Environment action from a squashed policy output: rotation r_max * a0 and
// forward f_max * (a1 + 1) / 2.
struct EnvAction {
  double rotation = 0.0;
  double forward = 0.0;
};
EnvAction to_env_action(float a0, float a1, double r_max, double f_max);
// Inverse map to [-1, 1]^2, as stored in replay.
std::pair<float, float> from_env_action(double rotation, double forward, double r_max, double f_max);

struct ControllerStats {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double imagined_return = 0.0;  // mean lambda target
  double entropy = 0.0;          // mean Gaussian entropy per step
  ad::AdamStats actor_adam;
  ad::AdamStats critic_adam;
};

class Controller {
 public:
  Controller(ControllerConfig cfg, int state_dim, int action_dim, std::uint64_t seed);

  const ControllerConfig& config() const { return cfg_; }
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }

  ParamSet& actor() { return actor_; }
  const ParamSet& actor() const { return actor_; }
  ParamSet& critic() { return critic_; }
  const ParamSet& critic() const { return critic_; }
  const ParamSet& slow_critic() const { return slow_critic_; }
  std::int64_t updates() const { return updates_; }

  // features [N, state_dim]. A null rng gives the deterministic action tanh(mean).
  PolicyOutput policy(const ParamView& p, const Var& features, Rng* rng) const;
  // Value [N] of features under a critic set (online or slow).
  Var value(const ParamView& p, const Var& features) const;

  // Deployment action for a batch of states with the current actor, no graph.
  Array act(const LatentState& st, Rng& rng, bool deterministic) const;

  // H imagined steps from detached start states. The actor is read through
  // `actor`, the values come from the slow critic.
  ImaginedTrajectory imagine(const ParamView& actor, const LatentDynamics& dyn, const LatentState& start,
                             Rng& rng) const;

  // -mean(targets) - entropy_scale * mean Gaussian entropy. Gradients reach
  // the actor through the imagined states.
  Var actor_loss(const ImaginedTrajectory& tr, const std::vector<Var>& targets) const;
  // 0.5 * mean squared error of the online critic on detached states against
  // detached targets.
  Var critic_loss(const ImaginedTrajectory& tr, const std::vector<Var>& targets) const;

  // One actor step and one critic step on a fresh rollout; syncs the slow
  // critic every slow_critic_interval updates.
  ControllerStats update(const LatentDynamics& dyn, const LatentState& start, Rng& rng);

  void write_to(ad::Checkpoint& ckpt) const;
  void read_from(const ad::Checkpoint& ckpt);

 private:
  ControllerConfig cfg_;
  int state_dim_;
  int action_dim_;
  ParamSet actor_{"actor"};
  ParamSet critic_{"critic"};
  ParamSet slow_critic_{"slow_critic"};
  std::int64_t updates_ = 0;
};

}  // namespace recore::control
