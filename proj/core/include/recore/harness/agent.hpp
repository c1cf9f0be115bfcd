#pragma once

#include "recore/control/controller.hpp"
#include "recore/env/texworld.hpp"
#include "recore/model/world_model.hpp"

namespace recore::harness {

class Agent {
 public:
  virtual ~Agent() = default;
  // Start of an episode.
  virtual void reset() = 0;
  // `env` is exposed for privileged baselines such as the oracle; learned
  // agents only look at `obs.rgb` and `obs.task`.
  virtual env::Action act(const env::Observation& obs, const env::TexWorld& env, Rng& rng) = 0;
};

class OracleAgent final : public Agent {
 public:
  void reset() override {}
  env::Action act(const env::Observation&, const env::TexWorld& env, Rng&) override { return env::oracle_action(env); }
};

class RandomAgent final : public Agent {
 public:
  void reset() override {}
  env::Action act(const env::Observation&, const env::TexWorld& env, Rng& rng) override {
    return env::random_action(env.config(), rng);
  }
};

// Filters the latent state with the world-model posterior on raw RGB and the
// task vector, then queries the actor. Holds parameter snapshots; call
// refresh() after the parameters change.
class LearnedAgent final : public Agent {
 public:
  LearnedAgent(const model::WorldModel& wm, const control::Controller& ctrl, const env::EnvConfig& env,
               bool deterministic);

  void refresh();
  void reset() override;
  env::Action act(const env::Observation& obs, const env::TexWorld& env, Rng& rng) override;

  const model::LatentState& state() const { return state_; }
  bool deterministic() const { return deterministic_; }

 private:
  const model::WorldModel* wm_;
  const control::Controller* ctrl_;
  double r_max_;
  double f_max_;
  bool deterministic_;
  model::ParamView wm_view_;
  model::ParamView actor_view_;
  model::LatentState state_;
  ad::Array prev_action_;
};

}  // namespace recore::harness
