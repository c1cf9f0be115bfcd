#include "recore/harness/agent.hpp"

#include <span>

namespace recore::harness {

LearnedAgent::LearnedAgent(const model::WorldModel& wm, const control::Controller& ctrl, const env::EnvConfig& env,
                           bool deterministic)
    : wm_(&wm),
      ctrl_(&ctrl),
      r_max_(env.r_max),
      f_max_(env.f_max),
      deterministic_(deterministic),
      wm_view_(wm.view(model::ParamMode::kFrozen)),
      actor_view_(ctrl.actor(), model::ParamMode::kFrozen) {
  reset();
}

void LearnedAgent::refresh() {
  wm_view_ = wm_->view(model::ParamMode::kFrozen);
  actor_view_ = model::ParamView(ctrl_->actor(), model::ParamMode::kFrozen);
}

void LearnedAgent::reset() {
  state_ = wm_->initial_state(1);
  prev_action_ = ad::Array({1, 2});
}

env::Action LearnedAgent::act(const env::Observation& obs, const env::TexWorld&, Rng& rng) {
  ad::Array task({1, env::kTaskDim});
  for (int k = 0; k < env::kTaskDim; ++k) task[k] = obs.task[static_cast<std::size_t>(k)];
  const ad::Var feature = wm_->encode(wm_view_, std::span<const Image>(&obs.rgb, 1), task);
  state_ = wm_->observe(wm_view_, state_, ad::constant(prev_action_), feature, rng).post;
  const ad::Array a =
      ctrl_->policy(actor_view_, model::state_features(state_), deterministic_ ? nullptr : &rng).action.value();
  prev_action_ = a;
  const control::EnvAction e = control::to_env_action(a[0], a[1], r_max_, f_max_);
  return {e.rotation, e.forward};
}

}  // namespace recore::harness
