#include "recore/harness/training.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "recore/common/error.hpp"

namespace recore::harness {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

std::string csv_header() {
  return "kind,seed,env_step,update_step,wm_total,wm_contrastive,wm_aux,wm_reward,wm_kl,wm_grad_norm,"
         "actor_loss,critic_loss,imagined_return,split,sr,spl,per_scene,wall_seconds";
}

std::string to_csv(const MetricsRow& r) {
  std::string out = r.kind;
  out += "," + std::to_string(r.seed) + "," + std::to_string(r.env_step) + "," + std::to_string(r.update_step);
  for (double v : {r.wm.total, r.wm.contrastive, r.wm.aux, r.wm.reward, r.wm.kl, r.wm_grad_norm, r.actor_loss,
                   r.critic_loss, r.imagined_return}) {
    out += "," + fmt(v);
  }
  out += "," + r.split + "," + fmt(r.sr) + "," + fmt(r.spl) + "," + r.per_scene + "," + fmt(r.wall_seconds);
  return out;
}

AgentModels build_models(const RunConfig& cfg) {
  AgentModels m;
  m.wm = std::make_unique<model::WorldModel>(cfg.wm, derive_seed(cfg.seed, 6));
  m.ctrl = std::make_unique<control::Controller>(cfg.ctrl, m.wm->state_dim(), cfg.wm.action_dim,
                                                 derive_seed(cfg.seed, 7));
  return m;
}

void save_agent_checkpoint(const std::filesystem::path& path, const RunConfig& cfg, const model::WorldModel& wm,
                           const control::Controller& ctrl, std::int64_t env_step, std::int64_t update_step) {
  ad::Checkpoint ckpt;
  for (const auto& [k, v] : config_entries(cfg)) ckpt.meta["cfg." + k] = v;
  ckpt.meta["wm.signature"] = wm.signature();
  wm.params().write_to(ckpt);
  ctrl.write_to(ckpt);
  ckpt.counters["run.env_step"] = env_step;
  ckpt.counters["run.update_step"] = update_step;
  ad::save_checkpoint(path, ckpt);
}

namespace {

void load_models(const ad::Checkpoint& ckpt, model::WorldModel& wm, control::Controller& ctrl) {
  const auto it = ckpt.meta.find("wm.signature");
  if (it == ckpt.meta.end()) throw ConfigError("checkpoint has no world-model signature");
  if (it->second != wm.signature()) {
    throw ConfigError("checkpoint architecture '" + it->second + "' does not match the model '" + wm.signature() +
                      "'");
  }
  wm.params().read_from(ckpt);
  ctrl.read_from(ckpt);
}

}  // namespace

LoadedCheckpoint load_agent_checkpoint(const std::filesystem::path& path) {
  const ad::Checkpoint ckpt = ad::load_checkpoint(path);
  LoadedCheckpoint out;
  for (const auto& [k, v] : ckpt.meta) {
    if (k.rfind("cfg.", 0) == 0) set_key(out.cfg, k.substr(4), v);
  }
  out.cfg.finalize();
  out.models = build_models(out.cfg);
  load_models(ckpt, *out.models.wm, *out.models.ctrl);
  out.env_step = ckpt.counters.count("run.env_step") ? ckpt.counters.at("run.env_step") : 0;
  out.update_step = ckpt.counters.count("run.update_step") ? ckpt.counters.at("run.update_step") : 0;
  return out;
}

void load_agent_checkpoint(const std::filesystem::path& path, model::WorldModel& wm, control::Controller& ctrl) {
  load_models(ad::load_checkpoint(path), wm, ctrl);
}

Trainer::Trainer(RunConfig cfg, std::filesystem::path out_dir)
    : cfg_((cfg.finalize(), std::move(cfg))),
      out_dir_(std::move(out_dir)),
      models_(build_models(cfg_)),
      replay_(cfg_.replay_capacity),
      world_(cfg_.env),
      pack_(env::Split::kTrain),
      agent_(*models_.wm, *models_.ctrl, cfg_.env, false),
      env_rng_(derive_seed(cfg_.seed, 1)),
      act_rng_(derive_seed(cfg_.seed, 2)),
      sample_rng_(derive_seed(cfg_.seed, 3)),
      wm_rng_(derive_seed(cfg_.seed, 4)),
      ctrl_rng_(derive_seed(cfg_.seed, 5)),
      start_ns_(now_ns()) {
  if (cfg_.wm.augment) augmenter_.emplace(cfg_.aug, cfg_.env.render.height, cfg_.env.render.width);
  for (std::uint64_t s : cfg_.train_scenes) scenes_.push_back(env::generate_scene(s, cfg_.env.scene));
  if (!out_dir_.empty()) {
    std::filesystem::create_directories(out_dir_);
    std::ofstream csv(out_dir_ / "metrics.csv", std::ios::trunc);
    if (!csv) throw ConfigError("cannot write " + (out_dir_ / "metrics.csv").string());
    csv << csv_header() << "\n";
  }
}

double Trainer::seconds() const {
  return cfg_.log_wall_clock ? static_cast<double>(now_ns() - start_ns_) * 1e-9 : 0.0;
}

void Trainer::record(MetricsRow row) {
  row.seed = cfg_.seed;
  row.wall_seconds = seconds();
  if (!out_dir_.empty()) {
    std::ofstream csv(out_dir_ / "metrics.csv", std::ios::app);
    csv << to_csv(row) << "\n";
  }
  rows_.push_back(std::move(row));
}

std::filesystem::path Trainer::checkpoint_now(const std::string& name) const {
  if (out_dir_.empty()) return {};
  const auto path = out_dir_ / name;
  save_agent_checkpoint(path, cfg_, *models_.wm, *models_.ctrl, env_step_, updates_);
  return path;
}

void Trainer::train_step() {
  const model::SequenceBatch batch = replay_.sample(cfg_.batch_size, cfg_.sequence_length, sample_rng_, cfg_.env);
  MetricsRow row;
  try {
    const model::UpdateResult r =
        model::world_model_update(*models_.wm, batch, augmenter_ ? &*augmenter_ : nullptr, wm_rng_);
    const control::ControllerStats cs =
        models_.ctrl->update(control::WorldModelDynamics(*models_.wm), r.posterior, ctrl_rng_);
    row.wm = r.parts;
    row.wm_grad_norm = r.adam.grad_norm;
    row.actor_loss = cs.actor_loss;
    row.critic_loss = cs.critic_loss;
    row.imagined_return = cs.imagined_return;
  } catch (const NonFiniteError&) {
    checkpoint_now("ckpt_nan_" + std::to_string(env_step_) + ".bin");
    throw;
  }
  ++updates_;
  agent_.refresh();
  row.kind = "update";
  row.env_step = env_step_;
  row.update_step = updates_;
  record(std::move(row));
}

MetricsRow Trainer::evaluate_now() {
  LearnedAgent eval_agent(*models_.wm, *models_.ctrl, cfg_.env, true);
  const EvalResult res =
      evaluate(eval_agent, cfg_, cfg_.eval_split, cfg_.eval_episodes, derive_seed(cfg_.seed, 1000 + evals_));
  ++evals_;
  MetricsRow row;
  row.kind = "eval";
  row.env_step = env_step_;
  row.update_step = updates_;
  row.split = to_string(cfg_.eval_split);
  row.sr = res.average.sr;
  row.spl = res.average.spl;
  row.per_scene = encode_per_scene(res.per_scene);
  record(row);
  return rows_.back();
}

void Trainer::advance(std::int64_t n) {
  for (std::int64_t i = 0; i < n && env_step_ < cfg_.total_env_steps; ++i) {
    if (!in_episode_) {
      const auto idx = static_cast<std::size_t>(uniform_int(env_rng_, 0, static_cast<std::int64_t>(scenes_.size()) - 1));
      obs_ = world_.reset(scenes_[idx], pack_, env_rng_);
      in_episode_ = true;
      agent_tracking_ = false;
    }
    env::Action action;
    if (env_step_ < cfg_.prefill_steps) {
      action = env::random_action(cfg_.env, act_rng_);
    } else {
      // An episode that began during prefill is filtered from its current frame.
      if (!agent_tracking_) {
        agent_.reset();
        agent_tracking_ = true;
      }
      action = agent_.act(obs_, world_, act_rng_);
    }
    env::StepResult res = world_.step(action);
    obs_ = std::move(res.obs);
    ++env_step_;
    if (res.done) {
      replay_.add(world_.take_record());
      in_episode_ = false;
    }
    if (env_step_ > cfg_.prefill_steps && (env_step_ - cfg_.prefill_steps) % cfg_.train_every == 0) train_step();
    if (cfg_.eval_every > 0 && env_step_ % cfg_.eval_every == 0) evaluate_now();
    if (cfg_.checkpoint_every > 0 && env_step_ % cfg_.checkpoint_every == 0) {
      checkpoint_now("ckpt_" + std::to_string(env_step_) + ".bin");
    }
  }
}

void Trainer::run() {
  advance(cfg_.total_env_steps - env_step_);
  if (cfg_.eval_every == 0 || env_step_ % cfg_.eval_every != 0) evaluate_now();
  if (cfg_.checkpoint_every == 0 || env_step_ % cfg_.checkpoint_every != 0) {
    checkpoint_now("ckpt_" + std::to_string(env_step_) + ".bin");
  }
}

std::vector<MetricsRow> run_training(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  Trainer t(cfg, out_dir);
  t.run();
  return t.rows();
}

}  // namespace recore::harness
