#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "recore/harness/agent.hpp"
#include "recore/harness/config.hpp"
#include "recore/harness/evaluate.hpp"
#include "recore/harness/replay.hpp"

namespace recore::harness {

// One line of metrics.csv. Update rows carry the losses, eval rows carry
// SR/SPL; the other fields stay zero.
struct MetricsRow {
  std::string kind;  // "update" or "eval"
  std::uint64_t seed = 0;
  std::int64_t env_step = 0;
  std::int64_t update_step = 0;
  model::LossParts wm;
  double wm_grad_norm = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double imagined_return = 0.0;
  std::string split;
  double sr = 0.0;
  double spl = 0.0;
  std::string per_scene;
  double wall_seconds = 0.0;
};

std::string csv_header();
std::string to_csv(const MetricsRow& row);

// World model and controller built from a finalized config.
struct AgentModels {
  std::unique_ptr<model::WorldModel> wm;
  std::unique_ptr<control::Controller> ctrl;
};
AgentModels build_models(const RunConfig& cfg);

// ckpt file: world model, controller, counters and every config key under
// "cfg.<key>" meta entries.
void save_agent_checkpoint(const std::filesystem::path& path, const RunConfig& cfg, const model::WorldModel& wm,
                           const control::Controller& ctrl, std::int64_t env_step, std::int64_t update_step);

struct LoadedCheckpoint {
  RunConfig cfg;
  AgentModels models;
  std::int64_t env_step = 0;
  std::int64_t update_step = 0;
};
// Rebuilds the models from the stored config.
LoadedCheckpoint load_agent_checkpoint(const std::filesystem::path& path);
// Loads into existing models; a checkpoint of another architecture throws
// ConfigError.
void load_agent_checkpoint(const std::filesystem::path& path, model::WorldModel& wm, control::Controller& ctrl);

// Interleaved collect/train loop with a single collector.
class Trainer {
 public:
  // `out_dir` receives metrics.csv and the checkpoints; empty disables files.
  Trainer(RunConfig cfg, std::filesystem::path out_dir);

  const RunConfig& config() const { return cfg_; }
  model::WorldModel& world_model() { return *models_.wm; }
  control::Controller& controller() { return *models_.ctrl; }
  const ReplayBuffer& replay() const { return replay_; }
  std::int64_t env_steps() const { return env_step_; }
  std::int64_t updates() const { return updates_; }
  const std::vector<MetricsRow>& rows() const { return rows_; }

  // Runs until total_env_steps, then evaluates once more and writes the final
  // checkpoint.
  void run();
  // Advances by up to `n` env steps (training and evaluating on schedule).
  void advance(std::int64_t n);
  MetricsRow evaluate_now();
  std::filesystem::path checkpoint_now(const std::string& name) const;

 private:
  void train_step();
  void record(MetricsRow row);
  double seconds() const;

  RunConfig cfg_;
  std::filesystem::path out_dir_;
  AgentModels models_;
  std::optional<aug::StyleAugmenter> augmenter_;
  ReplayBuffer replay_;
  env::TexWorld world_;
  env::TexturePack pack_;
  std::vector<env::Scene> scenes_;
  LearnedAgent agent_;

  Rng env_rng_;
  Rng act_rng_;
  Rng sample_rng_;
  Rng wm_rng_;
  Rng ctrl_rng_;

  env::Observation obs_;
  bool in_episode_ = false;
  bool agent_tracking_ = false;
  std::int64_t env_step_ = 0;
  std::int64_t updates_ = 0;
  std::int64_t evals_ = 0;
  std::vector<MetricsRow> rows_;
  std::int64_t start_ns_ = 0;
};

// Convenience wrapper: Trainer(cfg, out_dir).run().
std::vector<MetricsRow> run_training(const RunConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace recore::harness
