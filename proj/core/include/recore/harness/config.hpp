#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "recore/augment/style.hpp"
#include "recore/control/controller.hpp"
#include "recore/env/texworld.hpp"
#include "recore/model/world_model.hpp"

namespace recore::harness {

enum class Ablation {
  kFull,        // contrastive loss, augmentation, depth head
  kNoCl,        // no contrastive loss, no augmentation
  kNoClWithDa,  // no contrastive loss, augmented encoder inputs
  kNoD,         // contrastive loss, no auxiliary head
  kNoDWithI,    // contrastive loss, RGB reconstruction head
};

const char* to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);

enum class EvalSplit { kTrain, kOodTexture, kOodScene };

const char* to_string(EvalSplit s);
EvalSplit eval_split_from_string(const std::string& s);

struct RunConfig {
  std::uint64_t seed = 0;
  std::int64_t total_env_steps = 100000;
  std::int64_t prefill_steps = 2000;
  int train_every = 4;  // env steps per gradient step
  int batch_size = 50;
  int sequence_length = 50;
  std::int64_t replay_capacity = 300000;  // stored steps

  std::int64_t eval_every = 0;  // env steps between evaluations, 0 = only at the end
  int eval_episodes = 10;       // per scene
  EvalSplit eval_split = EvalSplit::kOodTexture;
  // Checkpoints at multiples of this many env steps and at the end; 0 = end only.
  std::int64_t checkpoint_every = 0;
  bool log_wall_clock = false;  // off keeps metrics.csv reproducible

  std::vector<std::uint64_t> train_scenes{101, 102, 103, 104, 105};
  std::vector<std::uint64_t> test_scenes{201, 202, 203};

  Ablation ablation = Ablation::kFull;

  env::EnvConfig env;
  model::WorldModelConfig wm;
  control::ControllerConfig ctrl;
  aug::AugmentConfig aug;

  // Copies the render size into the world-model config, applies the
  // ablation flags and checks every section. Throws ConfigError.
  void finalize();
  void validate() const;
};

// Sets one dotted key, e.g. "wm.kl_scale" or "run.train_scenes" (comma list).
// Unknown keys and malformed values throw ConfigError.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);
// Every key, in a fixed order, with its current value.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg);

// `key = value` lines; '#' starts a comment. The result is not finalized.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
std::string dump_config(const RunConfig& cfg);

// The five configurations of the ablation study, identical apart from the
// ablation flag.
std::vector<RunConfig> ablation_matrix(const RunConfig& base);

}  // namespace recore::harness
