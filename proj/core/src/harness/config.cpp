#include "recore/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "recore/common/error.hpp"

namespace recore::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("'" + key + "': cannot parse '" + text + "'");
  return v;
}

template <typename T>
std::string format_number(T v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("'" + key + "': expected true or false, got '" + text + "'");
}

const char* transform_name(aug::Transform t) {
  switch (t) {
    case aug::Transform::kJitter: return "jitter";
    case aug::Transform::kColor: return "color";
    case aug::Transform::kGray: return "gray";
    case aug::Transform::kBlur: return "blur";
    case aug::Transform::kCutout: return "cutout";
  }
  return "?";
}

aug::Transform transform_from_string(const std::string& key, const std::string& s) {
  for (auto t : {aug::Transform::kJitter, aug::Transform::kColor, aug::Transform::kGray, aug::Transform::kBlur,
                 aug::Transform::kCutout}) {
    if (s == transform_name(t)) return t;
  }
  throw ConfigError("'" + key + "': unknown transform '" + s + "'");
}

struct Field {
  std::string key;
  std::function<std::string(RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T, typename Access>
Field number(std::string key, Access access) {
  return {key, [access](RunConfig& c) { return format_number(static_cast<T>(access(c))); },
          [access, key](RunConfig& c, const std::string& v) { access(c) = parse_number<T>(key, v); }};
}

template <typename Access>
Field boolean(std::string key, Access access) {
  return {key, [access](RunConfig& c) { return std::string(access(c) ? "true" : "false"); },
          [access, key](RunConfig& c, const std::string& v) { access(c) = parse_bool(key, v); }};
}

template <typename T, typename Access>
Field list(std::string key, Access access) {
  return {key,
          [access](RunConfig& c) {
            std::string out;
            for (const auto& x : access(c)) out += (out.empty() ? "" : ",") + format_number(static_cast<T>(x));
            return out;
          },
          [access, key](RunConfig& c, const std::string& v) {
            auto& dst = access(c);
            dst.clear();
            for (const auto& item : split_list(v)) dst.push_back(parse_number<T>(key, item));
          }};
}

#define RC_FIELD(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(number<std::uint64_t>("run.seed", RC_FIELD(seed)));
    f.push_back(number<std::int64_t>("run.total_env_steps", RC_FIELD(total_env_steps)));
    f.push_back(number<std::int64_t>("run.prefill_steps", RC_FIELD(prefill_steps)));
    f.push_back(number<int>("run.train_every", RC_FIELD(train_every)));
    f.push_back(number<int>("run.batch_size", RC_FIELD(batch_size)));
    f.push_back(number<int>("run.sequence_length", RC_FIELD(sequence_length)));
    f.push_back(number<std::int64_t>("run.replay_capacity", RC_FIELD(replay_capacity)));
    f.push_back(number<std::int64_t>("run.eval_every", RC_FIELD(eval_every)));
    f.push_back(number<int>("run.eval_episodes", RC_FIELD(eval_episodes)));
    f.push_back({"run.eval_split", [](RunConfig& c) { return std::string(to_string(c.eval_split)); },
                 [](RunConfig& c, const std::string& v) { c.eval_split = eval_split_from_string(v); }});
    f.push_back(number<std::int64_t>("run.checkpoint_every", RC_FIELD(checkpoint_every)));
    f.push_back(boolean("run.log_wall_clock", RC_FIELD(log_wall_clock)));
    f.push_back(list<std::uint64_t>("run.train_scenes", RC_FIELD(train_scenes)));
    f.push_back(list<std::uint64_t>("run.test_scenes", RC_FIELD(test_scenes)));
    f.push_back({"run.ablation", [](RunConfig& c) { return std::string(to_string(c.ablation)); },
                 [](RunConfig& c, const std::string& v) { c.ablation = ablation_from_string(v); }});

    f.push_back(number<int>("env.scene.width", RC_FIELD(env.scene.width)));
    f.push_back(number<int>("env.scene.height", RC_FIELD(env.scene.height)));
    f.push_back(number<double>("env.scene.cell_size", RC_FIELD(env.scene.cell_size)));
    f.push_back(number<double>("env.scene.obstacle_density", RC_FIELD(env.scene.obstacle_density)));
    f.push_back(number<int>("env.render.height", RC_FIELD(env.render.height)));
    f.push_back(number<int>("env.render.width", RC_FIELD(env.render.width)));
    f.push_back(number<double>("env.render.fov", RC_FIELD(env.render.fov)));
    f.push_back(number<double>("env.render.max_range", RC_FIELD(env.render.max_range)));
    f.push_back(number<double>("env.r_max", RC_FIELD(env.r_max)));
    f.push_back(number<double>("env.f_max", RC_FIELD(env.f_max)));
    f.push_back(number<double>("env.success_radius", RC_FIELD(env.success_radius)));
    f.push_back(number<double>("env.r_success", RC_FIELD(env.r_success)));
    f.push_back(number<double>("env.k_prog", RC_FIELD(env.k_prog)));
    f.push_back(number<double>("env.k_time", RC_FIELD(env.k_time)));
    f.push_back(number<int>("env.t_max", RC_FIELD(env.t_max)));
    f.push_back(number<double>("env.d_min", RC_FIELD(env.d_min)));

    f.push_back(number<int>("wm.latent_dims", RC_FIELD(wm.latent_dims)));
    f.push_back(number<int>("wm.latent_classes", RC_FIELD(wm.latent_classes)));
    f.push_back(number<int>("wm.units", RC_FIELD(wm.units)));
    f.push_back(list<int>("wm.enc_channels", RC_FIELD(wm.enc_channels)));
    f.push_back(list<int>("wm.enc_kernels", RC_FIELD(wm.enc_kernels)));
    f.push_back(number<int>("wm.enc_stride", RC_FIELD(wm.enc_stride)));
    f.push_back(list<int>("wm.dec_channels", RC_FIELD(wm.dec_channels)));
    f.push_back(list<int>("wm.dec_kernels", RC_FIELD(wm.dec_kernels)));
    f.push_back(number<int>("wm.dec_stride", RC_FIELD(wm.dec_stride)));
    f.push_back(number<int>("wm.dec_pad", RC_FIELD(wm.dec_pad)));
    f.push_back(list<int>("wm.task_mlp", RC_FIELD(wm.task_mlp)));
    f.push_back(number<int>("wm.head_layers", RC_FIELD(wm.head_layers)));
    f.push_back(number<int>("wm.head_units", RC_FIELD(wm.head_units)));
    f.push_back(number<double>("wm.kl_scale", RC_FIELD(wm.kl_scale)));
    f.push_back(number<double>("wm.free_bits", RC_FIELD(wm.free_bits)));
    f.push_back(number<double>("wm.lr", RC_FIELD(wm.lr)));
    f.push_back(number<double>("wm.grad_clip", RC_FIELD(wm.grad_clip)));
    f.push_back(number<double>("wm.ema_momentum", RC_FIELD(wm.ema_momentum)));

    f.push_back(number<int>("ctrl.horizon", RC_FIELD(ctrl.horizon)));
    f.push_back(number<double>("ctrl.discount", RC_FIELD(ctrl.discount)));
    f.push_back(number<double>("ctrl.lambda", RC_FIELD(ctrl.lambda)));
    f.push_back(number<double>("ctrl.actor_lr", RC_FIELD(ctrl.actor_lr)));
    f.push_back(number<double>("ctrl.critic_lr", RC_FIELD(ctrl.critic_lr)));
    f.push_back(number<int>("ctrl.slow_critic_interval", RC_FIELD(ctrl.slow_critic_interval)));
    f.push_back(number<double>("ctrl.entropy_scale", RC_FIELD(ctrl.entropy_scale)));
    f.push_back(number<double>("ctrl.grad_clip", RC_FIELD(ctrl.grad_clip)));
    f.push_back(number<int>("ctrl.layers", RC_FIELD(ctrl.layers)));
    f.push_back(number<int>("ctrl.units", RC_FIELD(ctrl.units)));
    f.push_back(number<double>("ctrl.min_log_std", RC_FIELD(ctrl.min_log_std)));
    f.push_back(number<double>("ctrl.max_log_std", RC_FIELD(ctrl.max_log_std)));

    f.push_back(number<int>("aug.pad_range", RC_FIELD(aug.pad_range)));
    f.push_back(number<double>("aug.hue_delta", RC_FIELD(aug.hue_delta)));
    f.push_back(number<double>("aug.brightness_delta", RC_FIELD(aug.brightness_delta)));
    f.push_back(number<double>("aug.contrast_delta", RC_FIELD(aug.contrast_delta)));
    f.push_back(number<double>("aug.saturation_delta", RC_FIELD(aug.saturation_delta)));
    f.push_back(number<double>("aug.blur_sigma_min", RC_FIELD(aug.blur_sigma_min)));
    f.push_back(number<double>("aug.blur_sigma_max", RC_FIELD(aug.blur_sigma_max)));
    f.push_back(number<int>("aug.cutout_min", RC_FIELD(aug.cutout_min)));
    f.push_back(number<int>("aug.cutout_max", RC_FIELD(aug.cutout_max)));
    f.push_back(number<double>("aug.p_jitter", RC_FIELD(aug.p_jitter)));
    f.push_back(number<double>("aug.p_color", RC_FIELD(aug.p_color)));
    f.push_back(number<double>("aug.p_gray", RC_FIELD(aug.p_gray)));
    f.push_back(number<double>("aug.p_blur", RC_FIELD(aug.p_blur)));
    f.push_back(number<double>("aug.p_cutout", RC_FIELD(aug.p_cutout)));
    f.push_back({"aug.order",
                 [](RunConfig& c) {
                   std::string out;
                   for (auto t : c.aug.order) out += (out.empty() ? "" : ",") + std::string(transform_name(t));
                   return out;
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.aug.order.clear();
                   for (const auto& item : split_list(v)) c.aug.order.push_back(transform_from_string("aug.order", item));
                 }});
    return f;
  }();
  return table;
}

#undef RC_FIELD

}  // namespace

const char* to_string(Ablation a) {
  switch (a) {
    case Ablation::kFull: return "full";
    case Ablation::kNoCl: return "no-cl";
    case Ablation::kNoClWithDa: return "no-cl+da";
    case Ablation::kNoD: return "no-d";
    case Ablation::kNoDWithI: return "no-d+i";
  }
  return "?";
}

Ablation ablation_from_string(const std::string& s) {
  for (auto a : {Ablation::kFull, Ablation::kNoCl, Ablation::kNoClWithDa, Ablation::kNoD, Ablation::kNoDWithI}) {
    if (s == to_string(a)) return a;
  }
  throw ConfigError("unknown ablation '" + s + "' (full, no-cl, no-cl+da, no-d, no-d+i)");
}

const char* to_string(EvalSplit s) {
  switch (s) {
    case EvalSplit::kTrain: return "train";
    case EvalSplit::kOodTexture: return "ood-texture";
    case EvalSplit::kOodScene: return "ood-scene";
  }
  return "?";
}

EvalSplit eval_split_from_string(const std::string& s) {
  for (auto e : {EvalSplit::kTrain, EvalSplit::kOodTexture, EvalSplit::kOodScene}) {
    if (s == to_string(e)) return e;
  }
  throw ConfigError("unknown split '" + s + "' (train, ood-texture, ood-scene)");
}

void RunConfig::finalize() {
  wm.image_height = env.render.height;
  wm.image_width = env.render.width;
  wm.task_dim = env::kTaskDim;
  wm.action_dim = 2;
  wm.contrastive = ablation == Ablation::kFull || ablation == Ablation::kNoD || ablation == Ablation::kNoDWithI;
  wm.augment = ablation != Ablation::kNoCl;
  wm.aux = ablation == Ablation::kNoD ? model::AuxHead::kNone
           : ablation == Ablation::kNoDWithI ? model::AuxHead::kRgb
                                             : model::AuxHead::kDepth;
  validate();
}

void RunConfig::validate() const {
  if (total_env_steps < 0) throw ConfigError("run.total_env_steps must be >= 0");
  if (prefill_steps < 0) throw ConfigError("run.prefill_steps must be >= 0");
  if (train_every < 1) throw ConfigError("run.train_every must be >= 1");
  if (batch_size < 1 || sequence_length < 1) throw ConfigError("run.batch_size and run.sequence_length must be >= 1");
  if (wm.contrastive && batch_size < 2) throw ConfigError("run.batch_size must be >= 2 with the contrastive loss");
  if (sequence_length > env.t_max + 1) {
    throw ConfigError("run.sequence_length " + std::to_string(sequence_length) + " exceeds the longest episode (" +
                      std::to_string(env.t_max + 1) + " entries)");
  }
  if (replay_capacity < env.t_max + 1) throw ConfigError("run.replay_capacity must hold at least one full episode");
  if (eval_every < 0 || checkpoint_every < 0) throw ConfigError("run.eval_every and run.checkpoint_every must be >= 0");
  if (eval_episodes < 1) throw ConfigError("run.eval_episodes must be >= 1");
  if (train_scenes.empty() || test_scenes.empty()) throw ConfigError("run.train_scenes and run.test_scenes must be non-empty");
  if (env.t_max < 1 || !(env.r_max > 0) || !(env.f_max > 0)) throw ConfigError("env limits must be positive");
  wm.validate();
  ctrl.validate();
  if (wm.augment) aug.validate(env.render.height, env.render.width);
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (f.key == key) {
      f.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : fields()) out.emplace_back(f.key, f.get(copy));
  return out;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    try {
      set_key(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string dump_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

std::vector<RunConfig> ablation_matrix(const RunConfig& base) {
  std::vector<RunConfig> out;
  for (auto a : {Ablation::kFull, Ablation::kNoCl, Ablation::kNoClWithDa, Ablation::kNoD, Ablation::kNoDWithI}) {
    RunConfig c = base;
    c.ablation = a;
    c.finalize();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace recore::harness
