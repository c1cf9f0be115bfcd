#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "recore/augment/style.hpp"
#include "recore/autodiff/adam.hpp"
#include "recore/model/nn.hpp"

namespace recore::model {

// Auxiliary reconstruction target of the decoder head.
enum class AuxHead { kDepth, kNone, kRgb };

const char* to_string(AuxHead h);
AuxHead aux_head_from_string(const std::string& s);

struct WorldModelConfig {
  int image_height = 48;
  int image_width = 64;
  int task_dim = 8;
  int action_dim = 2;

  int latent_dims = 16;     // D
  int latent_classes = 16;  // C
  int units = 256;          // recurrent state and hidden widths

  std::vector<int> enc_channels{16, 32, 64, 128};
  std::vector<int> enc_kernels{4, 4, 4, 4};
  int enc_stride = 2;
  // dec_channels[0] is the depth of the reshaped dense output; layer i maps
  // dec_channels[i] to dec_channels[i + 1] (or the target channels).
  std::vector<int> dec_channels{128, 64, 32, 16};
  std::vector<int> dec_kernels{4, 4, 4, 4};
  int dec_stride = 2;
  int dec_pad = 1;
  std::vector<int> task_mlp{32, 32};
  int head_layers = 4;
  int head_units = 128;

  double kl_scale = 1.0;
  double free_bits = 1.0;  // nats per latent dimension, 0 disables

  bool contrastive = true;  // InfoNCE term and EMA key encoder
  bool augment = true;      // encoder sees style-intervened RGB
  AuxHead aux = AuxHead::kDepth;

  double lr = 3e-4;
  double grad_clip = 100.0;
  double ema_momentum = 0.999;

  void validate() const;
  int aux_channels() const { return aux == AuxHead::kRgb ? 3 : 1; }
};

// Batch-major latent state. s holds one one-hot row per latent dimension.
struct LatentState {
  Var h;       // [N, units]
  Var s;       // [N, D, C]
  Var logits;  // [N, D, C]

  std::int64_t batch() const { return h.dim(0); }
};

// concat(h, flattened s) -> [N, units + D * C]
Var state_features(const LatentState& st);
LatentState detach(const LatentState& st);
// Rows [start, start + n) of every field.
LatentState slice_batch(const LatentState& st, std::int64_t start, std::int64_t n);
LatentState concat_batch(const std::vector<LatentState>& parts);

struct ObserveResult {
  LatentState post;
  Var prior_logits;  // from the same recurrent state
};

class WorldModel {
 public:
  WorldModel(WorldModelConfig cfg, std::uint64_t seed);

  const WorldModelConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  ParamView view(ParamMode mode) const { return ParamView(params_, mode); }

  int conv_dim() const { return conv_dim_; }
  int feature_dim() const { return conv_dim_ + cfg_.task_mlp.back(); }
  int state_dim() const { return cfg_.units + cfg_.latent_dims * cfg_.latent_classes; }

  // rgb [N, 3, H, W] in [0, 1] -> flattened conv features [N, conv_dim].
  Var conv_features(const ParamView& p, const Var& rgb) const;
  // Encoder feature: concat(conv features, task MLP) [N, feature_dim].
  Var encode(const ParamView& p, const Var& rgb, const Var& task) const;
  Var encode(const ParamView& p, std::span<const Image> rgb, const Array& task) const;

  // h = 0, s = 0.
  LatentState initial_state(std::int64_t n) const;
  Var recurrent(const ParamView& p, const LatentState& prev, const Var& action) const;
  Var prior_logits(const ParamView& p, const Var& h) const;
  Var posterior_logits(const ParamView& p, const Var& h, const Var& feature) const;

  ObserveResult observe(const ParamView& p, const LatentState& prev, const Var& action, const Var& feature,
                        Rng& rng) const;
  LatentState imagine(const ParamView& p, const LatentState& prev, const Var& action, Rng& rng) const;

  // [N, aux_channels, H, W]; throws StateError when the head is disabled.
  Var decode(const ParamView& p, const LatentState& st) const;
  // Reward mean [N].
  Var reward(const ParamView& p, const LatentState& st) const;

  // Architecture summary used to reject mismatched checkpoints.
  std::string signature() const;

 private:
  WorldModelConfig cfg_;
  ParamSet params_;
  int conv_dim_ = 0;
  int conv_h_ = 0;
  int conv_w_ = 0;
  int dec_h0_ = 0;
  int dec_w0_ = 0;
};

// Bilinear InfoNCE over queries [B, F] and keys [K, F]. Query i scores every
// key except excluded[i] (pass -1 to keep all); positive[i] is its target.
// Mean over queries of -log softmax at the positive.
Var infonce_loss(const Var& queries, const Var& keys, const Var& w, std::span<const int> positive,
                 std::span<const int> excluded);
// Pairing used by the world model: keys = [view a; view b], query i is
// positive with key B + i and does not score its own view-a key.
Var infonce_loss(const Var& queries, const Var& keys, const Var& w);

// Batch mean of sum_d max(KL(post_d || prior_d), free_bits) over logits
// [N, D, C].
Var kl_term(const Var& post_logits, const Var& prior_logits, double free_bits = 0.0);

// Gaussian negative log-likelihood with unit variance, constant dropped:
// batch mean of 0.5 * sum of squared errors over non-batch axes.
Var unit_normal_nll(const Var& mean, const Var& target);

// B sequences of length L in time-major order: entry t * B + b.
struct SequenceBatch {
  int batch = 0;
  int length = 0;
  std::vector<Image> rgb;    // raw RGB in [0, 1]
  std::vector<Image> depth;  // meters, one channel
  Array task;                // [L * B, task_dim]
  Array action;              // [L * B, action_dim], scaled to [-1, 1]; the action that led to the entry
  Array reward;              // [L * B]

  std::size_t size() const { return static_cast<std::size_t>(batch) * static_cast<std::size_t>(length); }
};

struct LossParts {
  double total = 0.0;
  double contrastive = 0.0;  // InfoNCE term
  double aux = 0.0;          // depth regression, or the RGB reconstruction term
  double reward = 0.0;       // reward regression
  double kl = 0.0;           // KL term before the scale
};

struct LossOutput {
  Var total;
  LossParts parts;
  LatentState posterior;  // detached, time-major [L * B]
  Var encoder_input;      // RGB the online encoder saw
  Var aux_target;         // decoder target, invalid without a head
};

// Joint loss of one replay batch. `aug` may be null when the config disables
// augmentation.
LossOutput world_model_loss(const WorldModel& wm, const SequenceBatch& batch, const aug::StyleAugmenter* aug,
                            Rng& rng);

struct UpdateResult {
  LossParts parts;
  ad::AdamStats adam;
  LatentState posterior;
};

// Loss, backward, one Adam step and (with the contrastive term on) the EMA
// update of the key encoder.
UpdateResult world_model_update(WorldModel& wm, const SequenceBatch& batch, const aug::StyleAugmenter* aug,
                                Rng& rng);

}  // namespace recore::model
