#include "recore/model/world_model.hpp"

#include <cmath>
#include <sstream>

#include "recore/common/error.hpp"

namespace recore::model {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("world model config: " + what);
}

bool all_positive(const std::vector<int>& v) {
  for (int x : v) {
    if (x <= 0) return false;
  }
  return !v.empty();
}

Var flatten_rows(const Var& x) {
  return ad::reshape(x, {x.dim(0), x.size() / x.dim(0)});
}

}  // namespace

const char* to_string(AuxHead h) {
  switch (h) {
    case AuxHead::kDepth: return "depth";
    case AuxHead::kNone: return "none";
    case AuxHead::kRgb: return "rgb";
  }
  return "?";
}

AuxHead aux_head_from_string(const std::string& s) {
  if (s == "depth") return AuxHead::kDepth;
  if (s == "none") return AuxHead::kNone;
  if (s == "rgb") return AuxHead::kRgb;
  throw ConfigError("unknown aux head '" + s + "' (expected depth, none or rgb)");
}

void WorldModelConfig::validate() const {
  require(image_height > 0 && image_width > 0, "image extents must be positive");
  require(task_dim > 0 && action_dim > 0, "task_dim and action_dim must be positive");
  require(latent_dims > 0 && latent_classes > 1, "need latent_dims >= 1 and latent_classes >= 2");
  require(units > 0 && head_layers > 0 && head_units > 0, "layer widths must be positive");
  require(all_positive(enc_channels) && enc_channels.size() == enc_kernels.size() && all_positive(enc_kernels),
          "enc_channels and enc_kernels must be non-empty, positive and of equal length");
  require(all_positive(dec_channels) && dec_channels.size() == dec_kernels.size() && all_positive(dec_kernels),
          "dec_channels and dec_kernels must be non-empty, positive and of equal length");
  require(enc_stride > 0 && dec_stride > 0 && dec_pad >= 0, "strides must be positive and dec_pad >= 0");
  require(all_positive(task_mlp), "task_mlp sizes must be positive");
  require(kl_scale >= 0 && free_bits >= 0, "kl_scale and free_bits must be >= 0");
  require(lr > 0 && grad_clip >= 0, "lr must be positive and grad_clip >= 0");
  require(ema_momentum >= 0 && ema_momentum <= 1, "ema_momentum must be in [0, 1]");
}

Var state_features(const LatentState& st) {
  return ad::concat<float>({st.h, flatten_rows(st.s)}, 1);
}

LatentState detach(const LatentState& st) {
  return {ad::detach(st.h), ad::detach(st.s), ad::detach(st.logits)};
}

LatentState slice_batch(const LatentState& st, std::int64_t start, std::int64_t n) {
  return {ad::slice(st.h, 0, start, n), ad::slice(st.s, 0, start, n), ad::slice(st.logits, 0, start, n)};
}

LatentState concat_batch(const std::vector<LatentState>& parts) {
  std::vector<Var> h, s, l;
  for (const auto& p : parts) {
    h.push_back(p.h);
    s.push_back(p.s);
    l.push_back(p.logits);
  }
  return {ad::concat(h, 0), ad::concat(s, 0), ad::concat(l, 0)};
}

WorldModel::WorldModel(WorldModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), params_("wm") {
  cfg_.validate();
  Rng rng(seed);

  int h = cfg_.image_height, w = cfg_.image_width, c = 3;
  for (std::size_t i = 0; i < cfg_.enc_kernels.size(); ++i) {
    const int k = cfg_.enc_kernels[i], o = cfg_.enc_channels[i];
    require(h >= k && w >= k, "encoder layer " + std::to_string(i) + " kernel exceeds its input");
    h = (h - k) / cfg_.enc_stride + 1;
    w = (w - k) / cfg_.enc_stride + 1;
    const std::string name = "enc.conv" + std::to_string(i);
    params_.add(name + ".w", glorot({o, c, k, k}, c * k * k, o * k * k, rng));
    params_.add(name + ".b", Array({o}));
    c = o;
  }
  conv_h_ = h;
  conv_w_ = w;
  conv_dim_ = c * h * w;
  add_mlp(params_, "enc.task", cfg_.task_dim, cfg_.task_mlp, rng);

  const int dc = cfg_.latent_dims * cfg_.latent_classes, u = cfg_.units;
  add_dense(params_, "rssm.in", dc + cfg_.action_dim, u, rng);
  params_.add("rssm.gru.wx", glorot({u, 3 * u}, u, 3 * u, rng));
  params_.add("rssm.gru.wh", glorot({u, 3 * u}, u, 3 * u, rng));
  params_.add("rssm.gru.b", Array({3 * u}));
  add_mlp(params_, "rssm.prior", u, {u, dc}, rng);
  add_mlp(params_, "rssm.post", u + feature_dim(), {u, dc}, rng);

  if (cfg_.aux != AuxHead::kNone) {
    // Smallest start extent whose upsampled output covers the target.
    int dh = cfg_.image_height, dw = cfg_.image_width;
    for (auto it = cfg_.dec_kernels.rbegin(); it != cfg_.dec_kernels.rend(); ++it) {
      const int k = *it, s = cfg_.dec_stride, p = cfg_.dec_pad;
      dh = std::max(1, (dh + 2 * p - k + s - 1) / s + 1);
      dw = std::max(1, (dw + 2 * p - k + s - 1) / s + 1);
    }
    dec_h0_ = dh;
    dec_w0_ = dw;
    add_dense(params_, "dec.in", state_dim(), cfg_.dec_channels[0] * dh * dw, rng);
    for (std::size_t i = 0; i < cfg_.dec_kernels.size(); ++i) {
      const int k = cfg_.dec_kernels[i], ci = cfg_.dec_channels[i];
      const int co = i + 1 < cfg_.dec_channels.size() ? cfg_.dec_channels[i + 1] : cfg_.aux_channels();
      const std::string name = "dec.tconv" + std::to_string(i);
      params_.add(name + ".w", glorot({ci, co, k, k}, ci * k * k, co * k * k, rng));
      params_.add(name + ".b", Array({co}));
    }
  }

  std::vector<int> head(static_cast<std::size_t>(cfg_.head_layers), cfg_.head_units);
  head.push_back(1);
  add_mlp(params_, "reward", state_dim(), head, rng);

  if (cfg_.contrastive) params_.add("contrastive.W", glorot({conv_dim_, conv_dim_}, conv_dim_, conv_dim_, rng));
  params_.init_ema();
}

Var WorldModel::conv_features(const ParamView& p, const Var& rgb) const {
  const Shape expect{rgb.dim(0), 3, cfg_.image_height, cfg_.image_width};
  if (rgb.shape() != expect) {
    throw ShapeError("encode: shape mismatch " + ad::to_string(rgb.shape()) + " vs " + ad::to_string(expect));
  }
  Var x = ad::add_scalar(rgb, -0.5f);
  for (std::size_t i = 0; i < cfg_.enc_kernels.size(); ++i) {
    const std::string name = "enc.conv" + std::to_string(i);
    x = ad::elu(ad::conv2d(x, p(name + ".w"), p(name + ".b"), cfg_.enc_stride, 0));
  }
  return flatten_rows(x);
}

Var WorldModel::encode(const ParamView& p, const Var& rgb, const Var& task) const {
  if (task.value().rank() != 2 || task.dim(0) != rgb.dim(0) || task.dim(1) != cfg_.task_dim) {
    throw ShapeError("encode: task shape mismatch " + ad::to_string(task.shape()) + " vs " +
                     ad::to_string(Shape{rgb.dim(0), cfg_.task_dim}));
  }
  const Var t = ad::elu(mlp(p, "enc.task", task, cfg_.task_mlp.size()));
  return ad::concat<float>({conv_features(p, rgb), t}, 1);
}

Var WorldModel::encode(const ParamView& p, std::span<const Image> rgb, const Array& task) const {
  return encode(p, image_batch(rgb), ad::constant(task));
}

LatentState WorldModel::initial_state(std::int64_t n) const {
  const Shape s{n, cfg_.latent_dims, cfg_.latent_classes};
  return {ad::constant(Array({n, cfg_.units})), ad::constant(Array(s)), ad::constant(Array(s))};
}

Var WorldModel::recurrent(const ParamView& p, const LatentState& prev, const Var& action) const {
  if (action.value().rank() != 2 || action.dim(0) != prev.batch() || action.dim(1) != cfg_.action_dim) {
    throw ShapeError("rssm: action shape mismatch " + ad::to_string(action.shape()) + " vs " +
                     ad::to_string(Shape{prev.batch(), cfg_.action_dim}));
  }
  const Var x = ad::elu(dense(p, "rssm.in", ad::concat<float>({flatten_rows(prev.s), action}, 1)));
  Var h = ad::gru_cell(x, prev.h, p("rssm.gru.wx"), p("rssm.gru.wh"), p("rssm.gru.b"));
  if (!h.value().all_finite()) throw NonFiniteError("rssm: non-finite recurrent state");
  return h;
}

Var WorldModel::prior_logits(const ParamView& p, const Var& h) const {
  return ad::reshape(mlp(p, "rssm.prior", h, 2), {h.dim(0), cfg_.latent_dims, cfg_.latent_classes});
}

Var WorldModel::posterior_logits(const ParamView& p, const Var& h, const Var& feature) const {
  if (feature.value().rank() != 2 || feature.dim(1) != feature_dim() || feature.dim(0) != h.dim(0)) {
    throw ShapeError("rssm: feature shape mismatch " + ad::to_string(feature.shape()) + " vs " +
                     ad::to_string(Shape{h.dim(0), feature_dim()}));
  }
  const Var x = ad::concat<float>({h, feature}, 1);
  return ad::reshape(mlp(p, "rssm.post", x, 2), {h.dim(0), cfg_.latent_dims, cfg_.latent_classes});
}

ObserveResult WorldModel::observe(const ParamView& p, const LatentState& prev, const Var& action,
                                  const Var& feature, Rng& rng) const {
  const Var h = recurrent(p, prev, action);
  const Var logits = posterior_logits(p, h, feature);
  return {{h, ad::straight_through_sample(logits, rng), logits}, prior_logits(p, h)};
}

LatentState WorldModel::imagine(const ParamView& p, const LatentState& prev, const Var& action, Rng& rng) const {
  const Var h = recurrent(p, prev, action);
  const Var logits = prior_logits(p, h);
  return {h, ad::straight_through_sample(logits, rng), logits};
}

Var WorldModel::decode(const ParamView& p, const LatentState& st) const {
  if (cfg_.aux == AuxHead::kNone) throw StateError("decode: the world model has no decoder head");
  const auto n = st.batch();
  Var x = ad::elu(dense(p, "dec.in", state_features(st)));
  x = ad::reshape(x, {n, cfg_.dec_channels[0], dec_h0_, dec_w0_});
  const std::size_t layers = cfg_.dec_kernels.size();
  for (std::size_t i = 0; i < layers; ++i) {
    const std::string name = "dec.tconv" + std::to_string(i);
    x = ad::conv_transpose2d(x, p(name + ".w"), p(name + ".b"), cfg_.dec_stride, cfg_.dec_pad, 0);
    x = i + 1 < layers ? ad::elu(x) : ad::softplus(x);
  }
  if (x.dim(2) != cfg_.image_height) x = ad::slice(x, 2, 0, cfg_.image_height);
  if (x.dim(3) != cfg_.image_width) x = ad::slice(x, 3, 0, cfg_.image_width);
  return x;
}

Var WorldModel::reward(const ParamView& p, const LatentState& st) const {
  const Var r = mlp(p, "reward", state_features(st), static_cast<std::size_t>(cfg_.head_layers) + 1);
  return ad::reshape(r, {st.batch()});
}

std::string WorldModel::signature() const {
  std::ostringstream os;
  auto list = [&os](const char* key, const std::vector<int>& v) {
    os << key << '=';
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    os << ' ';
  };
  os << "image=" << cfg_.image_height << 'x' << cfg_.image_width << " task=" << cfg_.task_dim
     << " action=" << cfg_.action_dim << " latent=" << cfg_.latent_dims << 'x' << cfg_.latent_classes
     << " units=" << cfg_.units << ' ';
  list("enc", cfg_.enc_channels);
  list("enc_k", cfg_.enc_kernels);
  list("dec", cfg_.dec_channels);
  list("dec_k", cfg_.dec_kernels);
  list("task_mlp", cfg_.task_mlp);
  os << "stride=" << cfg_.enc_stride << '/' << cfg_.dec_stride << " dec_pad=" << cfg_.dec_pad
     << " head=" << cfg_.head_layers << 'x' << cfg_.head_units << " aux=" << to_string(cfg_.aux)
     << " contrastive=" << cfg_.contrastive;
  return os.str();
}

Var infonce_loss(const Var& queries, const Var& keys, const Var& w, std::span<const int> positive,
                 std::span<const int> excluded) {
  const auto b = queries.dim(0), k = keys.dim(0);
  if (b < 2) throw ShapeError("infonce_loss: need at least 2 queries for negatives, got " + std::to_string(b));
  if (static_cast<std::int64_t>(positive.size()) != b || static_cast<std::int64_t>(excluded.size()) != b) {
    throw ShapeError("infonce_loss: one positive and one excluded index per query");
  }
  Array mask({b, k}), pick({b, k});
  for (std::int64_t i = 0; i < b; ++i) {
    const int pos = positive[static_cast<std::size_t>(i)], ex = excluded[static_cast<std::size_t>(i)];
    if (pos < 0 || pos >= k || ex >= k || ex == pos) throw ShapeError("infonce_loss: bad key index");
    pick[i * k + pos] = 1.0f;
    if (ex >= 0) mask[i * k + ex] = -1e9f;
  }
  const Var logits = ad::add(ad::matmul(ad::matmul(queries, w), ad::transpose(keys)), ad::constant(std::move(mask)));
  const Var picked = ad::sum(ad::mul(ad::log_softmax(logits), ad::constant(std::move(pick))));
  return ad::scale(picked, -1.0f / static_cast<float>(b));
}

Var infonce_loss(const Var& queries, const Var& keys, const Var& w) {
  const auto b = static_cast<int>(queries.dim(0));
  if (keys.dim(0) != 2 * b) {
    throw ShapeError("infonce_loss: expected " + std::to_string(2 * b) + " keys, got " + std::to_string(keys.dim(0)));
  }
  std::vector<int> pos(static_cast<std::size_t>(b)), ex(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    pos[static_cast<std::size_t>(i)] = b + i;
    ex[static_cast<std::size_t>(i)] = i;
  }
  return infonce_loss(queries, keys, w, pos, ex);
}

Var kl_term(const Var& post_logits, const Var& prior_logits, double free_bits) {
  if (post_logits.shape() != prior_logits.shape() || post_logits.value().rank() != 3) {
    throw ShapeError("kl_term: shape mismatch " + ad::to_string(post_logits.shape()) + " vs " +
                     ad::to_string(prior_logits.shape()));
  }
  const Var logp = ad::log_softmax(post_logits);
  const Var diff = ad::sub(logp, ad::log_softmax(prior_logits));
  Var kl = ad::sum_axis(ad::mul(ad::softmax(post_logits), diff), 2);  // [N, D]
  if (free_bits > 0) kl = ad::clamp_min(kl, static_cast<float>(free_bits));
  return ad::mean(ad::sum_axis(kl, 1));
}

Var unit_normal_nll(const Var& mean, const Var& target) {
  if (mean.shape() != target.shape()) {
    throw ShapeError("unit_normal_nll: shape mismatch " + ad::to_string(mean.shape()) + " vs " +
                     ad::to_string(target.shape()));
  }
  const Var sq = ad::sum(ad::square(ad::sub(mean, target)));
  return ad::scale(sq, 0.5f / static_cast<float>(mean.dim(0)));
}

LossOutput world_model_loss(const WorldModel& wm, const SequenceBatch& batch, const aug::StyleAugmenter* aug,
                            Rng& rng) {
  const WorldModelConfig& cfg = wm.config();
  const auto n = static_cast<std::int64_t>(batch.size());
  const std::int64_t bsz = batch.batch;
  if (n == 0 || batch.rgb.size() != batch.size()) throw ShapeError("world_model_loss: rgb count does not match B x L");
  if (cfg.aux == AuxHead::kDepth && batch.depth.size() != batch.size()) {
    throw ShapeError("world_model_loss: depth count does not match B x L");
  }
  if (batch.task.shape() != Shape{n, cfg.task_dim} || batch.action.shape() != Shape{n, cfg.action_dim} ||
      batch.reward.shape() != Shape{n}) {
    throw ShapeError("world_model_loss: task/action/reward arrays do not match B x L");
  }
  if (cfg.augment && aug == nullptr) throw StateError("world_model_loss: augmentation enabled but no augmenter given");
  if (cfg.contrastive && bsz < 2) throw ConfigError("world_model_loss: the contrastive term needs B >= 2");

  std::vector<Image> view_a, view_b;
  if (cfg.augment) {
    std::tie(view_a, view_b) = aug::batch_intervene(batch.rgb, *aug, rng);
  } else {
    view_a = batch.rgb;
    if (cfg.contrastive) view_b = batch.rgb;
  }

  const ParamView online = wm.view(ParamMode::kOnline);
  const Var input_a = image_batch(view_a);
  const Var conv_a = wm.conv_features(online, input_a);
  const Var task_f = ad::elu(mlp(online, "enc.task", ad::constant(batch.task), cfg.task_mlp.size()));
  const Var feat = ad::concat<float>({conv_a, task_f}, 1);

  LossOutput out;
  Var l_q;
  if (cfg.contrastive) {
    const ParamView ema = wm.view(ParamMode::kEma);
    const Var keys_a = wm.conv_features(ema, image_batch(view_a));
    const Var keys_b = wm.conv_features(ema, image_batch(view_b));
    const Var w = online("contrastive.W");
    std::vector<Var> terms;
    for (int t = 0; t < batch.length; ++t) {
      const std::int64_t off = t * bsz;
      const Var keys = ad::concat<float>({ad::slice(keys_a, 0, off, bsz), ad::slice(keys_b, 0, off, bsz)}, 0);
      terms.push_back(ad::reshape(infonce_loss(ad::slice(conv_a, 0, off, bsz), keys, w), {1}));
    }
    l_q = ad::mean(ad::concat(terms, 0));
  }

  const Var actions = ad::constant(batch.action);
  LatentState state = wm.initial_state(bsz);
  std::vector<LatentState> posts;
  std::vector<Var> priors;
  for (int t = 0; t < batch.length; ++t) {
    const std::int64_t off = t * bsz;
    ObserveResult r = wm.observe(online, state, ad::slice(actions, 0, off, bsz), ad::slice(feat, 0, off, bsz), rng);
    priors.push_back(r.prior_logits);
    posts.push_back(r.post);
    state = r.post;
  }
  const LatentState post = concat_batch(posts);
  const Var l_kl = kl_term(post.logits, ad::concat(priors, 0), cfg.free_bits);
  const Var l_r = unit_normal_nll(wm.reward(online, post), ad::constant(batch.reward));

  Var total = ad::add(l_r, ad::scale(l_kl, static_cast<float>(cfg.kl_scale)));
  if (cfg.contrastive) total = ad::add(total, l_q);
  if (cfg.aux != AuxHead::kNone) {
    const Var target = cfg.aux == AuxHead::kDepth ? image_batch(batch.depth) : image_batch(batch.rgb);
    const Var l_aux = unit_normal_nll(wm.decode(online, post), target);
    total = ad::add(total, l_aux);
    out.parts.aux = l_aux.value().item();
    out.aux_target = target;
  }

  out.parts.contrastive = cfg.contrastive ? l_q.value().item() : 0.0;
  out.parts.reward = l_r.value().item();
  out.parts.kl = l_kl.value().item();
  out.parts.total = total.value().item();
  if (!std::isfinite(out.parts.total)) {
    std::ostringstream os;
    os << "world_model_loss: non-finite total (contrastive=" << out.parts.contrastive << " aux=" << out.parts.aux
       << " reward=" << out.parts.reward << " kl=" << out.parts.kl << ')';
    throw NonFiniteError(os.str());
  }
  out.total = total;
  out.posterior = detach(post);
  out.encoder_input = input_a;
  return out;
}

UpdateResult world_model_update(WorldModel& wm, const SequenceBatch& batch, const aug::StyleAugmenter* aug,
                                Rng& rng) {
  const WorldModelConfig& cfg = wm.config();
  wm.params().zero_grad();
  LossOutput loss = world_model_loss(wm, batch, aug, rng);
  ad::backward(loss.total);
  UpdateResult r;
  r.parts = loss.parts;
  r.posterior = std::move(loss.posterior);
  loss.total = Var();
  r.adam = ad::adam_step(wm.params(), static_cast<float>(cfg.lr), static_cast<float>(cfg.grad_clip));
  if (cfg.contrastive) wm.params().ema_update(static_cast<float>(cfg.ema_momentum));
  return r;
}

}  // namespace recore::model
