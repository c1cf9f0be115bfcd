#include "recore/harness/replay.hpp"

#include "recore/common/error.hpp"
#include "recore/control/controller.hpp"

namespace recore::harness {

ReplayBuffer::ReplayBuffer(std::int64_t capacity_steps) : capacity_(capacity_steps) {
  if (capacity_steps < 1) throw ConfigError("replay capacity must be >= 1");
}

void ReplayBuffer::add(env::EpisodeRecord episode) {
  const std::int64_t n = episode.size();
  if (n < 1 || !episode.has_observations()) throw StateError("replay: episode has no stored observations");
  if (n > capacity_) {
    throw ConfigError("replay: episode of " + std::to_string(n) + " entries exceeds capacity " +
                      std::to_string(capacity_));
  }
  while (steps_ + n > capacity_) {
    steps_ -= episodes_.front().size();
    episodes_.pop_front();
  }
  steps_ += n;
  ++added_;
  episodes_.push_back(std::move(episode));
}

std::vector<ReplayBuffer::Slice> ReplayBuffer::sample_slices(int batch, int length, Rng& rng) const {
  if (batch < 1 || length < 1) throw ShapeError("replay: batch and length must be >= 1");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < episodes_.size(); ++i) {
    if (episodes_[i].size() >= length) eligible.push_back(i);
  }
  if (eligible.empty()) {
    throw StateError("replay: no stored episode has " + std::to_string(length) +
                     " entries; increase run.prefill_steps or lower run.sequence_length");
  }
  std::vector<Slice> out;
  out.reserve(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    const std::size_t e = eligible[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(eligible.size()) - 1))];
    const int start = static_cast<int>(uniform_int(rng, 0, episodes_[e].size() - length));
    out.push_back({e, start});
  }
  return out;
}

model::SequenceBatch ReplayBuffer::gather(const std::vector<Slice>& slices, int length,
                                          const env::EnvConfig& env) const {
  const int b = static_cast<int>(slices.size());
  model::SequenceBatch out;
  out.batch = b;
  out.length = length;
  const std::int64_t n = static_cast<std::int64_t>(b) * length;
  out.rgb.resize(static_cast<std::size_t>(n));
  out.depth.resize(static_cast<std::size_t>(n));
  out.task = ad::Array({n, env::kTaskDim});
  out.action = ad::Array({n, 2});
  out.reward = ad::Array({n});
  for (int i = 0; i < b; ++i) {
    const Slice& s = slices[static_cast<std::size_t>(i)];
    const env::EpisodeRecord& ep = episodes_.at(s.episode);
    if (s.start < 0 || s.start + length > ep.size()) throw ShapeError("replay: slice leaves its episode");
    for (int t = 0; t < length; ++t) {
      const int src = s.start + t;
      const std::int64_t row = static_cast<std::int64_t>(t) * b + i;
      out.rgb[static_cast<std::size_t>(row)] = ep.rgb_at(src);
      out.depth[static_cast<std::size_t>(row)] = ep.depth_at(src);
      const auto& task = ep.task[static_cast<std::size_t>(src)];
      for (int k = 0; k < env::kTaskDim; ++k) out.task[row * env::kTaskDim + k] = task[static_cast<std::size_t>(k)];
      if (src > 0) {
        const env::Action& a = ep.actions[static_cast<std::size_t>(src)];
        const auto [a0, a1] = control::from_env_action(a.rotation, a.forward, env.r_max, env.f_max);
        out.action[row * 2] = a0;
        out.action[row * 2 + 1] = a1;
      }
      out.reward[row] = ep.rewards[static_cast<std::size_t>(src)];
    }
  }
  return out;
}

model::SequenceBatch ReplayBuffer::sample(int batch, int length, Rng& rng, const env::EnvConfig& env) const {
  return gather(sample_slices(batch, length, rng), length, env);
}

}  // namespace recore::harness
