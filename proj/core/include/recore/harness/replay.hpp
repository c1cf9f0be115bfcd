#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "recore/common/rng.hpp"
#include "recore/env/texworld.hpp"
#include "recore/model/world_model.hpp"

namespace recore::harness {

// Whole-episode FIFO bounded by the number of stored entries.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::int64_t capacity_steps);

  std::int64_t capacity() const { return capacity_; }
  std::int64_t steps() const { return steps_; }
  std::size_t num_episodes() const { return episodes_.size(); }
  const env::EpisodeRecord& episode(std::size_t i) const { return episodes_[i]; }
  // Episodes added since construction, evicted ones included.
  std::int64_t total_added() const { return added_; }

  // Evicts the oldest episodes until the new one fits. An episode larger than
  // the whole capacity, or one without stored observations, throws.
  void add(env::EpisodeRecord episode);

  struct Slice {
    std::size_t episode;  // index into the current contents
    int start;
  };
  // B slices of length L: episodes drawn uniformly (with replacement) among
  // those with at least L entries, then a uniform start offset.
  std::vector<Slice> sample_slices(int batch, int length, Rng& rng) const;

  // Decoded time-major batch. Actions are mapped to [-1, 1] with the env
  // limits; entry 0 of an episode has the zero action.
  model::SequenceBatch sample(int batch, int length, Rng& rng, const env::EnvConfig& env) const;
  model::SequenceBatch gather(const std::vector<Slice>& slices, int length, const env::EnvConfig& env) const;

 private:
  std::int64_t capacity_;
  std::int64_t steps_ = 0;
  std::int64_t added_ = 0;
  std::deque<env::EpisodeRecord> episodes_;
};

}  // namespace recore::harness
