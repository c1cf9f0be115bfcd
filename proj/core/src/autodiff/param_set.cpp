#include "recore/autodiff/param_set.hpp"

#include <cmath>

#include "recore/common/error.hpp"

namespace recore::ad {

const Var& ParamSet::add(const std::string& name, Array init) {
  if (entries_.count(name)) throw StateError("parameter '" + name + "' already registered in " + name_);
  if (ema_) throw StateError("cannot add '" + name + "' after init_ema()");
  return entries_.emplace(name, leaf(std::move(init), true)).first->second;
}

const Var& ParamSet::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("unknown parameter '" + name + "' in " + name_);
  return it->second;
}

std::int64_t ParamSet::num_scalars() const {
  std::int64_t n = 0;
  for (const auto& [_, v] : entries_) n += v.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& [_, v] : entries_) v.node()->zero_grad();
}

void ParamSet::init_ema() {
  std::map<std::string, Array> shadow;
  for (const auto& [name, v] : entries_) shadow.emplace(name, v.value());
  ema_ = std::move(shadow);
}

const Array& ParamSet::ema(const std::string& name) const {
  if (!ema_) throw StateError("EMA shadow not initialized for " + name_);
  auto it = ema_->find(name);
  if (it == ema_->end()) throw std::out_of_range("no EMA shadow for '" + name + "'");
  return it->second;
}

void ParamSet::ema_update(float momentum) {
  if (!ema_) throw StateError("EMA shadow not initialized for " + name_);
  if (ema_->size() != entries_.size()) throw StateError("EMA shadow and online entries differ in count");
  for (const auto& [name, v] : entries_) {
    auto it = ema_->find(name);
    if (it == ema_->end()) throw StateError("EMA shadow missing entry '" + name + "'");
    if (it->second.shape() != v.shape()) throw ShapeError("EMA shadow shape mismatch for '" + name + "'");
  }
  const float keep = momentum;
  const float take = 1.0f - momentum;
  for (const auto& [name, v] : entries_) {
    Array& s = ema_->at(name);
    const Array& online = v.value();
    if (momentum == 0.0f) {
      s = online;
      continue;
    }
    if (momentum == 1.0f) continue;
    for (std::int64_t i = 0; i < s.size(); ++i) s[i] = keep * s[i] + take * online[i];
  }
}

void ParamSet::write_to(Checkpoint& ckpt) const {
  for (const auto& [name, v] : entries_) ckpt.tensors[name] = v.value();
  if (ema_) {
    for (const auto& [name, a] : *ema_) ckpt.tensors["ema:" + name] = a;
  }
  for (const auto& [name, m] : moments_) {
    ckpt.tensors["adam.m:" + name] = m.m;
    ckpt.tensors["adam.v:" + name] = m.v;
  }
  ckpt.counters[name_ + ".adam.step"] = adam_steps_;
}

void ParamSet::read_from(const Checkpoint& ckpt) {
  auto fetch = [&](const std::string& key, const Shape& shape) -> const Array& {
    auto it = ckpt.tensors.find(key);
    if (it == ckpt.tensors.end()) throw ConfigError("checkpoint is missing tensor '" + key + "'");
    if (it->second.shape() != shape) {
      throw ConfigError("checkpoint tensor '" + key + "' has shape " + to_string(it->second.shape()) +
                        ", model expects " + to_string(shape));
    }
    return it->second;
  };
  for (auto& [name, v] : entries_) v.mutable_value() = fetch(name, v.shape());
  if (ema_) {
    for (auto& [name, a] : *ema_) a = fetch("ema:" + name, a.shape());
  }
  moments_.clear();
  for (const auto& [name, v] : entries_) {
    const auto mk = "adam.m:" + name;
    if (!ckpt.tensors.count(mk)) continue;
    moments_[name] = Moments{fetch(mk, v.shape()), fetch("adam.v:" + name, v.shape())};
  }
  auto it = ckpt.counters.find(name_ + ".adam.step");
  adam_steps_ = it == ckpt.counters.end() ? 0 : it->second;
}

void ParamSet::copy_values_from(const ParamSet& other) {
  for (auto& [name, v] : entries_) {
    const Var& src = other.get(name);
    if (src.shape() != v.shape()) throw ShapeError("copy_values_from: shape mismatch for '" + name + "'");
    v.mutable_value() = src.value();
  }
}

}  // namespace recore::ad
