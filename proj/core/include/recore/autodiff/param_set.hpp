#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "recore/autodiff/array.hpp"
#include "recore/autodiff/checkpoint.hpp"
#include "recore/autodiff/graph.hpp"

namespace recore::ad {

// Named trainable arrays plus optional EMA shadows and the Adam moments of
// the one optimizer that owns this set.
class ParamSet {
 public:
  explicit ParamSet(std::string name = "params") : name_(std::move(name)) {}

  const std::string& name() const { return name_; }

  // Registers a trainable leaf. Names are dotted paths and must be unique.
  const Var& add(const std::string& name, Array init);
  const Var& get(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const std::map<std::string, Var>& entries() const { return entries_; }
  std::int64_t num_scalars() const;

  void zero_grad();

  // Copies every entry into a shadow array. Must be called after the last add().
  void init_ema();
  bool has_ema() const { return ema_.has_value(); }
  const Array& ema(const std::string& name) const;
  // shadow <- momentum * shadow + (1 - momentum) * online, per scalar.
  void ema_update(float momentum);
  // shadow <- online.
  void ema_copy_from_online() { ema_update(0.0f); }

  struct Moments {
    Array m;
    Array v;
  };
  std::map<std::string, Moments>& adam_moments() { return moments_; }
  const std::map<std::string, Moments>& adam_moments() const { return moments_; }
  std::int64_t adam_steps() const { return adam_steps_; }
  void set_adam_steps(std::int64_t s) { adam_steps_ = s; }

  // Serialization under the set's entry names, "ema:" and "adam.m:" /
  // "adam.v:" prefixes and a "<set>.adam.step" counter.
  void write_to(Checkpoint& ckpt) const;
  // Shapes must match exactly; a missing or mis-shaped entry throws.
  void read_from(const Checkpoint& ckpt);

  // Copies values (not gradients or optimizer state) from another set with
  // identical names and shapes.
  void copy_values_from(const ParamSet& other);

 private:
  std::string name_;
  std::map<std::string, Var> entries_;
  std::optional<std::map<std::string, Array>> ema_;
  std::map<std::string, Moments> moments_;
  std::int64_t adam_steps_ = 0;
};

}  // namespace recore::ad
