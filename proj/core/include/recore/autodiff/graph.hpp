#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "recore/autodiff/array.hpp"

namespace recore::ad {

// One vertex of the define-by-run graph. Nodes are created in increasing
// id order, so sorting reachable nodes by descending id yields a valid
// reverse topological order.
template <typename T>
struct Node {
  BasicArray<T> value;
  BasicArray<T> grad;  // allocated lazily, always shaped like value
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  bool requires_grad = false;
  std::uint64_t id = 0;

  // Allocates a zero gradient the first time it is needed.
  BasicArray<T>& ensure_grad();
  bool has_grad() const { return !grad.empty(); }
  void zero_grad();
};

// Shared handle to a graph node. Copies alias the same node.
template <typename T>
class BasicVar {
 public:
  BasicVar() = default;
  explicit BasicVar(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  const BasicArray<T>& value() const { return node_->value; }
  BasicArray<T>& mutable_value() { return node_->value; }
  // Gradient, or an empty array when nothing flowed into this node.
  const BasicArray<T>& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  std::int64_t size() const { return node_->value.size(); }
  std::int64_t dim(int axis) const { return node_->value.dim(axis); }
  bool requires_grad() const { return node_->requires_grad; }
  const char* op() const { return node_->op; }
  bool valid() const { return static_cast<bool>(node_); }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

using Var = BasicVar<float>;
using Var64 = BasicVar<double>;

std::uint64_t next_node_id();

// Process-wide switch for the finite-value check applied to every op output.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

// Trainable (or not) leaf holding `value`.
template <typename T>
BasicVar<T> leaf(BasicArray<T> value, bool requires_grad);

// Leaf that never receives gradient.
template <typename T>
BasicVar<T> constant(BasicArray<T> value) {
  return leaf(std::move(value), false);
}

// Builds an op node. When no parent requires grad the parents and the
// backward rule are dropped, so gradient-free paths keep no graph alive.
template <typename T>
BasicVar<T> make_node(const char* op, BasicArray<T> value,
                      std::vector<std::shared_ptr<Node<T>>> parents,
                      std::function<void(Node<T>&)> backward);

// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
// reachable node that requires grad; leaves keep theirs until zeroed.
template <typename T>
void backward(const BasicVar<T>& loss);

extern template struct Node<float>;
extern template struct Node<double>;

}  // namespace recore::ad
