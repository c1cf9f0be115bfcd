#include "recore/autodiff/graph.hpp"

#include <algorithm>
#include <atomic>
#include <string>
#include <unordered_set>

#include "recore/common/error.hpp"

namespace recore::ad {

namespace {
std::atomic<std::uint64_t> g_node_counter{1};
std::atomic<bool> g_finite_checks{true};
}  // namespace

std::uint64_t next_node_id() { return g_node_counter.fetch_add(1, std::memory_order_relaxed); }

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }
bool finite_checks_enabled() { return g_finite_checks.load(); }

template <typename T>
BasicArray<T>& Node<T>::ensure_grad() {
  if (grad.empty() || grad.shape() != value.shape()) grad = BasicArray<T>(value.shape(), T(0));
  return grad;
}

template <typename T>
void Node<T>::zero_grad() {
  if (!grad.empty()) grad.fill(T(0));
}

template <typename T>
BasicVar<T> leaf(BasicArray<T> value, bool requires_grad) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->id = next_node_id();
  return BasicVar<T>(std::move(node));
}

template <typename T>
BasicVar<T> make_node(const char* op, BasicArray<T> value,
                      std::vector<std::shared_ptr<Node<T>>> parents,
                      std::function<void(Node<T>&)> backward) {
  if (finite_checks_enabled() && !value.all_finite()) {
    throw NonFiniteError(std::string("non-finite output from primitive '") + op + "' with shape " +
                         to_string(value.shape()));
  }
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->op = op;
  node->id = next_node_id();
  node->requires_grad =
      std::any_of(parents.begin(), parents.end(), [](const auto& p) { return p->requires_grad; });
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return BasicVar<T>(std::move(node));
}

template <typename T>
void backward(const BasicVar<T>& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " + to_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack{loss.node()};
  seen.insert(loss.node());
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(), [](const Node<T>* a, const Node<T>* b) { return a->id > b->id; });

  // Interior gradients are scratch space; only leaves accumulate across calls.
  for (Node<T>* n : order) {
    if (!n->parents.empty()) n->zero_grad();
  }
  loss.node()->ensure_grad()[0] += T(1);
  for (Node<T>* n : order) {
    if (n->backward && n->has_grad()) n->backward(*n);
  }
  if (finite_checks_enabled()) {
    for (Node<T>* n : order) {
      if (n->has_grad() && !n->grad.all_finite()) {
        throw NonFiniteError(std::string("non-finite gradient at primitive '") + n->op + "'");
      }
    }
  }
}

template struct Node<float>;
template struct Node<double>;
template BasicVar<float> leaf(BasicArray<float>, bool);
template BasicVar<double> leaf(BasicArray<double>, bool);
template BasicVar<float> make_node(const char*, BasicArray<float>, std::vector<std::shared_ptr<Node<float>>>,
                                   std::function<void(Node<float>&)>);
template BasicVar<double> make_node(const char*, BasicArray<double>, std::vector<std::shared_ptr<Node<double>>>,
                                    std::function<void(Node<double>&)>);
template void backward(const BasicVar<float>&);
template void backward(const BasicVar<double>&);

}  // namespace recore::ad
