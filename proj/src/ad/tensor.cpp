#include "fvs/ad/tensor.hpp"

#include <unordered_set>

#include "fvs/error.hpp"

namespace fvs::ad {

namespace {
thread_local bool g_grad_enabled = true;
}

std::int64_t NumElements(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

bool GradEnabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
BasicTensor<T> BasicTensor<T>::Zeros(Shape shape, bool requires_grad) {
  return Full(std::move(shape), T(0), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::Full(Shape shape, T value, bool requires_grad) {
  for (auto e : shape) {
    if (e < 0) Fail(ErrorCode::kShapeError, "negative extent in " + ShapeString(shape));
  }
  auto node = std::make_shared<Node<T>>();
  node->value.assign(std::size_t(NumElements(shape)), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return BasicTensor(std::move(node));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::FromData(Shape shape, std::vector<T> data, bool requires_grad) {
  if (std::int64_t(data.size()) != NumElements(shape)) {
    Fail(ErrorCode::kShapeError, "data length " + std::to_string(data.size()) +
                                     " does not match shape " + ShapeString(shape));
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return BasicTensor(std::move(node));
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) Fail(ErrorCode::kContractViolation, "item() on non-scalar tensor");
  return node_->value[0];
}

template <typename T>
BasicTensor<T> BasicTensor<T>::Detach() const {
  return FromData(node_->shape, node_->value, false);
}

template <typename T>
BasicTensor<T> MakeResult(Shape shape, std::vector<T> value,
                          const std::vector<BasicTensor<T>>& parents, const char* op,
                          std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || (p.defined() && p.requires_grad());
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return BasicTensor<T>(std::move(node));
}

template <typename T>
void Backward(const BasicTensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    Fail(ErrorCode::kContractViolation, "backward requires a scalar loss");
  }
  if (!loss.requires_grad()) return;
  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent && parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  // Intermediate grads are per-sweep; only leaves accumulate across calls.
  for (Node<T>* node : order) {
    if (node->backward) node->grad.clear();
  }
  Node<T>* root = loss.node().get();
  root->EnsureGrad();
  root->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template BasicTensor<float> MakeResult(Shape, std::vector<float>, const std::vector<BasicTensor<float>>&,
                                       const char*, std::function<void(Node<float>&)>);
template BasicTensor<double> MakeResult(Shape, std::vector<double>,
                                        const std::vector<BasicTensor<double>>&, const char*,
                                        std::function<void(Node<double>&)>);
template void Backward(const BasicTensor<float>&);
template void Backward(const BasicTensor<double>&);

}  // namespace fvs::ad
