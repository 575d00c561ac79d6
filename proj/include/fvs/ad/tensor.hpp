#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fvs::ad {

using Shape = std::vector<std::int64_t>;

std::int64_t NumElements(const Shape& shape);
std::string ShapeString(const Shape& shape);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node<T>>> parents;
  // Reads this node's grad and accumulates into parents that require grad.
  std::function<void(Node<T>&)> backward;

  void EnsureGrad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
  }
};

// Reference-counted handle to a node of the autodiff graph. Copies alias the
// same storage; Detach() makes an independent leaf.
template <typename T>
class BasicTensor {
 public:
  BasicTensor() = default;
  explicit BasicTensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static BasicTensor Zeros(Shape shape, bool requires_grad = false);
  static BasicTensor Full(Shape shape, T value, bool requires_grad = false);
  static BasicTensor FromData(Shape shape, std::vector<T> data, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::int64_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const T> data() const { return node_->value; }
  std::span<T> mutable_data() { return node_->value; }
  // Empty until a backward pass reaches this tensor.
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() {
    node_->EnsureGrad();
    return node_->grad;
  }
  bool has_grad() const { return !node_->grad.empty(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  void ZeroGrad() { node_->grad.clear(); }
  const char* op() const { return node_->op; }
  T item() const;

  BasicTensor Detach() const;
  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

bool GradEnabled();

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Creates an op output. The backward closure and parent links are kept only
// when recording is enabled and some parent requires grad.
template <typename T>
BasicTensor<T> MakeResult(Shape shape, std::vector<T> value,
                          const std::vector<BasicTensor<T>>& parents, const char* op,
                          std::function<void(Node<T>&)> backward);

// Reverse-mode sweep from a scalar. Gradients accumulate (+=) into every
// reachable tensor that requires grad. Throws ContractViolation for non-scalar
// roots.
template <typename T>
void Backward(const BasicTensor<T>& loss);

}  // namespace fvs::ad
