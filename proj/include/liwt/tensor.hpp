#pragma once

// Dense row-major tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle onto a shared node. Results of differentiable
// ops keep links to their inputs while gradient recording is enabled and at
// least one input requires a gradient; backward() replays those links in
// reverse topological order. Leaf gradients accumulate across uses and across
// backward() calls until zero_grad(); intermediate gradients are reset at the
// start of every backward() call.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "liwt/errors.hpp"

namespace liwt {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads self.grad and accumulates into the parents that require gradients.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

bool grad_enabled();

// Disables graph recording on the current thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  // Negative axes count from the back.
  std::int64_t dim(int axis) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->data.size()); }

  std::span<const T> data() const { return node_->data; }
  // Only leaves may be written; results of ops are immutable.
  std::span<T> mutable_data();
  T item() const;
  T at(std::int64_t flat_index) const { return node_->data.at(static_cast<std::size_t>(flat_index)); }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool flag);
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  Tensor grad_tensor() const;
  void zero_grad();

  std::string_view op() const { return node_->op; }
  bool is_leaf() const { return node_->is_leaf(); }
  // Fresh leaf holding a copy of the values.
  Tensor detach() const;

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

// Runs reverse-mode differentiation from a single-element loss.
template <typename T>
void backward(const Tensor<T>& loss);

namespace detail {

// Creates an op result, recording the graph edge when needed.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::string_view op,
                      std::vector<std::shared_ptr<Node<T>>> parents,
                      std::function<void(Node<T>&)> backward_fn);

}  // namespace detail

namespace debug {

// Test hook: scales the incoming gradient of every node produced by `op`
// before its rule runs, so a gradient check can be shown to catch it.
void inject_gradient_fault(std::string op, double factor);
void clear_gradient_fault();

}  // namespace debug

// Binary snapshot: "LWTS", dtype tag, rank, extents (u64 LE), raw LE data.
template <typename T>
void write_snapshot(std::ostream& out, const Tensor<T>& t);
template <typename T>
Tensor<T> read_snapshot(std::istream& in);

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace liwt
