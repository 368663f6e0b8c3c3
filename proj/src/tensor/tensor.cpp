#include "liwt/tensor.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace liwt {

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

thread_local bool g_grad_enabled = true;

struct GradientFault {
  std::mutex mu;
  std::string op;
  double factor = 1.0;
};

GradientFault& gradient_fault() {
  static GradientFault fault;
  return fault;
}

void validate_shape(const Shape& shape) {
  for (auto e : shape) {
    if (e <= 0) throw InvalidArgument("tensor extents must be positive, got " + shape_str(shape));
  }
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace debug {

void inject_gradient_fault(std::string op, double factor) {
  auto& f = gradient_fault();
  std::lock_guard lock(f.mu);
  f.op = std::move(op);
  f.factor = factor;
}

void clear_gradient_fault() { inject_gradient_fault({}, 1.0); }

}  // namespace debug

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<detail::Node<T>>()) {
  validate_shape(shape);
  node_->data.assign(static_cast<std::size_t>(liwt::numel(shape)), fill);
  node_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<detail::Node<T>>()) {
  validate_shape(shape);
  if (static_cast<std::int64_t>(values.size()) != liwt::numel(shape)) {
    throw InvalidArgument("tensor data length " + std::to_string(values.size()) +
                          " does not match shape " + shape_str(shape));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(values);
}

template <typename T>
std::int64_t Tensor<T>::dim(int axis) const {
  const int r = rank();
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) throw InvalidArgument("axis " + std::to_string(axis) + " out of range for rank " + std::to_string(r));
  return node_->shape[static_cast<std::size_t>(a)];
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (!node_->is_leaf()) throw std::logic_error("mutable_data() on a non-leaf tensor");
  return node_->data;
}

template <typename T>
T Tensor<T>::item() const {
  if (node_->data.size() != 1) throw InvalidArgument("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool flag) {
  if (!node_->is_leaf()) throw std::logic_error("requires_grad can only be set on leaves");
  node_->requires_grad = flag;
  return *this;
}

template <typename T>
Tensor<T> Tensor<T>::grad_tensor() const {
  if (!has_grad()) return Tensor(shape(), T(0));
  return Tensor(shape(), node_->grad);
}

template <typename T>
void Tensor<T>::zero_grad() {
  node_->grad.clear();
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(shape(), node_->data);
}

namespace detail {

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::string_view op,
                      std::vector<std::shared_ptr<Node<T>>> parents,
                      std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  const bool track = g_grad_enabled && std::any_of(parents.begin(), parents.end(),
                                                   [](const auto& p) { return p->requires_grad; });
  if (track) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor<T>(std::move(node));
}

}  // namespace detail

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw InvalidArgument("backward() requires a single-element loss, got " +
                          (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  using NodeT = detail::Node<T>;
  NodeT* root = loss.node().get();
  if (!root->requires_grad) throw InvalidArgument("backward(): loss does not depend on any tensor requiring grad");

  // Iterative post-order DFS; reversed it gives a valid reverse-topological order.
  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> visited;
  std::vector<std::pair<NodeT*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodeT* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (NodeT* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->data.size(), T(0));
  }
  root->ensure_grad()[0] += T(1);

  std::string fault_op;
  double fault_factor = 1.0;
  {
    auto& f = gradient_fault();
    std::lock_guard lock(f.mu);
    fault_op = f.op;
    fault_factor = f.factor;
  }

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT* n = *it;
    if (n->is_leaf()) continue;
    if (!fault_op.empty() && n->op == fault_op) {
      for (auto& g : n->grad) g = static_cast<T>(g * fault_factor);
    }
    n->backward_fn(*n);
  }
}

// ---- snapshots ----------------------------------------------------------

namespace {

constexpr std::array<char, 4> kSnapshotMagic{'L', 'W', 'T', 'S'};

template <typename T>
constexpr std::uint8_t dtype_tag() {
  if constexpr (std::is_same_v<T, float>) return 1;
  else return 2;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(b.data(), 8);
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw CheckpointError("snapshot truncated while reading header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

template <typename T>
using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

}  // namespace

template <typename T>
void write_snapshot(std::ostream& out, const Tensor<T>& t) {
  out.write(kSnapshotMagic.data(), 4);
  const char tag = static_cast<char>(dtype_tag<T>());
  out.write(&tag, 1);
  put_u64(out, t.shape().size());
  for (auto e : t.shape()) put_u64(out, static_cast<std::uint64_t>(e));
  std::vector<char> bytes(t.data().size() * sizeof(T));
  std::size_t pos = 0;
  for (T v : t.data()) {
    auto bits = std::bit_cast<Bits<T>>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[pos++] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing tensor snapshot");
}

template <typename T>
Tensor<T> read_snapshot(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4)) throw CheckpointError("snapshot truncated before magic");
  if (magic != kSnapshotMagic) throw CheckpointError("bad snapshot magic");
  char tag = 0;
  if (!in.read(&tag, 1)) throw CheckpointError("snapshot truncated before dtype");
  if (static_cast<std::uint8_t>(tag) != dtype_tag<T>()) {
    throw CheckpointError("snapshot dtype tag " + std::to_string(static_cast<int>(tag)) + " does not match requested type");
  }
  const auto rank = get_u64(in);
  if (rank > 8) throw CheckpointError("snapshot rank " + std::to_string(rank) + " is implausible");
  Shape shape;
  for (std::uint64_t i = 0; i < rank; ++i) {
    const auto e = get_u64(in);
    if (e == 0 || e > (1ull << 40)) throw CheckpointError("snapshot extent out of range");
    shape.push_back(static_cast<std::int64_t>(e));
  }
  const auto n = static_cast<std::size_t>(numel(shape));
  std::vector<unsigned char> bytes(n * sizeof(T));
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
    throw CheckpointError("snapshot truncated in data section");
  }
  std::vector<T> values(n);
  for (std::size_t k = 0; k < n; ++k) {
    Bits<T> bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<Bits<T>>(bytes[k * sizeof(T) + i]) << (8 * i);
    values[k] = std::bit_cast<T>(bits);
  }
  return Tensor<T>(std::move(shape), std::move(values));
}

template class Tensor<float>;
template class Tensor<double>;
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);
template Tensor<float> detail::make_result(Shape, std::vector<float>, std::string_view,
                                           std::vector<std::shared_ptr<detail::Node<float>>>,
                                           std::function<void(detail::Node<float>&)>);
template Tensor<double> detail::make_result(Shape, std::vector<double>, std::string_view,
                                            std::vector<std::shared_ptr<detail::Node<double>>>,
                                            std::function<void(detail::Node<double>&)>);
template void write_snapshot(std::ostream&, const Tensor<float>&);
template void write_snapshot(std::ostream&, const Tensor<double>&);
template Tensor<float> read_snapshot(std::istream&);
template Tensor<double> read_snapshot(std::istream&);

}  // namespace liwt
