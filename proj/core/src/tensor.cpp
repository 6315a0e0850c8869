#include "mmft/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "mmft/errors.hpp"

namespace mmft {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::span<Real> detail::Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

namespace {

void check_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, Real fill) {
  check_shape(shape);
  node_ = std::make_shared<detail::Node>();
  node_->value.assign(static_cast<std::size_t>(shape_numel(shape)), fill);
  node_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<Real> values) {
  check_shape(shape);
  if (static_cast<std::int64_t>(values.size()) != shape_numel(shape)) {
    throw ShapeError("tensor of shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
}

Tensor Tensor::scalar(Real v) { return Tensor(Shape{1}, std::vector<Real>{v}); }

Tensor Tensor::parameter(Shape shape, std::vector<Real> values) {
  Tensor t(std::move(shape), std::move(values));
  t.set_requires_grad(true);
  return t;
}

Tensor Tensor::from_node(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
int Tensor::rank() const { return static_cast<int>(node_->shape.size()); }

std::int64_t Tensor::dim(int axis) const {
  const int r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  }
  return node_->shape[static_cast<std::size_t>(axis)];
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(node_->value.size()); }
std::span<const Real> Tensor::values() const { return node_->value; }

std::span<Real> Tensor::mutable_values() {
  if (!node_->leaf) throw GraphError("only leaf tensors may be modified in place");
  return node_->value;
}

Real Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() needs a single-element tensor, got " + shape_str(shape()));
  return node_->value[0];
}

Real Tensor::at(std::initializer_list<std::int64_t> index) const {
  if (index.size() != node_->shape.size()) {
    throw ShapeError("index rank does not match tensor " + shape_str(shape()));
  }
  std::int64_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    const auto extent = node_->shape[axis++];
    if (i < 0 || i >= extent) throw ShapeError("index out of range for " + shape_str(shape()));
    flat = flat * extent + i;
  }
  return node_->value[static_cast<std::size_t>(flat)];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  if (!node_->leaf) throw GraphError("requires_grad can only be set on leaf tensors");
  node_->requires_grad = on;
  if (on) node_->grad_buffer();
  return *this;
}

bool Tensor::is_leaf() const { return node_->leaf; }

std::span<const Real> Tensor::grad() const { return node_->grad_buffer(); }
std::span<Real> Tensor::mutable_grad() { return node_->grad_buffer(); }

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->value); }
const char* Tensor::op_name() const { return node_->op; }

void Tensor::backward() const {
  if (numel() != 1) {
    throw GraphError("backward() needs a scalar root, got shape " + shape_str(shape()));
  }
  if (node_->consumed) throw GraphError("graph already consumed by a previous backward()");
  if (!node_->requires_grad) return;

  const ComputeGraph graph = ComputeGraph::collect(*this);
  for (auto* n : graph.nodes()) {
    if (n->consumed) throw GraphError("graph already consumed by a previous backward()");
  }
  node_->grad_buffer()[0] += 1.0;
  const auto& order = graph.nodes();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->leaf) continue;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  // Release the graph: interior nodes drop their closures, inputs and gradients.
  for (auto* n : order) {
    if (n->leaf) continue;
    n->backward = nullptr;
    n->inputs.clear();
    n->inputs.shrink_to_fit();
    n->grad.clear();
    n->grad.shrink_to_fit();
    n->consumed = true;
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

ComputeGraph ComputeGraph::collect(const Tensor& root) {
  ComputeGraph g;
  std::unordered_set<detail::Node*> seen;
  // Iterative post-order DFS.
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      g.order_.push_back(node);
      stack.pop_back();
    }
  }
  return g;
}

namespace detail {

namespace {

Tensor finish(Shape shape, std::vector<Real> value, std::vector<std::shared_ptr<Node>> inputs,
              const char* op, BackwardFn backward) {
  for (Real v : value) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + " produced a non-finite value (shape " +
                         shape_str(shape) + ")");
    }
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  node->leaf = false;
  bool track = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) track = track || in->requires_grad;
  }
  if (track) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return Tensor::from_node(std::move(node));
}

}  // namespace

Tensor make_result(Shape shape, std::vector<Real> value, std::initializer_list<Tensor> inputs,
                   const char* op, BackwardFn backward) {
  std::vector<std::shared_ptr<Node>> nodes;
  nodes.reserve(inputs.size());
  for (const auto& t : inputs) nodes.push_back(t.node_ptr());
  return finish(std::move(shape), std::move(value), std::move(nodes), op, std::move(backward));
}

Tensor make_result(Shape shape, std::vector<Real> value, const std::vector<Tensor>& inputs,
                   const char* op, BackwardFn backward) {
  std::vector<std::shared_ptr<Node>> nodes;
  nodes.reserve(inputs.size());
  for (const auto& t : inputs) nodes.push_back(t.node_ptr());
  return finish(std::move(shape), std::move(value), std::move(nodes), op, std::move(backward));
}

}  // namespace detail

}  // namespace mmft
