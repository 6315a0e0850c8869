#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mmft {

using Real = double;
using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node;
using BackwardFn = std::function<void(Node& out)>;

// One value in the autodiff graph. Leaves own their storage; interior nodes
// keep their inputs alive until backward() consumes the graph.
struct Node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;
  bool requires_grad = false;
  bool leaf = true;
  bool consumed = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  std::span<Real> grad_buffer();
};

}  // namespace detail

/// Dense row-major array of reals with optional reverse-mode gradient tracking.
///
/// Tensor is a cheap handle: copies share the same underlying node. Values of
/// non-leaf tensors are never modified after creation; leaves may be updated in
/// place by an optimizer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = 0);
  Tensor(Shape shape, std::vector<Real> values);

  static Tensor scalar(Real v);
  /// Leaf that records gradients.
  static Tensor parameter(Shape shape, std::vector<Real> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  std::int64_t dim(int axis) const;
  std::int64_t numel() const;

  std::span<const Real> values() const;
  /// Writable view of a leaf's storage. Throws GraphError for interior nodes.
  std::span<Real> mutable_values();
  Real item() const;
  Real at(std::initializer_list<std::int64_t> index) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const;
  /// Accumulated gradient; all zeros when nothing has been accumulated yet.
  std::span<const Real> grad() const;
  std::span<Real> mutable_grad();
  void zero_grad();

  /// Reverse sweep from a scalar root. Consumes the recorded graph.
  void backward() const;

  /// Copy of the values with no graph attached.
  Tensor detach() const;
  const char* op_name() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }
  static Tensor from_node(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Recorded operations reachable from a root, inputs before consumers.
class ComputeGraph {
 public:
  static ComputeGraph collect(const Tensor& root);

  const std::vector<detail::Node*>& nodes() const { return order_; }
  std::size_t size() const { return order_.size(); }

 private:
  std::vector<detail::Node*> order_;
};

namespace detail {

/// Builds an op result. Records `backward` only when grad mode is on and some
/// input requires gradients. Throws NumericError on non-finite output.
Tensor make_result(Shape shape, std::vector<Real> value, std::initializer_list<Tensor> inputs,
                   const char* op, BackwardFn backward);
Tensor make_result(Shape shape, std::vector<Real> value, const std::vector<Tensor>& inputs,
                   const char* op, BackwardFn backward);

}  // namespace detail

}  // namespace mmft
