#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nftm {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One vertex of the recorded computation graph. Leaves own parameters and
// constants; interior nodes own a backward closure that pushes `grad` into the
// parents' `grad` buffers.
struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  bool grad_touched = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
};

}  // namespace detail

/// Dense row-major float64 array with an optional gradient slot.
///
/// A Tensor is a cheap handle: copies share the same storage. Results of the
/// differentiable ops in ops.hpp record their inputs so that backward() can
/// walk the graph in reverse topological order.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  // Direct mutation is reserved for leaves (parameters, optimizer, gradient
  // checking); interior nodes are immutable once recorded.
  std::span<double> values_mut();
  double item() const;
  double at(std::size_t i) const { return values()[i]; }

  bool requires_grad() const;
  bool is_leaf() const;
  bool grad_populated() const;
  std::span<const double> grad() const;
  std::span<double> grad_mut();
  void zero_grad();

  // Same values, no history.
  Tensor detach() const;
  Tensor clone(bool requires_grad = false) const;

  /// Reverse-mode sweep from a scalar. Leaf gradients accumulate across calls;
  /// interior gradients are recomputed from zero on every call.
  void backward() const;

  // Builds a recorded result. `backward` receives the result node, whose
  // `grad` holds dL/d(result); it must add into parents that require grad.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            const std::vector<Tensor>& inputs,
                            std::function<void(detail::Node&)> backward,
                            const char* op);

  detail::Node* node() const { return node_.get(); }
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Helpers for backward closures.
inline bool wants_grad(const detail::Node& parent) { return parent.requires_grad; }
std::span<double> grad_of(detail::Node& parent);

}  // namespace nftm
