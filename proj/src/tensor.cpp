#include "nftm/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace nftm {

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape, std::size_t count) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one axis");
  for (auto d : shape) {
    if (d == 0) throw std::invalid_argument("tensor shape " + shape_str(shape) + " has a zero extent");
  }
  if (numel_of(shape) != count) {
    throw std::invalid_argument("tensor shape " + shape_str(shape) + " does not match " +
                                std::to_string(count) + " values");
  }
}

void check_finite(const std::vector<double>& v, const char* op) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw std::domain_error(std::string(op) + " produced a non-finite value at index " +
                              std::to_string(i));
    }
  }
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape, values.size());
  check_finite(values, "tensor construction");
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->values.size(), 0.0);
  node_ = std::move(node);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = numel_of(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = numel_of(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw std::logic_error("use of an undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw std::out_of_range("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return node_ ? node_->values.size() : 0; }

std::span<const double> Tensor::values() const {
  shape();
  return node_->values;
}

std::span<double> Tensor::values_mut() {
  shape();
  if (!node_->leaf) throw std::logic_error("cannot mutate the values of a recorded op result");
  return node_->values;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("item() on non-scalar tensor " + shape_str(shape()));
  }
  return node_->values[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_ && node_->leaf; }
bool Tensor::grad_populated() const { return node_ && node_->grad_touched; }

std::span<const double> Tensor::grad() const {
  if (!requires_grad()) throw std::logic_error("tensor does not require grad");
  return node_->grad;
}

std::span<double> Tensor::grad_mut() {
  if (!requires_grad()) throw std::logic_error("tensor does not require grad");
  node_->grad_touched = true;
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!requires_grad()) return;
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  node_->grad_touched = false;
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->values, false); }

Tensor Tensor::clone(bool requires_grad) const {
  return Tensor(shape(), node_->values, requires_grad);
}

Tensor Tensor::make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                           std::function<void(detail::Node&)> backward, const char* op) {
  check_shape(shape, values.size());
  check_finite(values, op);
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->op = op;
  node->leaf = false;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (any) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (const auto& in : inputs) node->parents.push_back(in.node_);
    node->backward_fn = std::move(backward);
  }
  return Tensor(std::move(node));
}

std::span<double> grad_of(detail::Node& parent) {
  if (parent.grad.size() != parent.values.size()) parent.grad.assign(parent.values.size(), 0.0);
  parent.grad_touched = true;
  return parent.grad;
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw std::invalid_argument("backward() needs a scalar loss, got " + shape_str(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order without recursion
  // depth limits on long unrolls.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (!n->leaf) n->grad.assign(n->values.size(), 0.0);
  }
  if (node_->leaf) {
    grad_of(*node_)[0] += 1.0;
    return;
  }
  node_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (!n->leaf && n->backward_fn) n->backward_fn(*n);
  }
  for (auto* n : order) {
    if (!n->leaf) {
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

}  // namespace nftm
