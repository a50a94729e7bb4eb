#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cyst/error.hpp"
#include "cyst/rng.hpp"

namespace cyst {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream oss;
  oss << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) oss << "x";
    oss << s[i];
  }
  oss << "]";
  return oss.str();
}

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // same length as value once grad is enabled
  bool requires_grad = false;
};

// Dense row-major tensor of doubles. Copying a Tensor copies the handle,
// not the storage; ops below produce fresh tensors and never mutate their
// inputs, so shared handles stay consistent during a forward pass.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) {
    Tensor t;
    t.node_ = std::make_shared<TensorNode>();
    t.node_->shape = std::move(shape);
    t.node_->value.assign(shape_numel(t.node_->shape), 0.0);
    return t;
  }

  static Tensor full(Shape shape, double v) {
    Tensor t = zeros(std::move(shape));
    for (double& x : t.node_->value) x = v;
    return t;
  }

  static Tensor scalar(double v) { return full({1}, v); }

  static Tensor of(Shape shape, std::vector<double> data) {
    if (shape_numel(shape) != data.size()) {
      throw ShapeError("tensor: shape " + shape_str(shape) + " does not match " +
                       std::to_string(data.size()) + " values");
    }
    Tensor t;
    t.node_ = std::make_shared<TensorNode>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(data);
    return t;
  }

  // Parameter initializer; fills in row-major order from the generator.
  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = true) {
    Tensor t = zeros(std::move(shape));
    for (double& x : t.node_->value) x = rng.uniform(lo, hi);
    if (requires_grad) t.enable_grad();
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape[i]; }
  std::size_t size() const { return node_->value.size(); }

  const std::vector<double>& value() const { return node_->value; }
  std::vector<double>& value() { return node_->value; }

  bool requires_grad() const { return node_ && node_->requires_grad; }

  void enable_grad() {
    node_->requires_grad = true;
    node_->grad.assign(node_->value.size(), 0.0);
  }

  void zero_grad() {
    if (requires_grad()) node_->grad.assign(node_->value.size(), 0.0);
  }

  const std::vector<double>& grad() const {
    if (!requires_grad()) throw Error("tensor: grad requested but gradients are not enabled");
    return node_->grad;
  }
  std::vector<double>& grad() {
    if (!requires_grad()) throw Error("tensor: grad requested but gradients are not enabled");
    return node_->grad;
  }

  double item() const {
    if (size() != 1) throw ShapeError("tensor: item() on non-scalar " + shape_str(shape()));
    return node_->value[0];
  }

  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

// Reverse-mode tape. Constructing one makes it the active tape for the
// current thread (define-by-run); ops record their backward rules in
// execution order, so a reverse sweep visits every node exactly once with
// all downstream gradients already accumulated.
class Tape {
 public:
  Tape() : prev_(active_) { active_ = this; }
  ~Tape() { active_ = prev_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return active_; }

  void record(std::function<void()> backward) { ops_.push_back(std::move(backward)); }

  std::size_t num_ops() const { return ops_.size(); }

  // Seeds d(loss)/d(loss) = seed and sweeps the tape in reverse. Gradients
  // accumulate into every recorded tensor with requires_grad.
  void backward(const Tensor& loss, double seed = 1.0) {
    if (!loss.defined() || loss.size() != 1) {
      throw ShapeError("backward: loss must be a scalar, got " +
                       (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
    }
    if (loss.requires_grad()) {
      loss.node()->grad[0] += seed;
    }
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> ops_;
  Tape* prev_;
  inline static thread_local Tape* active_ = nullptr;
};

namespace detail {

// True when the active tape should record an op over these inputs.
inline bool tracked(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

}  // namespace detail

}  // namespace cyst
