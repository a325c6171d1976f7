#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dpe::nn {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major array of doubles. Every operation in this library works on
/// rank-2 tensors; higher ranks exist only for storage and serialization.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : Tensor(std::vector<std::size_t>{rows, cols}, fill) {}
  static Tensor from_matrix(const Eigen::Ref<const RowMatrix>& m);
  static Tensor scalar(double v) { return Tensor(1, 1, v); }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rows() const {
    if (shape_.size() != 2) rank_error();
    return shape_[0];
  }
  std::size_t cols() const {
    if (shape_.size() != 2) rank_error();
    return shape_[1];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double item() const;
  double* row_ptr(std::size_t r) { return data_.data() + r * cols(); }
  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols(); }

  Eigen::Map<RowMatrix> mat();
  Eigen::Map<const RowMatrix> mat() const;

  bool all_finite() const;
  std::string shape_string() const;

 private:
  [[noreturn]] void rank_error() const;

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One vertex of the recorded computation graph.
struct Node {
  Tensor value;
  Tensor grad;  // same shape as value once touched by backward
  std::vector<NodePtr> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;
  bool requires_grad = false;
  bool backward_done = false;

  Tensor& ensure_grad();
};

/// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  const NodePtr& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

  void zero_grad();

 private:
  NodePtr node_;
};

/// Leaf that never receives gradients.
Var constant(Tensor value);
/// Leaf that accumulates gradients (a trainable parameter).
Var leaf(Tensor value);

/// Reverse-mode sweep from a 1x1 loss. Each node's backward rule runs exactly
/// once; calling backward twice on the same loss throws kGraph.
void backward(const Var& loss);

}  // namespace dpe::nn
