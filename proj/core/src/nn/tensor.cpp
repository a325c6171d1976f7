#include "deeppe/nn/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "deeppe/error.hpp"

namespace dpe::nn {

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)) {
  const std::size_t n = std::accumulate(shape_.begin(), shape_.end(),
                                        std::size_t{1}, std::multiplies<>());
  data_.assign(n, fill);
}

Tensor Tensor::from_matrix(const Eigen::Ref<const RowMatrix>& m) {
  Tensor t(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  t.mat() = m;
  return t;
}

void Tensor::rank_error() const {
  throw Error(ErrorCode::kShapeMismatch, "expected a rank-2 tensor, got " + shape_string());
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "item() on tensor of shape " + shape_string());
  }
  return data_[0];
}

Eigen::Map<RowMatrix> Tensor::mat() {
  return {data_.data(), static_cast<Eigen::Index>(rows()),
          static_cast<Eigen::Index>(cols())};
}

Eigen::Map<const RowMatrix> Tensor::mat() const {
  return {data_.data(), static_cast<Eigen::Index>(rows()),
          static_cast<Eigen::Index>(cols())};
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

Tensor& Node::ensure_grad() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

void Var::zero_grad() {
  if (node_) node_->grad = Tensor(node_->value.shape(), 0.0);
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var leaf(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->grad = Tensor(n->value.shape(), 0.0);
  return Var(std::move(n));
}

void backward(const Var& loss) {
  if (!loss) throw Error(ErrorCode::kGraph, "backward on an empty variable");
  Node& root = *loss.node();
  if (root.value.size() != 1) {
    throw Error(ErrorCode::kGraph,
                "backward needs a scalar loss, got shape " + root.value.shape_string());
  }
  if (root.backward_done) {
    throw Error(ErrorCode::kGraph,
                "backward already ran on this graph; rebuild the forward pass first");
  }
  root.backward_done = true;
  if (!root.requires_grad) return;

  // Iterative post-order DFS yields a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{&root, 0}};
  seen.insert(&root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (!n->parents.empty()) n->ensure_grad();
  }
  root.ensure_grad().data()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

}  // namespace dpe::nn
