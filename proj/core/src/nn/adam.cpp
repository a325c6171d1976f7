#include "deeppe/nn/adam.hpp"

#include <cmath>

#include "deeppe/error.hpp"

namespace dpe::nn {

AdamState make_adam(const ParameterStore& params, AdamOptions options) {
  AdamState s;
  s.options = options;
  for (const auto& p : params.all()) {
    if (!p.trainable) continue;
    s.m.emplace_back(p.value().shape(), 0.0);
    s.v.emplace_back(p.value().shape(), 0.0);
  }
  return s;
}

void adam_step(AdamState& state, ParameterStore& params) {
  const auto& o = state.options;
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  std::size_t slot = 0;
  for (auto& p : params.all()) {
    if (!p.trainable) continue;
    if (slot >= state.m.size() || state.m[slot].shape() != p.value().shape()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "adam state does not match parameter '" + p.name + "'");
    }
    auto theta = p.mutable_value().data();
    const Tensor& grad = p.var.grad();
    const bool has_grad = grad.shape() == p.value().shape();
    auto m = state.m[slot].data();
    auto v = state.v[slot].data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = has_grad ? grad.data()[i] : 0.0;
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g;
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g * g;
      theta[i] -= o.lr * o.weight_decay * theta[i];
      theta[i] -= o.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + o.eps);
    }
    ++slot;
  }
  if (slot != state.m.size()) {
    throw Error(ErrorCode::kShapeMismatch, "adam state has more slots than trainable parameters");
  }
}

}  // namespace dpe::nn
