#pragma once

#include <cstdint>
#include <vector>

#include "deeppe/nn/parameter.hpp"

namespace dpe::nn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled: theta -= lr * wd * theta
};

/// Moments are kept in the store's parameter order, trainable entries only.
struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

AdamState make_adam(const ParameterStore& params, AdamOptions options);
/// One bias-corrected Adam update of every trainable parameter from its
/// accumulated gradient (a missing gradient counts as zero).
void adam_step(AdamState& state, ParameterStore& params);

}  // namespace dpe::nn
