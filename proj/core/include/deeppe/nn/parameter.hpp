#pragma once

#include <deque>
#include <string>
#include <vector>

#include "deeppe/nn/tensor.hpp"

namespace dpe::nn {

/// Named tensor owned by a ParameterStore. Non-trainable parameters (such as
/// batch-norm running statistics) are saved and loaded but never updated by
/// the optimizer.
struct Parameter {
  std::string name;
  Var var;
  bool trainable = true;

  const Tensor& value() const { return var.value(); }
  Tensor& mutable_value() { return var.mutable_value(); }
};

/// Ordered registry of parameters with unique names. References returned by
/// add() and get() stay valid for the lifetime of the store.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor value, bool trainable = true);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::deque<Parameter>& all() noexcept { return params_; }
  const std::deque<Parameter>& all() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }

  void zero_grad();
  /// Overwrites values by name. Every stored parameter must be present with
  /// the same shape; extra entries are an error.
  void assign(const std::vector<std::pair<std::string, Tensor>>& values);

 private:
  std::deque<Parameter> params_;
};

}  // namespace dpe::nn
