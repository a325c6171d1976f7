#include "deeppe/nn/parameter.hpp"

#include <unordered_map>

#include "deeppe/error.hpp"

namespace dpe::nn {

Parameter& ParameterStore::add(std::string name, Tensor value, bool trainable) {
  if (contains(name)) {
    throw Error(ErrorCode::kInvalidArgument, "duplicate parameter name '" + name + "'");
  }
  Var v = trainable ? leaf(std::move(value)) : constant(std::move(value));
  params_.push_back({std::move(name), std::move(v), trainable});
  return params_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw Error(ErrorCode::kInvalidArgument, "no parameter named '" + name + "'");
}

const Parameter& ParameterStore::get(const std::string& name) const {
  return const_cast<ParameterStore*>(this)->get(name);
}

bool ParameterStore::contains(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return true;
  }
  return false;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) {
    if (p.trainable) p.var.zero_grad();
  }
}

void ParameterStore::assign(const std::vector<std::pair<std::string, Tensor>>& values) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : values) {
    if (!by_name.emplace(name, &t).second) {
      throw Error(ErrorCode::kModelFormat, "duplicate parameter '" + name + "' in weights");
    }
  }
  if (by_name.size() != params_.size()) {
    throw Error(ErrorCode::kModelFormat,
                "weights hold " + std::to_string(by_name.size()) + " parameters, model has " +
                    std::to_string(params_.size()));
  }
  for (auto& p : params_) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      throw Error(ErrorCode::kModelFormat, "weights lack parameter '" + p.name + "'");
    }
    if (it->second->shape() != p.value().shape()) {
      throw Error(ErrorCode::kModelFormat,
                  "parameter '" + p.name + "' has shape " + it->second->shape_string() +
                      " in weights but " + p.value().shape_string() + " in the model");
    }
    p.mutable_value() = *it->second;
  }
}

}  // namespace dpe::nn
