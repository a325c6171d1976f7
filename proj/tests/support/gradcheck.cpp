#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "deeppe/nn/ops.hpp"

namespace dpe::testing {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

void record(GradCheckReport& r, double err, const std::string& where) {
  ++r.entries;
  if (err > r.max_rel_error) {
    r.max_rel_error = err;
    r.worst = where;
  }
}

}  // namespace

GradCheckReport check_gradients(const LossFn& loss, const std::vector<nn::Tensor>& inputs,
                                double h, double floor) {
  std::vector<nn::Var> leaves;
  for (const auto& t : inputs) leaves.push_back(nn::leaf(t));
  const nn::Var l = loss(leaves);
  nn::backward(l);

  auto eval = [&](std::size_t which, std::size_t entry, double delta) {
    std::vector<nn::Var> vars;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      nn::Tensor t = inputs[i];
      if (i == which) t.data()[entry] += delta;
      vars.push_back(nn::leaf(std::move(t)));
    }
    return loss(vars).value().item();
  };

  GradCheckReport report;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const nn::Tensor& g = leaves[i].grad();
    for (std::size_t e = 0; e < inputs[i].size(); ++e) {
      const double numeric = (eval(i, e, h) - eval(i, e, -h)) / (2.0 * h);
      record(report, relative_error(g.data()[e], numeric, floor),
             "input[" + std::to_string(i) + "] entry " + std::to_string(e));
    }
  }
  return report;
}

GradCheckReport check_model_gradients(DeepPeModel& model, const std::function<nn::Var()>& loss,
                                      double h, double floor) {
  model.params().zero_grad();
  nn::backward(loss());
  GradCheckReport report;
  for (auto& p : model.params().all()) {
    if (!p.trainable) continue;
    const nn::Tensor analytic = p.var.grad();
    for (std::size_t e = 0; e < p.value().size(); ++e) {
      double& v = p.mutable_value().data()[e];
      const double saved = v;
      v = saved + h;
      const double up = loss().value().item();
      v = saved - h;
      const double down = loss().value().item();
      v = saved;
      record(report, relative_error(analytic.data()[e], (up - down) / (2.0 * h), floor),
             p.name + " entry " + std::to_string(e));
    }
  }
  return report;
}

nn::Var Probe::operator()(const nn::Var& y) const {
  return nn::matmul(nn::matmul(nn::constant(left), y), nn::constant(right));
}

Probe make_probe(std::size_t rows, std::size_t cols, Gen& gen) {
  return {gen.tensor(1, rows), gen.tensor(cols, 1)};
}

}  // namespace dpe::testing
