#include "deeppe/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deeppe/error.hpp"
#include "deeppe/nn/ops.hpp"

namespace dpe {

std::string_view loss_variant_name(LossVariant v) {
  switch (v) {
    case LossVariant::kWeightedCe: return "weighted_ce";
    case LossVariant::kCe: return "ce";
    case LossVariant::kL1Rt: return "l1_rt";
    case LossVariant::kL1Rmse: return "l1_rmse";
  }
  return "unknown";
}

LossVariant parse_loss_variant(std::string_view name) {
  for (auto v : {LossVariant::kWeightedCe, LossVariant::kCe, LossVariant::kL1Rt,
                 LossVariant::kL1Rmse}) {
    if (loss_variant_name(v) == name) return v;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown loss '" + std::string(name) +
                  "' (expected weighted_ce, ce, l1_rt or l1_rmse)");
}

void LossConfig::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0) || !(gamma >= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "loss needs alpha > 0, beta > 0, gamma >= 1 (got " + std::to_string(alpha) +
                    ", " + std::to_string(beta) + ", " + std::to_string(gamma) + ")");
  }
}

CeWeights ce_weights(double d_x, const LossConfig& cfg) {
  CeWeights w;
  w.pos = std::clamp(cfg.alpha * (cfg.beta - d_x), 0.0, 1.0);
  w.neg = std::pow(std::clamp(1.0 - cfg.alpha * (d_x - cfg.beta), 0.0, 1.0), cfg.gamma);
  return w;
}

nn::Var weighted_ce_loss(const nn::Var& s, const std::vector<double>& d_x,
                         const std::vector<double>& labels, const LossConfig& cfg) {
  cfg.validate();
  if (labels.size() != d_x.size()) {
    throw Error(ErrorCode::kShapeMismatch, "weighted_ce_loss: label and distance counts differ");
  }
  std::vector<double> w_pos, w_neg;
  for (double d : d_x) {
    if (!(d >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "d(x) must be non-negative");
    const auto w = ce_weights(d, cfg);
    w_pos.push_back(w.pos);
    w_neg.push_back(w.neg);
  }
  return nn::weighted_bce(s, labels, w_pos, w_neg);
}

nn::Var weighted_ce_loss(const nn::Var& s, const std::vector<double>& d_x,
                         const LossConfig& cfg) {
  std::vector<double> labels;
  for (double d : d_x) labels.push_back(pose_label(d, cfg.beta));
  return weighted_ce_loss(s, d_x, labels, cfg);
}

nn::Var ce_loss(const nn::Var& s, const std::vector<double>& labels) {
  const std::vector<double> ones(labels.size(), 1.0);
  return nn::weighted_bce(s, labels, ones, ones);
}

nn::Var l1_rt_loss(const nn::Var& predicted, const nn::Tensor& target) {
  return nn::l1_loss(predicted, target);
}

nn::Var l1_rmse_loss(const nn::Var& predicted_rmse, const std::vector<double>& d_x) {
  nn::Tensor target(d_x.size(), 1);
  std::copy(d_x.begin(), d_x.end(), target.data().begin());
  return nn::l1_loss(predicted_rmse, target);
}

}  // namespace dpe
