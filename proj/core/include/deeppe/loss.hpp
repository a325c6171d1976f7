#pragma once

#include <string_view>
#include <vector>

#include "deeppe/nn/tensor.hpp"

namespace dpe {

enum class LossVariant { kWeightedCe, kCe, kL1Rt, kL1Rmse };

std::string_view loss_variant_name(LossVariant v);
LossVariant parse_loss_variant(std::string_view name);

struct LossConfig {
  LossVariant variant = LossVariant::kWeightedCe;
  double alpha = 5.0;
  double beta = 0.2;
  double gamma = 2.0;

  /// Throws unless alpha > 0, beta > 0, gamma >= 1.
  void validate() const;
};

/// Label rule: a pose is correct when d(x) < beta.
inline double pose_label(double d_x, double beta) { return d_x < beta ? 1.0 : 0.0; }

struct CeWeights {
  double pos = 0.0;  // clamp(alpha * (beta - d), 0, 1)
  double neg = 0.0;  // clamp(1 - alpha * (d - beta), 0, 1)^gamma
};
CeWeights ce_weights(double d_x, const LossConfig& cfg);

/// Mean over the batch of -(y w_pos log s + (1 - y) w_neg log(1 - s)) with
/// labels from pose_label. s is B x 1.
nn::Var weighted_ce_loss(const nn::Var& s, const std::vector<double>& d_x,
                         const LossConfig& cfg);
/// Same with caller-supplied labels.
nn::Var weighted_ce_loss(const nn::Var& s, const std::vector<double>& d_x,
                         const std::vector<double>& labels, const LossConfig& cfg);
/// Plain binary cross-entropy, mean over the batch.
nn::Var ce_loss(const nn::Var& s, const std::vector<double>& labels);
/// Mean absolute error of predicted (rotation rad, translation m) errors.
nn::Var l1_rt_loss(const nn::Var& predicted, const nn::Tensor& target);
/// Mean absolute error between a predicted RMSE and d(x).
nn::Var l1_rmse_loss(const nn::Var& predicted_rmse, const std::vector<double>& d_x);

}  // namespace dpe
