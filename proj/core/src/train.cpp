#include "deeppe/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "deeppe/error.hpp"
#include "deeppe/nn/adam.hpp"
#include "deeppe/nn/ops.hpp"
#include "deeppe/nn/serialize.hpp"

namespace dpe {

namespace {

void check_head(const DeepPeModel& model, LossVariant v) {
  const ModelHead want = v == LossVariant::kL1Rt     ? ModelHead::kRegressRt
                         : v == LossVariant::kL1Rmse ? ModelHead::kRegressRmse
                                                     : ModelHead::kConfidence;
  if (model.config().head != want) {
    throw Error(ErrorCode::kInvalidArgument,
                "loss " + std::string(loss_variant_name(v)) + " needs the " +
                    std::string(model_head_name(want)) + " head, model has " +
                    std::string(model_head_name(model.config().head)));
  }
}

}  // namespace

nn::Var batch_loss(const DeepPeModel& model, const TrainingSet& data,
                   const std::vector<std::size_t>& sample_ids, const TrainConfig& cfg,
                   bool training, std::uint64_t step) {
  std::vector<nn::Var> rows;
  std::vector<double> d_x;
  nn::Tensor rt(sample_ids.size(), 2);
  const FusedProjections fused = fuse_projections(model);
  for (std::size_t i = 0; i < sample_ids.size(); ++i) {
    const auto& s = data.samples.at(sample_ids[i]);
    rows.push_back(
        pose_global_feature(model, data.pyramids.at(s.pair), s.pose, cfg.paa, fused));
    d_x.push_back(s.d_x);
    rt(i, 0) = s.rre_rad;
    rt(i, 1) = s.rte;
  }
  const nn::Var out = confidence_head(model, nn::concat_rows(rows), training, step);
  switch (cfg.loss.variant) {
    case LossVariant::kWeightedCe: return weighted_ce_loss(out, d_x, cfg.loss);
    case LossVariant::kCe: {
      std::vector<double> y;
      for (double d : d_x) y.push_back(pose_label(d, cfg.loss.beta));
      return ce_loss(out, y);
    }
    case LossVariant::kL1Rt: return l1_rt_loss(out, rt);
    case LossVariant::kL1Rmse: return l1_rmse_loss(out, d_x);
  }
  throw Error(ErrorCode::kUnreachable, "unknown loss variant");
}

TrainLog train(DeepPeModel& model, const TrainingSet& data, const TrainConfig& cfg) {
  cfg.loss.validate();
  cfg.paa.validate();
  check_head(model, cfg.loss.variant);
  if (cfg.batch_pos + cfg.batch_neg < 2) {
    throw Error(ErrorCode::kInvalidArgument, "a training batch needs at least 2 poses");
  }
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    (pose_label(data.samples[i].d_x, cfg.loss.beta) > 0.5 ? pos : neg).push_back(i);
  }
  if ((cfg.batch_pos > 0 && pos.empty()) || (cfg.batch_neg > 0 && neg.empty())) {
    throw Error(ErrorCode::kDataset,
                "training set needs both labels: " + std::to_string(pos.size()) +
                    " correct, " + std::to_string(neg.size()) + " incorrect");
  }
  std::size_t batches = std::numeric_limits<std::size_t>::max();
  if (cfg.batch_pos > 0) batches = std::min(batches, pos.size() / cfg.batch_pos);
  if (cfg.batch_neg > 0) batches = std::min(batches, neg.size() / cfg.batch_neg);
  batches = std::max<std::size_t>(batches, 1);
  if (cfg.max_batches_per_epoch > 0) batches = std::min(batches, cfg.max_batches_per_epoch);

  auto state = nn::make_adam(model.params(), {cfg.lr0, 0.9, 0.999, 1e-8, cfg.weight_decay});
  TrainLog log;
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    state.options.lr = cfg.lr0 * std::pow(1.0 - cfg.decay, static_cast<double>(epoch));
    std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + epoch);
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);
    double total = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<std::size_t> ids;
      // Classes smaller than one batch wrap around.
      for (std::size_t i = 0; i < cfg.batch_pos; ++i) ids.push_back(pos[(b * cfg.batch_pos + i) % pos.size()]);
      for (std::size_t i = 0; i < cfg.batch_neg; ++i) ids.push_back(neg[(b * cfg.batch_neg + i) % neg.size()]);
      model.params().zero_grad();
      const nn::Var loss = batch_loss(model, data, ids, cfg, true, step);
      nn::backward(loss);
      nn::adam_step(state, model.params());
      nn::round_to_float(model.params());
      ++step;
      log.batch_loss.push_back(loss.value().item());
      total += loss.value().item();
    }
    log.epoch_loss.push_back(total / static_cast<double>(batches));
  }
  return log;
}

}  // namespace dpe
