#pragma once

#include <cstdint>
#include <vector>

#include "deeppe/geom3d.hpp"
#include "deeppe/loss.hpp"
#include "deeppe/model.hpp"
#include "deeppe/pyramid.hpp"

namespace dpe {

/// One labelled pose of one pair.
struct TrainingSample {
  std::size_t pair = 0;  // index into TrainingSet::pyramids
  RigidTransform pose;
  double d_x = 0.0;      // RMSE of the ground-truth pairs under `pose`
  double rre_rad = 0.0;  // regression targets for the l1_rt head
  double rte = 0.0;
};

struct TrainingSet {
  std::vector<FeaturePyramid> pyramids;  // geometry only; no projection needed
  std::vector<TrainingSample> samples;
};

struct TrainConfig {
  std::size_t epochs = 40;
  double lr0 = 1e-3;
  double decay = 0.05;  // lr_epoch = lr0 * (1 - decay)^epoch
  double weight_decay = 1e-5;
  std::size_t batch_pos = 10;
  std::size_t batch_neg = 10;
  // 0 means every batch the smaller label class can fill.
  std::size_t max_batches_per_epoch = 0;
  std::uint64_t seed = 0;
  LossConfig loss;
  PaaConfig paa;
};

struct TrainLog {
  std::vector<double> epoch_loss;  // mean batch loss per epoch
  std::vector<double> batch_loss;
};

/// Each epoch shuffles the correct and incorrect samples separately (seeded
/// by seed and epoch), then runs batches of batch_pos correct plus batch_neg
/// incorrect poses: training-mode forward with batch norm over the batch of
/// global features, backward, one Adam step. Throws kDataset when a label
/// class is missing.
TrainLog train(DeepPeModel& model, const TrainingSet& data, const TrainConfig& cfg);

/// Loss of one batch in training mode (no parameter update).
nn::Var batch_loss(const DeepPeModel& model, const TrainingSet& data,
                   const std::vector<std::size_t>& sample_ids, const TrainConfig& cfg,
                   bool training, std::uint64_t step);

}  // namespace dpe
