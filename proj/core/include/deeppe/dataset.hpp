#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deeppe/pipeline.hpp"
#include "deeppe/pyramid.hpp"
#include "deeppe/synth.hpp"
#include "deeppe/train.hpp"

namespace dpe {

struct DatasetConfig {
  SceneParams scene;
  PipelineConfig pipeline;
  std::size_t n_correct = 10;
  std::size_t n_incorrect = 10;
  double beta = 0.2;
  std::size_t max_rounds = 8;  // re-augmentation rounds before a pair is dropped
};

struct LabelledPose {
  RigidTransform pose;
  PoseProvenance provenance;
  double d_x = 0.0;
  bool correct = false;  // d_x < beta
  double rre_deg = 0.0;
  double rte = 0.0;
};

struct DatasetPair {
  std::uint64_t seed = 0;
  ScenePair scene;
  double inlier_ratio = 0.0;
  std::vector<LabelledPose> poses;
};

struct Dataset {
  std::vector<DatasetPair> pairs;
  std::vector<std::string> log;  // one line per dropped or re-augmented pair
};

/// Labels every candidate of every pair with d(x) against the ground-truth
/// correspondences. Pairs short of either label get extra perturbations
/// (ever smaller for correct poses, large for incorrect ones) and are dropped
/// with a log line if max_rounds does not suffice.
Dataset generate_dataset(const DatasetConfig& cfg, const std::vector<std::uint64_t>& seeds);
/// Same, over scenes that already exist (for example loaded from disk). Each
/// scene's seed keys its front end and augmentation.
Dataset generate_dataset(const DatasetConfig& cfg, std::vector<ScenePair> scenes);

/// Pyramids and flattened samples for train().
TrainingSet to_training_set(const Dataset& data, const PyramidConfig& cfg);

}  // namespace dpe
