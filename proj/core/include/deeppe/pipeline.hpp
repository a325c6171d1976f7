#pragma once

#include <cstdint>

#include "deeppe/descriptors.hpp"
#include "deeppe/estimators.hpp"
#include "deeppe/synth.hpp"

namespace dpe {

/// Front end shared by training, benchmarking and the CLI: normals, FPFH,
/// putative matching, then candidate poses from the estimators plus
/// optional perturbations of the ground truth.
struct PipelineConfig {
  std::size_t normal_k = 16;
  double fpfh_radius = 0.15;
  bool mutual = false;
  std::size_t max_corrs = 400;     // source points sampled for matching
  double inlier_eps = 0.1;         // tau1, also the CC threshold
  bool use_ransac = true;
  std::size_t ransac_iters = 50;
  bool use_sc2 = true;
  Sc2Params sc2;
  // Inliers above this ratio are dropped at random (seeded). 1 disables.
  double max_inlier_ratio = 1.0;
  bool inject_perturbations = true;
  PerturbParams perturb;
};

struct PreparedPair {
  CorrespondenceSet corrs;
  double inlier_ratio = 0.0;
  CandidatePoseSet candidates;
};

/// Putative correspondences between two clouds (no ground truth needed).
CorrespondenceSet putative_correspondences(const PointCloud& src, const PointCloud& tgt,
                                           const PipelineConfig& cfg, std::uint64_t seed);
/// Estimator candidates only (RANSAC then SC2, in that order).
CandidatePoseSet estimate_candidates(const CorrespondenceSet& corrs, const PointCloud& src,
                                     const PointCloud& tgt, const PipelineConfig& cfg,
                                     std::uint64_t seed);
/// Full front end on a synthetic pair, including inlier thinning and
/// ground-truth perturbations when configured.
PreparedPair prepare_pair(const ScenePair& pair, const PipelineConfig& cfg,
                          std::uint64_t seed);

/// Inliers removed at random until inlier_ratio <= max_ratio.
CorrespondenceSet thin_inliers(const CorrespondenceSet& corrs, const ScenePair& pair,
                               double tau1, double max_ratio, std::uint64_t seed);

/// Per-pair seed derived from a master seed, so pairs can be generated in
/// any order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace dpe
