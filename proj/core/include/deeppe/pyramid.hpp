#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "deeppe/descriptors.hpp"
#include "deeppe/geom3d.hpp"
#include "deeppe/nn/tensor.hpp"
#include "deeppe/spatial.hpp"

namespace dpe {

struct PyramidConfig {
  double voxel_fine = 0.05;
  double voxel_coarse = 0.2;
  double fpfh_radius = 0.15;
  std::size_t normal_k = 16;
};

/// One cloud's two levels. Descriptors are FPFH histograms scaled to [0, 1];
/// the coarse descriptor of a voxel is the mean of its fine descriptors.
/// The projected features (F-tilde, F-hat) and the cached key/value
/// projections of the fine features are filled by project_features().
struct PyramidSide {
  PointCloud fine;
  PointCloud coarse;
  FeatureMatrix fine_desc;
  FeatureMatrix coarse_desc;
  std::shared_ptr<const SpatialIndex> fine_index;

  // Constant graph leaves, shared by every pose evaluated on this pyramid.
  nn::Var fine_feats;    // |fine| x d
  nn::Var coarse_feats;  // |coarse| x d
  nn::Var fine_keys;     // fine_feats * W^K
  nn::Var fine_values;   // fine_feats * W^V
};

struct FeaturePyramid {
  PyramidSide p;  // source
  PyramidSide q;  // target
  std::size_t d = 0;  // 0 until features are projected
};

/// Weight-independent part of the pyramid: both levels, normals, descriptors
/// and the fine-level indices. Throws kEmptyInput if a level is empty.
FeaturePyramid build_pyramid(const PointCloud& src, const PointCloud& tgt,
                             const PyramidConfig& cfg);

struct PaaConfig {
  std::size_t k = 16;
  double t = 0.1;
  std::size_t heads = 4;
  std::size_t d = 64;
  // Off: padded slots keep their literal zero keys (score 0) in the softmax.
  bool masked_softmax = false;

  void validate() const;
};

enum class VolumeDirection {
  kPToQ,  // coarse P-hat moved by T, neighbors in fine Q-tilde
  kQToP,  // coarse Q-hat moved by T^-1, neighbors in fine P-tilde
};

/// Neighbor slots of a feature volume: row i*k + j holds the fine index of
/// the j-th nearest neighbor of coarse point i, or nn::kPadRow when that
/// neighbor is farther than t or missing.
struct VolumeIndex {
  std::size_t coarse_count = 0;
  std::size_t k = 0;
  std::vector<std::int64_t> slots;
  std::vector<std::uint8_t> pad;  // 1 where padded
};

VolumeIndex build_volume_index(const FeaturePyramid& pyr, const RigidTransform& t,
                               const PaaConfig& cfg, VolumeDirection direction);

/// The dense (coarse_count * k) x d volume over the other side's fine
/// features, with zero rows in padded slots.
nn::Tensor build_feature_volume(const FeaturePyramid& pyr, const RigidTransform& t,
                                const PaaConfig& cfg, VolumeDirection direction,
                                std::vector<std::uint8_t>* pad_mask = nullptr);

}  // namespace dpe
