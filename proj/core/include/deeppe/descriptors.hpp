#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "deeppe/geom3d.hpp"

namespace dpe {

inline constexpr int kFpfhBins = 11;
inline constexpr int kFpfhDim = 3 * kFpfhBins;

struct NormalEstimate {
  PointCloud cloud;                   // input points with unit normals
  std::vector<std::uint8_t> degenerate;  // 1 where fewer than 3 distinct neighbors
};

/// PCA normals from the k nearest neighbors (self included), flipped to face
/// `viewpoint`. Degenerate neighborhoods get +z and a flag.
NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t k,
                                const Eigen::Vector3d& viewpoint =
                                    Eigen::Vector3d::Zero());

/// Row-major feature matrix, one descriptor per point.
using FeatureMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FeatureCloud {
  PointCloud cloud;
  FeatureMatrix features;             // size() x dim
  std::vector<std::uint8_t> empty;    // 1 where the descriptor is all zero

  std::size_t size() const noexcept { return cloud.size(); }
};

/// Darboux-frame pair features (theta, alpha, phi) between an oriented point
/// pair, using the standard source/target swap.
struct PairFeature {
  double theta = 0.0;  // in [-pi, pi]
  double alpha = 0.0;  // in [-1, 1]
  double phi = 0.0;    // in [-1, 1]
  bool valid = false;
};
PairFeature pair_feature(const Point3& p1, const Eigen::Vector3d& n1,
                         const Point3& p2, const Eigen::Vector3d& n2);
/// Histogram bin of a pair feature component for the given bin count.
int feature_bin(double value, double lo, double hi, int bins);

/// Fast point feature histograms: every sub-histogram sums to 100 for points
/// that have neighbors within `radius`; isolated points get a zero feature.
FeatureCloud fpfh(const PointCloud& cloud, double radius, int bins = kFpfhBins);

struct MatchOptions {
  bool mutual = false;
  // 0 keeps every source point; otherwise a seeded subset of this size.
  std::size_t max_source_samples = 0;
  std::uint64_t seed = 0;
};

/// Nearest-neighbor matching in feature space (exhaustive, exact; ties go to
/// the lower target index).
CorrespondenceSet match_features(const FeatureCloud& a, const FeatureCloud& b,
                                 bool mutual);
CorrespondenceSet match_features(const FeatureCloud& a, const FeatureCloud& b,
                                 const MatchOptions& options);

/// Fraction of pairs with ||T_gt(p) - q|| < tau1.
double inlier_ratio(const CorrespondenceSet& corrs, const RigidTransform& t_gt,
                    const PointCloud& src, const PointCloud& tgt, double tau1);

}  // namespace dpe
