#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "deeppe/descriptors.hpp"
#include "deeppe/evaluators.hpp"
#include "deeppe/geom3d.hpp"
#include "deeppe/model.hpp"
#include "deeppe/nn/tensor.hpp"
#include "deeppe/pyramid.hpp"

// Slow, direct reference implementations used to check the library.
namespace dpe::testing {

using IndexDistance = std::pair<std::uint32_t, double>;

/// Every point sorted by (distance, index); the first k.
std::vector<IndexDistance> brute_knn(const std::vector<Point3>& pts, const Point3& q,
                                     std::size_t k);
std::vector<IndexDistance> brute_radius(const std::vector<Point3>& pts, const Point3& q,
                                        double r);

/// Textbook SPFH/FPFH over an exhaustive neighbor scan.
FeatureMatrix fpfh_oracle(const PointCloud& cloud_with_normals, double radius, int bins,
                          std::vector<std::uint8_t>* empty = nullptr);

/// Symmetric truncated chamfer score by double loop (negated, like tcd_score).
double tcd_oracle(const PointCloud& src, const PointCloud& tgt, const RigidTransform& t,
                  double trunc);
double rmse_oracle(const RigidTransform& t, const CorrespondenceSet& gt, const PointCloud& src,
                   const PointCloud& tgt);

nn::Tensor matmul_oracle(const nn::Tensor& a, const nn::Tensor& b);
nn::Tensor softmax_oracle(const nn::Tensor& t);

/// Top ceil(n * delta) indices by count, lowest index first among equals,
/// returned ascending. Picks one at a time by linear scan.
std::vector<std::size_t> preselect_oracle(const std::vector<std::size_t>& counts, double delta);

/// Per-element attention loop: for each coarse row, head and slot.
nn::Tensor paa_oracle(const nn::Tensor& coarse, const nn::Tensor& volume,
                      const nn::Tensor& wq, const nn::Tensor& wk, const nn::Tensor& wv,
                      std::size_t k, std::size_t heads);

/// Neighbor slots by exhaustive scan of the other side's fine points.
std::vector<std::int64_t> volume_slots_oracle(const FeaturePyramid& pyr, const RigidTransform& t,
                                              const PaaConfig& cfg, VolumeDirection dir);

/// The MLP head in evaluation mode written with plain Eigen algebra.
nn::Tensor head_oracle(const DeepPeModel& model, const nn::Tensor& g);

/// evaluate_pose recomposed from the oracles above.
double evaluate_pose_oracle(const DeepPeModel& model, const FeaturePyramid& pyr,
                            const RigidTransform& t, const PaaConfig& cfg);

}  // namespace dpe::testing
