#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "deeppe/geom3d.hpp"

namespace dpe {

enum class PoseOrigin {
  kRansac,
  kSc2Seed,
  kSc2Fallback,  // sc2 found no compatible pairs and fell back to ransac
  kPerturbSmall,
  kPerturbLarge,
  kExternal,
};

std::string_view pose_origin_name(PoseOrigin origin);

struct PoseProvenance {
  PoseOrigin origin = PoseOrigin::kExternal;
  std::size_t id = 0;                     // iteration, seed or draw index
  std::optional<std::size_t> consensus;   // CC count recorded by ransac
};

/// Candidate pose hypotheses with one provenance record each.
struct CandidatePoseSet {
  std::vector<RigidTransform> poses;
  std::vector<PoseProvenance> provenance;

  std::size_t size() const noexcept { return poses.size(); }
  bool empty() const noexcept { return poses.empty(); }
  void add(const RigidTransform& pose, PoseProvenance prov) {
    poses.push_back(pose);
    provenance.push_back(prov);
  }
  void append(const CandidatePoseSet& other) {
    poses.insert(poses.end(), other.poses.begin(), other.poses.end());
    provenance.insert(provenance.end(), other.provenance.begin(),
                      other.provenance.end());
  }
};

/// Weighted least-squares rigid alignment of corresponding points. Pass an
/// empty span for uniform weights.
RigidTransform kabsch(const CorrespondenceSet& corrs, const PointCloud& src,
                      const PointCloud& tgt, std::span<const double> weights = {});

/// Every hypothesis from `iterations` minimal 3-pair samples, in iteration
/// order, each tagged with its consensus count at `inlier_eps`.
CandidatePoseSet ransac(const CorrespondenceSet& corrs, const PointCloud& src,
                        const PointCloud& tgt, std::size_t iterations,
                        double inlier_eps, std::uint64_t seed);

struct Sc2Params {
  double dist_sigma = 0.1;
  std::size_t seed_count = 50;
  std::size_t local_k = 30;
  std::size_t power_iters = 50;
  // Used only when no pair is compatible with any other.
  std::uint64_t fallback_seed = 0;
  double fallback_inlier_eps = 0.1;
};

/// Second-order spatial-compatibility matrix of a correspondence set.
struct CompatibilityGraph {
  Eigen::MatrixXd first_order;   // max(0, 1 - delta^2 / sigma^2)
  Eigen::MatrixXd second_order;  // first_order .* (hard * hard)
};
CompatibilityGraph compatibility_graph(const CorrespondenceSet& corrs,
                                       const PointCloud& src,
                                       const PointCloud& tgt,
                                       double dist_sigma);
/// Leading eigenvector by normalized power iteration from the all-ones vector.
Eigen::VectorXd leading_eigenvector(const Eigen::MatrixXd& m,
                                    std::size_t iterations);

CandidatePoseSet sc2_estimate(const CorrespondenceSet& corrs,
                              const PointCloud& src, const PointCloud& tgt,
                              const Sc2Params& params);

struct PerturbParams {
  std::size_t n_small = 10;
  std::size_t n_large = 10;
  double small_min_deg = 0.0;
  double small_max_deg = 15.0;
  double large_min_deg = 15.0;
  double large_max_deg = 60.0;
  double trans_scale = 0.5;  // radius of the translation ball, meters
};

/// Poses dT * T_gt with a uniformly random axis, an angle uniform in the
/// bucket's range and a translation uniform in a ball.
CandidatePoseSet perturb_gt_poses(const RigidTransform& t_gt,
                                  const PerturbParams& params,
                                  std::uint64_t seed);

}  // namespace dpe
