#include "deeppe/descriptors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <unordered_map>

#include "deeppe/error.hpp"
#include "deeppe/spatial.hpp"

namespace dpe {

NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t k,
                                const Eigen::Vector3d& viewpoint) {
  if (k < 3) {
    throw Error(ErrorCode::kInvalidArgument, "normal estimation needs k >= 3");
  }
  if (cloud.empty()) {
    throw Error(ErrorCode::kEmptyInput, "normal estimation on an empty cloud");
  }
  NormalEstimate out;
  out.cloud.points = cloud.points;
  out.cloud.normals.resize(cloud.size());
  out.degenerate.assign(cloud.size(), 0);

  const SpatialIndex index(cloud);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nbrs = index.knn(cloud.points[i], k);
    // Distinct positions among the neighborhood.
    std::vector<Point3> distinct;
    for (const auto& n : nbrs) {
      const Point3& p = cloud.points[n.index];
      if (std::none_of(distinct.begin(), distinct.end(),
                       [&](const Point3& q) { return q == p; })) {
        distinct.push_back(p);
      }
    }
    if (distinct.size() < 3) {
      out.cloud.normals[i] = Eigen::Vector3d::UnitZ();
      out.degenerate[i] = 1;
      continue;
    }
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& n : nbrs) mean += cloud.points[n.index];
    mean /= static_cast<double>(nbrs.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& n : nbrs) {
      const Eigen::Vector3d d = cloud.points[n.index] - mean;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    Eigen::Vector3d normal = solver.eigenvectors().col(0).normalized();
    if (normal.dot(viewpoint - cloud.points[i]) < 0.0) normal = -normal;
    out.cloud.normals[i] = normal;
  }
  return out;
}

PairFeature pair_feature(const Point3& p1, const Eigen::Vector3d& n1,
                         const Point3& p2, const Eigen::Vector3d& n2) {
  PairFeature f;
  Eigen::Vector3d dp = p2 - p1;
  const double dist = dp.norm();
  if (dist == 0.0) return f;

  Eigen::Vector3d src_n = n1;
  Eigen::Vector3d tgt_n = n2;
  const double angle1 = n1.dot(dp) / dist;
  const double angle2 = n2.dot(dp) / dist;
  if (std::acos(std::abs(angle1)) > std::acos(std::abs(angle2))) {
    src_n = n2;
    tgt_n = n1;
    dp = -dp;
    f.phi = -angle2;
  } else {
    f.phi = angle1;
  }
  Eigen::Vector3d v = dp.cross(src_n);
  const double v_norm = v.norm();
  if (v_norm == 0.0) return {};
  v /= v_norm;
  const Eigen::Vector3d w = src_n.cross(v);
  f.alpha = v.dot(tgt_n);
  f.theta = std::atan2(w.dot(tgt_n), src_n.dot(tgt_n));
  f.valid = true;
  return f;
}

int feature_bin(double value, double lo, double hi, int bins) {
  const int b = static_cast<int>(std::floor(bins * (value - lo) / (hi - lo)));
  return std::clamp(b, 0, bins - 1);
}

FeatureCloud fpfh(const PointCloud& cloud, double radius, int bins) {
  if (!cloud.has_normals() || cloud.normals.size() != cloud.size()) {
    throw Error(ErrorCode::kInvalidArgument, "fpfh requires one normal per point");
  }
  if (!(radius > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "fpfh radius must be positive");
  }
  if (bins < 1) {
    throw Error(ErrorCode::kInvalidArgument, "fpfh needs at least one bin");
  }
  const auto n = cloud.size();
  const int dim = 3 * bins;
  FeatureCloud out;
  out.cloud = cloud;
  out.features = FeatureMatrix::Zero(static_cast<Eigen::Index>(n), dim);
  out.empty.assign(n, 0);
  if (n == 0) return out;

  const SpatialIndex index(cloud);
  std::vector<std::vector<Neighbor>> neighborhoods(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto nbrs = index.radius_search(cloud.points[i], radius);
    std::erase_if(nbrs, [&](const Neighbor& nb) {
      return nb.index == i || nb.distance == 0.0;
    });
    neighborhoods[i] = std::move(nbrs);
  }

  constexpr double kPi = std::numbers::pi;
  FeatureMatrix spfh = FeatureMatrix::Zero(static_cast<Eigen::Index>(n), dim);
  for (std::size_t i = 0; i < n; ++i) {
    int valid = 0;
    for (const auto& nb : neighborhoods[i]) {
      const auto f = pair_feature(cloud.points[i], cloud.normals[i],
                                  cloud.points[nb.index], cloud.normals[nb.index]);
      if (!f.valid) continue;
      ++valid;
      const auto row = static_cast<Eigen::Index>(i);
      spfh(row, feature_bin(f.theta, -kPi, kPi, bins)) += 1.0;
      spfh(row, bins + feature_bin(f.alpha, -1.0, 1.0, bins)) += 1.0;
      spfh(row, 2 * bins + feature_bin(f.phi, -1.0, 1.0, bins)) += 1.0;
    }
    if (valid > 0) spfh.row(static_cast<Eigen::Index>(i)) *= 100.0 / valid;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    Eigen::RowVectorXd acc = spfh.row(row);
    const auto& nbrs = neighborhoods[i];
    if (!nbrs.empty()) {
      Eigen::RowVectorXd weighted = Eigen::RowVectorXd::Zero(dim);
      for (const auto& nb : nbrs) {
        weighted += spfh.row(static_cast<Eigen::Index>(nb.index)) / nb.distance;
      }
      acc += weighted / static_cast<double>(nbrs.size());
    }
    bool any = false;
    for (int s = 0; s < 3; ++s) {
      const double sum = acc.segment(s * bins, bins).sum();
      if (sum > 0.0) {
        acc.segment(s * bins, bins) *= 100.0 / sum;
        any = true;
      }
    }
    if (!any) {
      out.empty[i] = 1;
      continue;
    }
    out.features.row(row) = acc;
  }
  return out;
}

namespace {

std::uint32_t nearest_row(const FeatureMatrix& haystack,
                          const Eigen::Ref<const Eigen::RowVectorXd>& needle) {
  double best = std::numeric_limits<double>::infinity();
  std::uint32_t best_idx = 0;
  const auto dim = haystack.cols();
  for (Eigen::Index j = 0; j < haystack.rows(); ++j) {
    const double* h = haystack.row(j).data();
    double d2 = 0.0;
    for (Eigen::Index c = 0; c < dim; ++c) {
      const double diff = h[c] - needle[c];
      d2 += diff * diff;
      if (d2 > best) break;
    }
    if (d2 < best) {
      best = d2;
      best_idx = static_cast<std::uint32_t>(j);
    }
  }
  return best_idx;
}

}  // namespace

CorrespondenceSet match_features(const FeatureCloud& a, const FeatureCloud& b,
                                 bool mutual) {
  return match_features(a, b, MatchOptions{.mutual = mutual});
}

CorrespondenceSet match_features(const FeatureCloud& a, const FeatureCloud& b,
                                 const MatchOptions& options) {
  if (a.size() == 0 || b.size() == 0) {
    throw Error(ErrorCode::kEmptyInput, "feature matching needs non-empty clouds");
  }
  if (a.features.cols() != b.features.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "feature dimensions differ");
  }
  std::vector<std::uint32_t> sources(a.size());
  std::iota(sources.begin(), sources.end(), 0u);
  if (options.max_source_samples > 0 &&
      options.max_source_samples < sources.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(sources.begin(), sources.end(), rng);
    sources.resize(options.max_source_samples);
    std::sort(sources.begin(), sources.end());
  }

  std::unordered_map<std::uint32_t, std::uint32_t> reverse;
  CorrespondenceSet out(false);
  for (const auto i : sources) {
    const std::uint32_t j = nearest_row(b.features, a.features.row(i));
    if (options.mutual) {
      auto it = reverse.find(j);
      if (it == reverse.end()) {
        it = reverse.emplace(j, nearest_row(a.features, b.features.row(j))).first;
      }
      if (it->second != i) continue;
    }
    out.add(i, j);
  }
  return out;
}

double inlier_ratio(const CorrespondenceSet& corrs, const RigidTransform& t_gt,
                    const PointCloud& src, const PointCloud& tgt, double tau1) {
  if (corrs.empty()) {
    throw Error(ErrorCode::kEmptyInput, "inlier ratio of an empty correspondence set");
  }
  corrs.check_bounds(src.size(), tgt.size());
  std::size_t inliers = 0;
  for (const auto& c : corrs.pairs()) {
    if ((t_gt(src.points[c.source_index]) - tgt.points[c.target_index]).norm() <
        tau1) {
      ++inliers;
    }
  }
  return static_cast<double>(inliers) / static_cast<double>(corrs.size());
}

}  // namespace dpe
