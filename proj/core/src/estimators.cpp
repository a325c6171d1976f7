#include "deeppe/estimators.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "deeppe/error.hpp"

namespace dpe {

std::string_view pose_origin_name(PoseOrigin origin) {
  switch (origin) {
    case PoseOrigin::kRansac: return "ransac";
    case PoseOrigin::kSc2Seed: return "sc2";
    case PoseOrigin::kSc2Fallback: return "sc2_fallback";
    case PoseOrigin::kPerturbSmall: return "perturb_small";
    case PoseOrigin::kPerturbLarge: return "perturb_large";
    case PoseOrigin::kExternal: return "external";
  }
  return "unknown";
}

RigidTransform kabsch(const CorrespondenceSet& corrs, const PointCloud& src,
                      const PointCloud& tgt, std::span<const double> weights) {
  if (!weights.empty() && weights.size() != corrs.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "kabsch: " + std::to_string(weights.size()) + " weights for " +
                    std::to_string(corrs.size()) + " pairs");
  }
  corrs.check_bounds(src.size(), tgt.size());
  const auto& pairs = corrs.pairs();
  auto weight = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };

  double total = 0.0;
  std::size_t effective = 0;
  Eigen::Vector3d src_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d tgt_mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double w = weight(i);
    if (w < 0.0 || !std::isfinite(w)) {
      throw Error(ErrorCode::kInvalidArgument, "kabsch weights must be finite and non-negative");
    }
    if (w == 0.0) continue;
    ++effective;
    total += w;
    src_mean += w * src.points[pairs[i].source_index];
    tgt_mean += w * tgt.points[pairs[i].target_index];
  }
  if (effective < 3) {
    throw Error(ErrorCode::kDegenerate,
                "kabsch needs at least 3 weighted pairs, got " + std::to_string(effective));
  }
  src_mean /= total;
  tgt_mean /= total;

  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double w = weight(i);
    if (w == 0.0) continue;
    cross += w * (src.points[pairs[i].source_index] - src_mean) *
             (tgt.points[pairs[i].target_index] - tgt_mean).transpose();
  }
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0)) {
    throw Error(ErrorCode::kDegenerate, "kabsch: rank-deficient cross-covariance");
  }
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Eigen::Matrix3d r = v * d * u.transpose();
  return {r, tgt_mean - r * src_mean};
}

namespace {

std::size_t consensus(const RigidTransform& t, const CorrespondenceSet& corrs,
                      const PointCloud& src, const PointCloud& tgt, double eps) {
  std::size_t count = 0;
  for (const auto& c : corrs.pairs()) {
    if ((t(src.points[c.source_index]) - tgt.points[c.target_index]).norm() < eps) {
      ++count;
    }
  }
  return count;
}

constexpr std::size_t kMaxSampleRetries = 100;

}  // namespace

CandidatePoseSet ransac(const CorrespondenceSet& corrs, const PointCloud& src,
                        const PointCloud& tgt, std::size_t iterations,
                        double inlier_eps, std::uint64_t seed) {
  if (corrs.size() < 3) {
    throw Error(ErrorCode::kDegenerate, "ransac needs at least 3 correspondences");
  }
  corrs.check_bounds(src.size(), tgt.size());
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, corrs.size() - 1);
  CandidatePoseSet out;
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t attempt = 0; attempt < kMaxSampleRetries; ++attempt) {
      std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
      if (a == b || a == c || b == c) continue;
      CorrespondenceSet sample(false);
      for (const auto idx : {a, b, c}) {
        const auto& p = corrs.pairs()[idx];
        sample.add(p.source_index, p.target_index);
      }
      try {
        const auto pose = kabsch(sample, src, tgt);
        out.add(pose, {PoseOrigin::kRansac, it,
                       consensus(pose, corrs, src, tgt, inlier_eps)});
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerate) throw;
      }
    }
  }
  if (out.empty()) {
    throw Error(ErrorCode::kDegenerate, "ransac: every sample was degenerate");
  }
  return out;
}

CompatibilityGraph compatibility_graph(const CorrespondenceSet& corrs,
                                       const PointCloud& src,
                                       const PointCloud& tgt,
                                       double dist_sigma) {
  if (!(dist_sigma > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "dist_sigma must be positive");
  }
  corrs.check_bounds(src.size(), tgt.size());
  const auto n = static_cast<Eigen::Index>(corrs.size());
  const auto& pairs = corrs.pairs();
  CompatibilityGraph g;
  g.first_order = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXf hard = Eigen::MatrixXf::Zero(n, n);
  const double inv_s2 = 1.0 / (dist_sigma * dist_sigma);
  for (Eigen::Index i = 0; i < n; ++i) {
    g.first_order(i, i) = 1.0;
    hard(i, i) = 1.0f;
    const Point3& pi = src.points[pairs[i].source_index];
    const Point3& qi = tgt.points[pairs[i].target_index];
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double delta = std::abs((pi - src.points[pairs[j].source_index]).norm() -
                                    (qi - tgt.points[pairs[j].target_index]).norm());
      const double score = std::max(0.0, 1.0 - delta * delta * inv_s2);
      g.first_order(i, j) = g.first_order(j, i) = score;
      if (score > 0.5) hard(i, j) = hard(j, i) = 1.0f;
    }
  }
  // Entries are small integer counts, exact in single precision.
  const Eigen::MatrixXf common = hard * hard;
  g.second_order = g.first_order.cwiseProduct(common.cast<double>());
  return g;
}

Eigen::VectorXd leading_eigenvector(const Eigen::MatrixXd& m,
                                    std::size_t iterations) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m.rows());
  v /= v.norm();
  for (std::size_t i = 0; i < iterations; ++i) {
    Eigen::VectorXd next = m * v;
    const double norm = next.norm();
    if (norm == 0.0) break;
    v = next / norm;
  }
  return v;
}

CandidatePoseSet sc2_estimate(const CorrespondenceSet& corrs,
                              const PointCloud& src, const PointCloud& tgt,
                              const Sc2Params& params) {
  if (corrs.size() < 3) {
    throw Error(ErrorCode::kDegenerate, "sc2 needs at least 3 correspondences");
  }
  const auto graph = compatibility_graph(corrs, src, tgt, params.dist_sigma);
  const auto n = static_cast<Eigen::Index>(corrs.size());
  const Eigen::MatrixXd& m2 = graph.second_order;

  const bool no_edges =
      (m2 - Eigen::MatrixXd(m2.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
  auto fallback = [&] {
    auto poses = ransac(corrs, src, tgt, std::max<std::size_t>(params.seed_count, 1),
                        params.fallback_inlier_eps, params.fallback_seed);
    for (auto& p : poses.provenance) p.origin = PoseOrigin::kSc2Fallback;
    return poses;
  };
  if (no_edges) return fallback();

  const Eigen::VectorXd eig = leading_eigenvector(m2, params.power_iters);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return eig(a) > eig(b);
  });
  const auto seeds = std::min<std::size_t>(params.seed_count, order.size());

  CandidatePoseSet out;
  std::vector<Eigen::Index> local(static_cast<std::size_t>(n));
  for (std::size_t s = 0; s < seeds; ++s) {
    const Eigen::Index seed = order[s];
    std::iota(local.begin(), local.end(), Eigen::Index{0});
    std::stable_sort(local.begin(), local.end(), [&](Eigen::Index a, Eigen::Index b) {
      return m2(seed, a) > m2(seed, b);
    });
    CorrespondenceSet subset(false);
    std::vector<double> weights;
    for (std::size_t j = 0; j < local.size() && subset.size() < params.local_k; ++j) {
      const Eigen::Index idx = local[j];
      if (m2(seed, idx) <= 0.0) break;
      const auto& c = corrs.pairs()[static_cast<std::size_t>(idx)];
      subset.add(c.source_index, c.target_index);
      weights.push_back(std::abs(eig(idx)));
    }
    try {
      out.add(kabsch(subset, src, tgt, weights),
              {PoseOrigin::kSc2Seed, static_cast<std::size_t>(seed), std::nullopt});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerate) throw;
    }
  }
  if (out.empty()) return fallback();
  return out;
}

CandidatePoseSet perturb_gt_poses(const RigidTransform& t_gt,
                                  const PerturbParams& params,
                                  std::uint64_t seed) {
  if (params.small_min_deg < 0 || params.small_min_deg > params.small_max_deg ||
      params.large_min_deg < 0 || params.large_min_deg > params.large_max_deg ||
      params.trans_scale < 0) {
    throw Error(ErrorCode::kInvalidArgument, "perturbation ranges must be ordered and non-negative");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr double kDeg = std::numbers::pi / 180.0;

  auto draw = [&](double lo_deg, double hi_deg) {
    Eigen::Vector3d axis;
    do {
      axis = {gauss(rng), gauss(rng), gauss(rng)};
    } while (axis.norm() < 1e-12);
    const double angle = (lo_deg + (hi_deg - lo_deg) * unit(rng)) * kDeg;
    Eigen::Vector3d dir;
    do {
      dir = {gauss(rng), gauss(rng), gauss(rng)};
    } while (dir.norm() < 1e-12);
    const double radius = params.trans_scale * std::cbrt(unit(rng));
    const auto delta =
        RigidTransform::from_axis_angle(axis, angle, dir.normalized() * radius);
    return compose(delta, t_gt);
  };

  CandidatePoseSet out;
  for (std::size_t i = 0; i < params.n_small; ++i) {
    out.add(draw(params.small_min_deg, params.small_max_deg),
            {PoseOrigin::kPerturbSmall, i, std::nullopt});
  }
  for (std::size_t i = 0; i < params.n_large; ++i) {
    out.add(draw(params.large_min_deg, params.large_max_deg),
            {PoseOrigin::kPerturbLarge, i, std::nullopt});
  }
  return out;
}

}  // namespace dpe
