#include "deeppe/geom3d.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <tuple>

#include "deeppe/error.hpp"

namespace dpe {

namespace {

std::uint64_t pair_key(std::uint32_t s, std::uint32_t t) {
  return (static_cast<std::uint64_t>(s) << 32) | t;
}

}  // namespace

bool is_valid_rotation(const Eigen::Matrix3d& r, double tol) {
  if (!r.allFinite()) return false;
  const Eigen::Matrix3d gram = r.transpose() * r;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) {
    return false;
  }
  return std::abs(r.determinant() - 1.0) <= tol;
}

RigidTransform::RigidTransform()
    : rotation_(Eigen::Matrix3d::Identity()),
      translation_(Eigen::Vector3d::Zero()) {}

RigidTransform::RigidTransform(const Eigen::Matrix3d& rotation,
                               const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  if (!is_valid_rotation(rotation_)) {
    std::ostringstream os;
    os << "rotation is not orthonormal with det +1:\n" << rotation_;
    throw Error(ErrorCode::kInvalidArgument, os.str());
  }
  if (!translation_.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "translation is not finite");
  }
}

RigidTransform RigidTransform::from_axis_angle(
    const Eigen::Vector3d& axis, double angle_rad,
    const Eigen::Vector3d& translation) {
  if (axis.norm() == 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "rotation axis has zero length");
  }
  const Eigen::AngleAxisd aa(angle_rad, axis.normalized());
  return {aa.toRotationMatrix(), translation};
}

RigidTransform RigidTransform::from_row_major(
    const std::vector<double>& values) {
  if (values.size() != 12) {
    throw Error(ErrorCode::kInvalidArgument,
                "pose needs 12 numbers (row-major R then t), got " +
                    std::to_string(values.size()));
  }
  Eigen::Matrix3d r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = values[3 * i + j];
  return {r, Eigen::Vector3d(values[9], values[10], values[11])};
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

std::vector<double> RigidTransform::to_row_major() const {
  std::vector<double> out;
  out.reserve(12);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.push_back(rotation_(i, j));
  for (int i = 0; i < 3; ++i) out.push_back(translation_(i));
  return out;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation() * b.rotation(),
          a.rotation() * b.translation() + a.translation()};
}

RigidTransform invert(const RigidTransform& t) {
  const Eigen::Matrix3d rt = t.rotation().transpose();
  return {rt, -(rt * t.translation())};
}

PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(t(p));
  if (cloud.has_normals()) {
    out.normals.reserve(cloud.normals.size());
    for (const auto& n : cloud.normals) out.normals.push_back(t.rotation() * n);
  }
  return out;
}

double rre(const RigidTransform& estimate, const RigidTransform& truth) {
  const double trace =
      (estimate.rotation().transpose() * truth.rotation()).trace();
  const double c = std::clamp((trace - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

double rte(const RigidTransform& estimate, const RigidTransform& truth) {
  return (estimate.translation() - truth.translation()).norm();
}

CorrespondenceSet::CorrespondenceSet(std::vector<Correspondence> pairs,
                                     bool is_ground_truth)
    : is_ground_truth_(is_ground_truth) {
  pairs_.reserve(pairs.size());
  for (const auto& c : pairs) add(c.source_index, c.target_index);
}

void CorrespondenceSet::add(std::uint32_t source_index,
                            std::uint32_t target_index) {
  if (!keys_.insert(pair_key(source_index, target_index)).second) {
    throw Error(ErrorCode::kInvalidArgument,
                "duplicate correspondence (" + std::to_string(source_index) +
                    ", " + std::to_string(target_index) + ")");
  }
  pairs_.push_back({source_index, target_index});
}

void CorrespondenceSet::check_bounds(std::size_t source_size,
                                     std::size_t target_size) const {
  for (const auto& c : pairs_) {
    if (c.source_index >= source_size || c.target_index >= target_size) {
      throw Error(ErrorCode::kInvalidArgument,
                  "correspondence (" + std::to_string(c.source_index) + ", " +
                      std::to_string(c.target_index) +
                      ") out of bounds for clouds of size " +
                      std::to_string(source_size) + " and " +
                      std::to_string(target_size));
    }
  }
}

void CorrespondenceSet::fill_residuals(const RigidTransform& t,
                                       const PointCloud& src,
                                       const PointCloud& tgt) {
  check_bounds(src.size(), tgt.size());
  for (auto& c : pairs_) {
    c.residual = (t(src.points[c.source_index]) - tgt.points[c.target_index])
                     .norm();
  }
}

double rmse_correspondences(const RigidTransform& t,
                            const CorrespondenceSet& gt, const PointCloud& src,
                            const PointCloud& tgt) {
  if (gt.empty()) {
    throw Error(ErrorCode::kNoGroundTruth, "no ground-truth correspondences");
  }
  gt.check_bounds(src.size(), tgt.size());
  double sum = 0.0;
  for (const auto& c : gt.pairs()) {
    sum += (t(src.points[c.source_index]) - tgt.points[c.target_index])
               .squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(gt.size()));
}

PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  if (!(voxel > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "voxel size must be positive, got " + std::to_string(voxel));
  }
  struct Accum {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    std::size_t count = 0;
  };
  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  std::map<Key, Accum> cells;
  for (const auto& p : cloud.points) {
    const Key key{static_cast<std::int64_t>(std::floor(p.x() / voxel)),
                  static_cast<std::int64_t>(std::floor(p.y() / voxel)),
                  static_cast<std::int64_t>(std::floor(p.z() / voxel))};
    auto& cell = cells[key];
    cell.sum += p;
    ++cell.count;
  }
  PointCloud out;
  out.points.reserve(cells.size());
  for (const auto& [key, cell] : cells) {
    out.points.push_back(cell.sum / static_cast<double>(cell.count));
  }
  return out;
}

}  // namespace dpe
