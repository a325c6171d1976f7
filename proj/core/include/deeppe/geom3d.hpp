#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <limits>
#include <unordered_set>
#include <vector>

namespace dpe {

using Point3 = Eigen::Vector3d;

/// Ordered point set with optional per-point unit normals.
struct PointCloud {
  std::vector<Point3> points;
  std::vector<Eigen::Vector3d> normals;  // empty, or one per point

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  bool has_normals() const noexcept { return !normals.empty(); }
};

/// Proper rigid motion x -> R x + t. Construction validates that R is
/// orthonormal with determinant +1 (tolerance 1e-6).
class RigidTransform {
 public:
  RigidTransform();
  RigidTransform(const Eigen::Matrix3d& rotation,
                 const Eigen::Vector3d& translation);

  static RigidTransform identity() { return {}; }
  /// Rotation of `angle_rad` about `axis` (normalized internally).
  static RigidTransform from_axis_angle(const Eigen::Vector3d& axis,
                                        double angle_rad,
                                        const Eigen::Vector3d& translation =
                                            Eigen::Vector3d::Zero());
  /// Row-major R (9 values) followed by t (3 values).
  static RigidTransform from_row_major(const std::vector<double>& values);

  const Eigen::Matrix3d& rotation() const noexcept { return rotation_; }
  const Eigen::Vector3d& translation() const noexcept { return translation_; }
  Eigen::Matrix4d matrix() const;
  std::vector<double> to_row_major() const;

  Point3 operator()(const Point3& p) const {
    return rotation_ * p + translation_;
  }

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

bool is_valid_rotation(const Eigen::Matrix3d& r, double tol = 1e-6);

/// compose(a, b)(x) == a(b(x)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);
PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud);

/// Relative rotation error (geodesic angle between rotations) in degrees.
double rre(const RigidTransform& estimate, const RigidTransform& truth);
/// Relative translation error in meters.
double rte(const RigidTransform& estimate, const RigidTransform& truth);

struct Correspondence {
  std::uint32_t source_index = 0;
  std::uint32_t target_index = 0;
  // Filled on demand under a specific pose.
  double residual = std::numeric_limits<double>::quiet_NaN();
};

/// Putative or ground-truth point pairs. Duplicate (source, target) pairs are
/// rejected on insertion.
class CorrespondenceSet {
 public:
  CorrespondenceSet() = default;
  explicit CorrespondenceSet(bool is_ground_truth)
      : is_ground_truth_(is_ground_truth) {}
  CorrespondenceSet(std::vector<Correspondence> pairs, bool is_ground_truth);

  void add(std::uint32_t source_index, std::uint32_t target_index);

  const std::vector<Correspondence>& pairs() const noexcept { return pairs_; }
  std::vector<Correspondence>& mutable_pairs() noexcept { return pairs_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }
  bool is_ground_truth() const noexcept { return is_ground_truth_; }

  /// Throws kInvalidArgument if any index exceeds the given cloud sizes.
  void check_bounds(std::size_t source_size, std::size_t target_size) const;
  /// Writes ||T(p) - q|| into every pair's residual slot.
  void fill_residuals(const RigidTransform& t, const PointCloud& src,
                      const PointCloud& tgt);

 private:
  std::vector<Correspondence> pairs_;
  std::unordered_set<std::uint64_t> keys_;
  bool is_ground_truth_ = false;
};

/// Root mean square of ||T(p) - q|| over ground-truth pairs.
double rmse_correspondences(const RigidTransform& t,
                            const CorrespondenceSet& gt, const PointCloud& src,
                            const PointCloud& tgt);

/// One centroid per occupied voxel, emitted in ascending (x, y, z) voxel-key
/// order. Normals are not carried over; re-estimate them on the result.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel);

/// ASCII PLY subset: vertex element with x/y/z and optional nx/ny/nz.
PointCloud read_ply(const std::filesystem::path& path);
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace dpe
