#pragma once

#include <cstdint>
#include <vector>

#include "deeppe/geom3d.hpp"

namespace dpe {

struct Neighbor {
  std::uint32_t index;
  double distance;
};

/// Exact 3-d kd-tree over a cloud's points. Results are ordered by
/// (distance, original index), so equal distances resolve to the lower index.
class SpatialIndex {
 public:
  /// Median split on the widest axis; throws kEmptyInput for an empty cloud.
  explicit SpatialIndex(const PointCloud& cloud);
  explicit SpatialIndex(std::vector<Point3> points);

  std::size_t size() const noexcept { return points_.size(); }
  const Point3& point(std::uint32_t index) const { return points_[index]; }

  /// Exactly min(k, size()) nearest points.
  std::vector<Neighbor> knn(const Point3& query, std::size_t k) const;
  /// All points with distance <= radius.
  std::vector<Neighbor> radius_search(const Point3& query, double radius) const;
  /// Distance to the nearest point.
  double nearest_distance(const Point3& query) const;

 private:
  struct Node {
    // Leaf when axis < 0; then [begin, end) indexes order_.
    int axis = -1;
    double split = 0.0;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  std::vector<Point3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace dpe
