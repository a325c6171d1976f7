#include "deeppe/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "deeppe/error.hpp"

namespace dpe {

namespace {

constexpr std::uint32_t kLeafSize = 8;

struct Candidate {
  double d2;
  std::uint32_t index;
  bool operator<(const Candidate& o) const {
    return d2 < o.d2 || (d2 == o.d2 && index < o.index);
  }
};

double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

std::vector<Neighbor> finish(std::vector<Candidate> found) {
  std::sort(found.begin(), found.end());
  std::vector<Neighbor> out;
  out.reserve(found.size());
  for (const auto& c : found) out.push_back({c.index, std::sqrt(c.d2)});
  return out;
}

}  // namespace

SpatialIndex::SpatialIndex(const PointCloud& cloud)
    : SpatialIndex(cloud.points) {}

SpatialIndex::SpatialIndex(std::vector<Point3> points)
    : points_(std::move(points)) {
  if (points_.empty()) {
    throw Error(ErrorCode::kEmptyInput, "cannot build a spatial index over an empty cloud");
  }
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / kLeafSize + 1);
  build(0, static_cast<std::uint32_t>(points_.size()));
}

std::int32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({});
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  Eigen::Vector3d lo = points_[order_[begin]];
  Eigen::Vector3d hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = points_[a][axis];
                     const double cb = points_[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::vector<Neighbor> SpatialIndex::knn(const Point3& query,
                                        std::size_t k) const {
  if (k == 0) {
    throw Error(ErrorCode::kInvalidArgument, "knn requires k >= 1");
  }
  k = std::min(k, points_.size());
  // Max-heap on (d2, index): top is the current worst accepted candidate.
  std::priority_queue<Candidate> heap;

  auto visit = [&](auto&& self, std::int32_t node_id) -> void {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order_[i];
        const Candidate c{squared_distance(points_[idx], query), idx};
        if (heap.size() < k) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      return;
    }
    const double diff = query[node.axis] - node.split;
    const std::int32_t near = diff < 0 ? node.left : node.right;
    const std::int32_t far = diff < 0 ? node.right : node.left;
    self(self, near);
    // Equality keeps exploring so index tie-breaks stay exact.
    if (heap.size() < k || diff * diff <= heap.top().d2) self(self, far);
  };
  visit(visit, 0);

  std::vector<Candidate> found;
  found.reserve(heap.size());
  while (!heap.empty()) {
    found.push_back(heap.top());
    heap.pop();
  }
  return finish(std::move(found));
}

std::vector<Neighbor> SpatialIndex::radius_search(const Point3& query,
                                                  double radius) const {
  if (!(radius > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "radius must be positive");
  }
  const double r2 = radius * radius;
  std::vector<Candidate> found;
  auto visit = [&](auto&& self, std::int32_t node_id) -> void {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order_[i];
        const double d2 = squared_distance(points_[idx], query);
        if (d2 <= r2) found.push_back({d2, idx});
      }
      return;
    }
    const double diff = query[node.axis] - node.split;
    if (diff <= radius) self(self, node.left);
    if (diff >= -radius) self(self, node.right);
  };
  visit(visit, 0);
  return finish(std::move(found));
}

double SpatialIndex::nearest_distance(const Point3& query) const {
  return knn(query, 1).front().distance;
}

}  // namespace dpe
