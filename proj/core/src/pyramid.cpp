#include "deeppe/pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "deeppe/error.hpp"
#include "deeppe/nn/ops.hpp"

namespace dpe {

namespace {

// Same voxel keys and order as voxel_downsample.
std::vector<std::size_t> voxel_assignment(const PointCloud& cloud, double voxel) {
  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  std::vector<Key> keys;
  keys.reserve(cloud.size());
  std::map<Key, std::size_t> cells;
  for (const auto& p : cloud.points) {
    keys.emplace_back(static_cast<std::int64_t>(std::floor(p.x() / voxel)),
                      static_cast<std::int64_t>(std::floor(p.y() / voxel)),
                      static_cast<std::int64_t>(std::floor(p.z() / voxel)));
    cells.emplace(keys.back(), 0);
  }
  std::size_t next = 0;
  for (auto& [key, idx] : cells) idx = next++;
  std::vector<std::size_t> out;
  out.reserve(keys.size());
  for (const auto& key : keys) out.push_back(cells.at(key));
  return out;
}

PyramidSide build_side(const PointCloud& cloud, const PyramidConfig& cfg,
                       const char* which) {
  PyramidSide side;
  const PointCloud fine = voxel_downsample(cloud, cfg.voxel_fine);
  if (fine.empty()) {
    throw Error(ErrorCode::kEmptyInput, std::string(which) + " fine level is empty");
  }
  const auto normals = estimate_normals(fine, cfg.normal_k);
  const auto feats = fpfh(normals.cloud, cfg.fpfh_radius);
  side.fine = normals.cloud;
  side.fine_desc = feats.features / 100.0;

  side.coarse = voxel_downsample(side.fine, cfg.voxel_coarse);
  if (side.coarse.empty()) {
    throw Error(ErrorCode::kEmptyInput, std::string(which) + " coarse level is empty");
  }
  const auto assign = voxel_assignment(side.fine, cfg.voxel_coarse);
  side.coarse_desc = FeatureMatrix::Zero(static_cast<Eigen::Index>(side.coarse.size()),
                                         side.fine_desc.cols());
  std::vector<double> counts(side.coarse.size(), 0.0);
  for (std::size_t i = 0; i < assign.size(); ++i) {
    side.coarse_desc.row(static_cast<Eigen::Index>(assign[i])) +=
        side.fine_desc.row(static_cast<Eigen::Index>(i));
    counts[assign[i]] += 1.0;
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    side.coarse_desc.row(static_cast<Eigen::Index>(c)) /= counts[c];
  }
  side.fine_index = std::make_shared<SpatialIndex>(side.fine);
  return side;
}

}  // namespace

FeaturePyramid build_pyramid(const PointCloud& src, const PointCloud& tgt,
                             const PyramidConfig& cfg) {
  if (!(cfg.voxel_fine > 0.0) || !(cfg.voxel_coarse > cfg.voxel_fine)) {
    throw Error(ErrorCode::kInvalidArgument,
                "pyramid needs voxel_coarse > voxel_fine > 0, got " +
                    std::to_string(cfg.voxel_coarse) + " and " +
                    std::to_string(cfg.voxel_fine));
  }
  FeaturePyramid pyr;
  pyr.p = build_side(src, cfg, "source");
  pyr.q = build_side(tgt, cfg, "target");
  return pyr;
}

void PaaConfig::validate() const {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "paa: k must be at least 1");
  if (!(t > 0.0)) throw Error(ErrorCode::kInvalidArgument, "paa: t must be positive");
  if (heads < 1 || d % heads != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "paa: d=" + std::to_string(d) + " is not divisible by heads=" +
                    std::to_string(heads));
  }
}

VolumeIndex build_volume_index(const FeaturePyramid& pyr, const RigidTransform& t,
                               const PaaConfig& cfg, VolumeDirection direction) {
  cfg.validate();
  const bool forward = direction == VolumeDirection::kPToQ;
  const PyramidSide& from = forward ? pyr.p : pyr.q;
  const PyramidSide& to = forward ? pyr.q : pyr.p;
  const RigidTransform move = forward ? t : invert(t);

  VolumeIndex vol;
  vol.coarse_count = from.coarse.size();
  vol.k = cfg.k;
  vol.slots.assign(vol.coarse_count * cfg.k, nn::kPadRow);
  vol.pad.assign(vol.coarse_count * cfg.k, 1);
  for (std::size_t i = 0; i < vol.coarse_count; ++i) {
    const auto nbrs = to.fine_index->knn(move(from.coarse.points[i]), cfg.k);
    for (std::size_t j = 0; j < nbrs.size(); ++j) {
      if (nbrs[j].distance > cfg.t) break;
      vol.slots[i * cfg.k + j] = nbrs[j].index;
      vol.pad[i * cfg.k + j] = 0;
    }
  }
  return vol;
}

nn::Tensor build_feature_volume(const FeaturePyramid& pyr, const RigidTransform& t,
                                const PaaConfig& cfg, VolumeDirection direction,
                                std::vector<std::uint8_t>* pad_mask) {
  const auto vol = build_volume_index(pyr, t, cfg, direction);
  const PyramidSide& to = direction == VolumeDirection::kPToQ ? pyr.q : pyr.p;
  if (!to.fine_feats) {
    throw Error(ErrorCode::kInvalidArgument, "pyramid features have not been projected");
  }
  const nn::Tensor& feats = to.fine_feats.value();
  const std::size_t d = feats.cols();
  nn::Tensor out(vol.slots.size(), d);
  for (std::size_t r = 0; r < vol.slots.size(); ++r) {
    if (vol.slots[r] == nn::kPadRow) continue;
    const auto src_row = static_cast<std::size_t>(vol.slots[r]);
    std::copy_n(feats.row_ptr(src_row), d, out.row_ptr(r));
  }
  if (pad_mask) *pad_mask = vol.pad;
  return out;
}

}  // namespace dpe
