#pragma once

#include <cstdint>
#include <string_view>

#include "deeppe/geom3d.hpp"

namespace dpe {

enum class Surface { kRoom, kTerrain, kPrimitives };

std::string_view surface_name(Surface s);
Surface parse_surface(std::string_view name);

struct SceneParams {
  Surface surface = Surface::kTerrain;
  // Approximate points per crop; sets the crop side to spacing * sqrt(n).
  std::size_t n_points = 2500;
  double overlap_target = 0.3;
  double overlap_tolerance = 0.05;
  double noise_sigma = 0.005;  // RMS displacement per point, meters
  double rot_range_deg = 180.0;
  double trans_range = 0.5;    // sensor position jitter, meters
  double spacing = 0.05;       // surface sample spacing, meters
};

/// Two crops of one surface, each expressed in its own sensor frame (sensor
/// at the origin, looking down at the crop). T_gt maps source coordinates to
/// target coordinates. Shared surface samples appear in both clouds, and
/// gt_corrs pairs them before noise is added.
struct ScenePair {
  PointCloud src;
  PointCloud tgt;
  RigidTransform t_gt;
  CorrespondenceSet gt_corrs{true};
  double overlap = 0.0;  // smaller of the two shared fractions
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Throws kUnreachable when 100 crop placements all miss the overlap target.
ScenePair synth_scene(const SceneParams& params, std::uint64_t seed);

}  // namespace dpe
