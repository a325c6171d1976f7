#include "deeppe/synth.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "deeppe/error.hpp"

namespace dpe {

std::string_view surface_name(Surface s) {
  switch (s) {
    case Surface::kRoom: return "room";
    case Surface::kTerrain: return "terrain";
    case Surface::kPrimitives: return "primitives";
  }
  return "unknown";
}

Surface parse_surface(std::string_view name) {
  for (auto s : {Surface::kRoom, Surface::kTerrain, Surface::kPrimitives}) {
    if (surface_name(s) == name) return s;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown surface '" + std::string(name) + "' (expected room, terrain or primitives)");
}

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSensorHeight = 1.5;

struct Bump {
  double x, y, amp, width;
};

std::vector<Point3> sample_terrain(double half, double h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-half, half);
  std::uniform_real_distribution<double> amp(-0.4, 0.5);
  std::uniform_real_distribution<double> width(0.15, 0.6);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  const auto area = 4.0 * half * half;
  const auto n_bumps = static_cast<int>(std::max(8.0, area * 3.0));
  std::vector<Bump> bumps;
  for (int i = 0; i < n_bumps; ++i) bumps.push_back({pos(rng), pos(rng), amp(rng), width(rng)});
  const double p1 = phase(rng), p2 = phase(rng);
  std::vector<Point3> out;
  for (double x = -half; x <= half; x += h) {
    for (double y = -half; y <= half; y += h) {
      double z = 0.1 * std::sin(1.3 * x + p1) * std::cos(0.9 * y + p2);
      for (const auto& b : bumps) {
        const double r2 = (x - b.x) * (x - b.x) + (y - b.y) * (y - b.y);
        z += b.amp * std::exp(-r2 / (2.0 * b.width * b.width));
      }
      out.emplace_back(x, y, z);
    }
  }
  return out;
}

void sample_box(std::vector<Point3>& out, const Eigen::Vector3d& lo,
                const Eigen::Vector3d& hi, double h) {
  // Top and four sides; the bottom rests on the floor.
  for (double x = lo.x(); x <= hi.x(); x += h) {
    for (double y = lo.y(); y <= hi.y(); y += h) out.emplace_back(x, y, hi.z());
  }
  for (double z = lo.z(); z < hi.z(); z += h) {
    for (double x = lo.x(); x <= hi.x(); x += h) {
      out.emplace_back(x, lo.y(), z);
      out.emplace_back(x, hi.y(), z);
    }
    for (double y = lo.y(); y <= hi.y(); y += h) {
      out.emplace_back(lo.x(), y, z);
      out.emplace_back(hi.x(), y, z);
    }
  }
}

bool inside_footprint(double x, double y, const std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>>& boxes) {
  for (const auto& [lo, hi] : boxes) {
    if (x > lo.x() && x < hi.x() && y > lo.y() && y < hi.y()) return true;
  }
  return false;
}

std::vector<Point3> sample_room(double half, double h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-half, half);
  std::uniform_real_distribution<double> size(0.2, 0.9);
  std::uniform_real_distribution<double> height(0.2, 1.2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> boxes;
  const auto n_boxes = static_cast<int>(std::max(6.0, 4.0 * half * half * 1.2));
  for (int i = 0; i < n_boxes; ++i) {
    const double cx = pos(rng), cy = pos(rng);
    double sx = size(rng), sy = size(rng);
    // Some boxes are thin partitions.
    if (unit(rng) < 0.25) (unit(rng) < 0.5 ? sx : sy) = 0.08;
    const double top = height(rng);
    boxes.push_back({{cx - sx / 2, cy - sy / 2, 0.0}, {cx + sx / 2, cy + sy / 2, top}});
  }
  std::vector<Point3> out;
  for (double x = -half; x <= half; x += h) {
    for (double y = -half; y <= half; y += h) {
      if (!inside_footprint(x, y, boxes)) out.emplace_back(x, y, 0.0);
    }
  }
  for (const auto& [lo, hi] : boxes) sample_box(out, lo, hi, h);
  return out;
}

std::vector<Point3> sample_primitives(double half, double h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-half, half);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Point3> out;
  for (double x = -half; x <= half; x += h) {
    for (double y = -half; y <= half; y += h) out.emplace_back(x, y, 0.0);
  }
  const auto n_shapes = static_cast<int>(std::max(6.0, 4.0 * half * half * 1.5));
  for (int i = 0; i < n_shapes; ++i) {
    const double cx = pos(rng), cy = pos(rng);
    if (unit(rng) < 0.5) {
      const double r = 0.2 + 0.3 * unit(rng);
      const double cz = r * (0.2 + 0.6 * unit(rng));
      const int rings = std::max(4, static_cast<int>(kPi * r / h));
      for (int a = 0; a <= rings; ++a) {
        const double theta = kPi * a / rings;
        const double ring_r = r * std::sin(theta);
        const int segs = std::max(1, static_cast<int>(2.0 * kPi * ring_r / h));
        for (int b = 0; b < segs; ++b) {
          const double phi = 2.0 * kPi * b / segs;
          const Point3 p{cx + ring_r * std::cos(phi), cy + ring_r * std::sin(phi),
                         cz + r * std::cos(theta)};
          if (p.z() >= 0.0) out.push_back(p);
        }
      }
    } else {
      const double r = 0.1 + 0.2 * unit(rng);
      const double top = 0.3 + 0.9 * unit(rng);
      const int segs = std::max(6, static_cast<int>(2.0 * kPi * r / h));
      for (double z = 0.0; z <= top; z += h) {
        for (int b = 0; b < segs; ++b) {
          const double phi = 2.0 * kPi * b / segs;
          out.emplace_back(cx + r * std::cos(phi), cy + r * std::sin(phi), z);
        }
      }
      for (double x = -r; x <= r; x += h) {
        for (double y = -r; y <= r; y += h) {
          if (x * x + y * y <= r * r) out.emplace_back(cx + x, cy + y, top);
        }
      }
    }
  }
  return out;
}

struct Crop {
  double x0, y0, w;
  bool contains(const Point3& p) const {
    return p.x() >= x0 && p.x() < x0 + w && p.y() >= y0 && p.y() < y0 + w;
  }
};

struct OverlapMeasure {
  double in_a = 0.0;  // shared / |A|
  double in_b = 0.0;  // shared / |B|
};

OverlapMeasure measure(const std::vector<Point3>& pts, const Crop& a, const Crop& b) {
  std::size_t na = 0, nb = 0, both = 0;
  for (const auto& p : pts) {
    const bool ia = a.contains(p), ib = b.contains(p);
    na += ia;
    nb += ib;
    both += ia && ib;
  }
  if (na == 0 || nb == 0) return {};
  return {static_cast<double>(both) / static_cast<double>(na),
          static_cast<double>(both) / static_cast<double>(nb)};
}

}  // namespace

ScenePair synth_scene(const SceneParams& params, std::uint64_t seed) {
  if (!(params.overlap_target > 0.05 && params.overlap_target <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "overlap target must lie in (0.05, 1], got " +
                    std::to_string(params.overlap_target));
  }
  if (!(params.spacing > 0.0) || params.n_points < 16 || params.noise_sigma < 0.0 ||
      params.trans_range < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "scene parameters out of range");
  }
  std::mt19937_64 rng(seed);
  const double w = params.spacing * std::sqrt(static_cast<double>(params.n_points));
  const double half = 1.25 * w + params.trans_range;
  const double h = params.spacing / 2.0;

  std::vector<Point3> dense;
  switch (params.surface) {
    case Surface::kTerrain: dense = sample_terrain(half, h, rng); break;
    case Surface::kRoom: dense = sample_room(half, h, rng); break;
    case Surface::kPrimitives: dense = sample_primitives(half, h, rng); break;
  }
  const std::vector<Point3> samples =
      voxel_downsample(PointCloud{std::move(dense), {}}, params.spacing).points;

  std::uniform_real_distribution<double> start(-1.1 * w, 0.1 * w);
  Crop a{}, b{};
  OverlapMeasure got;
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    a = {start(rng), -w / 2 + 0.2 * w * (std::uniform_real_distribution<double>(-1, 1)(rng)), w};
    double lo = 0.0, hi = w;
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (lo + hi);
      const auto m = measure(samples, a, {a.x0 + mid, a.y0, w});
      if (0.5 * (m.in_a + m.in_b) > params.overlap_target) lo = mid; else hi = mid;
    }
    const double shift = params.overlap_target >= 1.0 ? 0.0 : 0.5 * (lo + hi);
    b = {a.x0 + shift, a.y0, w};
    got = measure(samples, a, b);
    ok = std::abs(got.in_a - params.overlap_target) <= params.overlap_tolerance &&
         std::abs(got.in_b - params.overlap_target) <= params.overlap_tolerance;
  }
  if (!ok) {
    throw Error(ErrorCode::kUnreachable,
                "overlap target " + std::to_string(params.overlap_target) +
                    " not reached after 100 crop placements");
  }

  // Sensor frames: origin at a jittered point above each crop center.
  std::uniform_real_distribution<double> jitter(-params.trans_range, params.trans_range);
  auto center = [&](const Crop& c) {
    return Eigen::Vector3d(c.x0 + c.w / 2 + jitter(rng), c.y0 + c.w / 2 + jitter(rng),
                           kSensorHeight);
  };
  const Eigen::Vector3d ca = center(a);
  const Eigen::Vector3d cb = center(b);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Vector3d axis;
  do {
    axis = {gauss(rng), gauss(rng), gauss(rng)};
  } while (axis.norm() < 1e-12);
  const double angle =
      std::uniform_real_distribution<double>(0.0, params.rot_range_deg)(rng) * kPi / 180.0;
  const Eigen::Matrix3d r = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  const RigidTransform to_a(Eigen::Matrix3d::Identity(), -ca);
  const RigidTransform to_b(r, -(r * cb));

  ScenePair pair;
  pair.seed = seed;
  pair.noise_sigma = params.noise_sigma;
  pair.overlap = std::min(got.in_a, got.in_b);
  pair.t_gt = compose(to_b, invert(to_a));
  std::vector<std::int64_t> index_in_a(samples.size(), -1);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (a.contains(samples[i])) {
      index_in_a[i] = static_cast<std::int64_t>(pair.src.size());
      pair.src.points.push_back(to_a(samples[i]));
    }
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!b.contains(samples[i])) continue;
    if (index_in_a[i] >= 0) {
      pair.gt_corrs.add(static_cast<std::uint32_t>(index_in_a[i]),
                        static_cast<std::uint32_t>(pair.tgt.size()));
    }
    pair.tgt.points.push_back(to_b(samples[i]));
  }
  // Per-axis sigma / sqrt(3) makes the RMS displacement equal noise_sigma.
  const double axis_sigma = params.noise_sigma / std::sqrt(3.0);
  if (axis_sigma > 0.0) {
    for (auto* cloud : {&pair.src, &pair.tgt}) {
      for (auto& p : cloud->points) {
        p += axis_sigma * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
      }
    }
  }
  return pair;
}

}  // namespace dpe
