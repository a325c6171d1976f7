#include "deeppe/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "deeppe/error.hpp"

namespace dpe {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t x = master ^ (index * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

CorrespondenceSet putative_correspondences(const PointCloud& src, const PointCloud& tgt,
                                           const PipelineConfig& cfg, std::uint64_t seed) {
  const auto fa = fpfh(estimate_normals(src, cfg.normal_k).cloud, cfg.fpfh_radius);
  const auto fb = fpfh(estimate_normals(tgt, cfg.normal_k).cloud, cfg.fpfh_radius);
  MatchOptions opts;
  opts.mutual = cfg.mutual;
  opts.max_source_samples = cfg.max_corrs;
  opts.seed = seed;
  return match_features(fa, fb, opts);
}

CandidatePoseSet estimate_candidates(const CorrespondenceSet& corrs, const PointCloud& src,
                                     const PointCloud& tgt, const PipelineConfig& cfg,
                                     std::uint64_t seed) {
  CandidatePoseSet out;
  if (corrs.size() < 3) return out;
  if (cfg.use_ransac && cfg.ransac_iters > 0) {
    try {
      out.append(ransac(corrs, src, tgt, cfg.ransac_iters, cfg.inlier_eps, seed));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerate) throw;
    }
  }
  if (cfg.use_sc2) {
    Sc2Params p = cfg.sc2;
    p.fallback_seed = derive_seed(seed, 1);
    p.fallback_inlier_eps = cfg.inlier_eps;
    try {
      out.append(sc2_estimate(corrs, src, tgt, p));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerate) throw;
    }
  }
  return out;
}

CorrespondenceSet thin_inliers(const CorrespondenceSet& corrs, const ScenePair& pair,
                               double tau1, double max_ratio, std::uint64_t seed) {
  if (!(max_ratio >= 0.0 && max_ratio <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "max inlier ratio must lie in [0, 1]");
  }
  std::vector<std::size_t> inliers, outliers;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const auto& c = corrs.pairs()[i];
    const double r = (pair.t_gt(pair.src.points[c.source_index]) -
                      pair.tgt.points[c.target_index]).norm();
    (r < tau1 ? inliers : outliers).push_back(i);
  }
  // Largest inlier count m with m / (m + outliers) <= max_ratio.
  std::size_t keep = inliers.size();
  while (keep > 0 && static_cast<double>(keep) >
                         max_ratio * static_cast<double>(keep + outliers.size())) {
    --keep;
  }
  if (keep == inliers.size()) return corrs;
  std::mt19937_64 rng(seed);
  std::shuffle(inliers.begin(), inliers.end(), rng);
  inliers.resize(keep);
  std::vector<std::size_t> kept = outliers;
  kept.insert(kept.end(), inliers.begin(), inliers.end());
  std::sort(kept.begin(), kept.end());
  CorrespondenceSet out(false);
  for (auto i : kept) out.add(corrs.pairs()[i].source_index, corrs.pairs()[i].target_index);
  return out;
}

PreparedPair prepare_pair(const ScenePair& pair, const PipelineConfig& cfg,
                          std::uint64_t seed) {
  PreparedPair out;
  out.corrs = putative_correspondences(pair.src, pair.tgt, cfg, derive_seed(seed, 10));
  if (cfg.max_inlier_ratio < 1.0) {
    out.corrs = thin_inliers(out.corrs, pair, cfg.inlier_eps, cfg.max_inlier_ratio,
                             derive_seed(seed, 11));
  }
  out.inlier_ratio = out.corrs.empty()
                         ? 0.0
                         : inlier_ratio(out.corrs, pair.t_gt, pair.src, pair.tgt, cfg.inlier_eps);
  out.candidates = estimate_candidates(out.corrs, pair.src, pair.tgt, cfg, derive_seed(seed, 12));
  if (cfg.inject_perturbations) {
    out.candidates.append(perturb_gt_poses(pair.t_gt, cfg.perturb, derive_seed(seed, 13)));
  }
  return out;
}

}  // namespace dpe
