#include "deeppe/dataset.hpp"

#include <cmath>
#include <numbers>
#include <tuple>

#include "deeppe/error.hpp"

namespace dpe {

namespace {

void label_into(DatasetPair& out, const CandidatePoseSet& poses, double beta) {
  const auto& sc = out.scene;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    LabelledPose lp;
    lp.pose = poses.poses[i];
    lp.provenance = poses.provenance[i];
    lp.d_x = rmse_correspondences(lp.pose, sc.gt_corrs, sc.src, sc.tgt);
    lp.correct = lp.d_x < beta;
    lp.rre_deg = rre(lp.pose, sc.t_gt);
    lp.rte = rte(lp.pose, sc.t_gt);
    out.poses.push_back(lp);
  }
}

std::pair<std::size_t, std::size_t> counts(const DatasetPair& p) {
  std::size_t pos = 0;
  for (const auto& lp : p.poses) pos += lp.correct;
  return {pos, p.poses.size() - pos};
}

}  // namespace

Dataset generate_dataset(const DatasetConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  std::vector<ScenePair> scenes;
  scenes.reserve(seeds.size());
  for (const auto seed : seeds) scenes.push_back(synth_scene(cfg.scene, seed));
  return generate_dataset(cfg, std::move(scenes));
}

Dataset generate_dataset(const DatasetConfig& cfg, std::vector<ScenePair> scenes) {
  if (cfg.n_correct == 0 || cfg.n_incorrect == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "dataset needs at least one correct and one incorrect pose per pair");
  }
  Dataset data;
  for (auto& scene : scenes) {
    const std::uint64_t seed = scene.seed;
    DatasetPair pair;
    pair.seed = seed;
    pair.scene = std::move(scene);
    if (pair.scene.gt_corrs.empty()) {
      data.log.push_back("pair " + std::to_string(seed) + ": dropped, no shared points");
      continue;
    }
    const PreparedPair prep = prepare_pair(pair.scene, cfg.pipeline, seed);
    pair.inlier_ratio = prep.inlier_ratio;
    label_into(pair, prep.candidates, cfg.beta);

    std::size_t round = 0;
    for (auto [pos, neg] = counts(pair); pos < cfg.n_correct || neg < cfg.n_incorrect;
         std::tie(pos, neg) = counts(pair)) {
      if (round == cfg.max_rounds) break;
      const double shrink = std::pow(0.5, static_cast<double>(round + 1));
      PerturbParams extra = cfg.pipeline.perturb;
      extra.n_small = pos < cfg.n_correct ? cfg.n_correct : 0;
      extra.small_min_deg = 0.0;
      extra.small_max_deg *= shrink;
      extra.trans_scale *= shrink;
      extra.n_large = neg < cfg.n_incorrect ? cfg.n_incorrect : 0;
      const auto more = perturb_gt_poses(pair.scene.t_gt, extra, derive_seed(seed, 100 + round));
      label_into(pair, more, cfg.beta);
      data.log.push_back("pair " + std::to_string(seed) + ": re-augmented (round " +
                         std::to_string(round + 1) + ")");
      ++round;
    }
    const auto [pos, neg] = counts(pair);
    if (pos < cfg.n_correct || neg < cfg.n_incorrect) {
      data.log.push_back("pair " + std::to_string(seed) + ": dropped with " +
                         std::to_string(pos) + " correct and " + std::to_string(neg) +
                         " incorrect poses");
      continue;
    }
    data.pairs.push_back(std::move(pair));
  }
  return data;
}

TrainingSet to_training_set(const Dataset& data, const PyramidConfig& cfg) {
  TrainingSet set;
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    const auto& p = data.pairs[i];
    set.pyramids.push_back(build_pyramid(p.scene.src, p.scene.tgt, cfg));
    for (const auto& lp : p.poses) {
      set.samples.push_back(
          {i, lp.pose, lp.d_x, lp.rre_deg * std::numbers::pi / 180.0, lp.rte});
    }
  }
  return set;
}

}  // namespace dpe
