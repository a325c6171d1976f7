#include "deeppe/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "deeppe/error.hpp"
#include "deeppe/nn/ops.hpp"
#include "deeppe/nn/serialize.hpp"

namespace dpe {

using nn::Tensor;
using nn::Var;

std::string_view model_head_name(ModelHead head) {
  switch (head) {
    case ModelHead::kConfidence: return "confidence";
    case ModelHead::kRegressRt: return "l1_rt";
    case ModelHead::kRegressRmse: return "l1_rmse";
  }
  return "unknown";
}

ModelHead parse_model_head(std::string_view name) {
  for (auto h : {ModelHead::kConfidence, ModelHead::kRegressRt, ModelHead::kRegressRmse}) {
    if (model_head_name(h) == name) return h;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown model head '" + std::string(name) + "'");
}

namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor t(fan_in, fan_out);
  for (double& v : t.data()) v = u(rng);
  return t;
}

}  // namespace

DeepPeModel::DeepPeModel(const ModelConfig& cfg) : cfg_(cfg) {
  if (cfg_.d == 0 || cfg_.heads == 0 || cfg_.d % cfg_.heads != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "model: d=" + std::to_string(cfg_.d) + " must be a positive multiple of heads=" +
                    std::to_string(cfg_.heads));
  }
  if (!(cfg_.dropout >= 0.0 && cfg_.dropout < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "model: dropout must lie in [0, 1)");
  }
  std::mt19937_64 rng(cfg_.seed);
  const std::size_t d = cfg_.d;
  const std::size_t h1 = std::max<std::size_t>(1, d / 4);
  const std::size_t h2 = std::max<std::size_t>(1, d / 16);
  const auto in = static_cast<std::size_t>(kFpfhDim);

  params_.add("extractor.fine.weight", glorot(in, d, rng));
  params_.add("extractor.fine.bias", Tensor(1, d));
  params_.add("extractor.coarse.weight", glorot(in, d, rng));
  params_.add("extractor.coarse.bias", Tensor(1, d));
  params_.add("paa.wq", glorot(d, d, rng));
  params_.add("paa.wk", glorot(d, d, rng));
  params_.add("paa.wv", glorot(d, d, rng));
  auto add_bn = [&](const std::string& name, std::size_t width) {
    params_.add(name + ".gamma", Tensor(1, width, 1.0));
    params_.add(name + ".beta", Tensor(1, width));
    params_.add(name + ".running_mean", Tensor(1, width), false);
    params_.add(name + ".running_var", Tensor(1, width, 1.0), false);
  };
  params_.add("pcp.fc1.weight", glorot(d, h1, rng));
  params_.add("pcp.fc1.bias", Tensor(1, h1));
  add_bn("pcp.bn1", h1);
  params_.add("pcp.fc2.weight", glorot(h1, h2, rng));
  params_.add("pcp.fc2.bias", Tensor(1, h2));
  add_bn("pcp.bn2", h2);
  params_.add("pcp.fc3.weight", glorot(h2, outputs(), rng));
  params_.add("pcp.fc3.bias", Tensor(1, outputs()));
  nn::round_to_float(params_);
}

std::size_t DeepPeModel::outputs() const noexcept {
  return cfg_.head == ModelHead::kRegressRt ? 2 : 1;
}

namespace {

Var linear(const DeepPeModel& model, const Var& x, const std::string& name) {
  return nn::add_row(nn::matmul(x, model.var(name + ".weight")), model.var(name + ".bias"));
}

Tensor rows_of(const FeatureMatrix& m) { return Tensor::from_matrix(m); }

}  // namespace

void project_features(FeaturePyramid& pyr, const DeepPeModel& model) {
  for (PyramidSide* side : {&pyr.p, &pyr.q}) {
    const Var fine = linear(model, nn::constant(rows_of(side->fine_desc)), "extractor.fine");
    const Var coarse =
        linear(model, nn::constant(rows_of(side->coarse_desc)), "extractor.coarse");
    side->fine_feats = nn::constant(fine.value());
    side->coarse_feats = nn::constant(coarse.value());
    side->fine_keys = nn::constant(nn::matmul(fine, model.var("paa.wk")).value());
    side->fine_values = nn::constant(nn::matmul(fine, model.var("paa.wv")).value());
  }
  pyr.d = model.d();
}

FeaturePyramid extract_pyramid(const PointCloud& src, const PointCloud& tgt,
                               const PyramidConfig& cfg, const DeepPeModel& model) {
  FeaturePyramid pyr = build_pyramid(src, tgt, cfg);
  project_features(pyr, model);
  return pyr;
}

Var paa_attend(const Var& coarse_feats, const Var& keys, const Var& values,
               const std::vector<std::uint8_t>& pad_mask, const DeepPeModel& model,
               const PaaConfig& cfg) {
  cfg.validate();
  if (cfg.d != model.d() || cfg.heads != model.heads()) {
    throw Error(ErrorCode::kInvalidArgument, "paa config does not match the model's d/heads");
  }
  const std::size_t n = coarse_feats.value().rows();
  if (pad_mask.size() != n * cfg.k) {
    throw Error(ErrorCode::kShapeMismatch,
                "pad mask has " + std::to_string(pad_mask.size()) + " entries, expected " +
                    std::to_string(n * cfg.k));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d / cfg.heads));
  const Var q = nn::matmul(coarse_feats, model.var("paa.wq"));
  Var scores = nn::grouped_scores(q, keys, cfg.k, cfg.heads, scale);
  if (cfg.masked_softmax) {
    Tensor mask(n * cfg.heads, cfg.k);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t h = 0; h < cfg.heads; ++h) {
        for (std::size_t j = 0; j < cfg.k; ++j) {
          if (pad_mask[i * cfg.k + j]) mask(i * cfg.heads + h, j) = -1e30;
        }
      }
    }
    scores = nn::add(scores, nn::constant(std::move(mask)));
  }
  return nn::grouped_mix(nn::row_softmax(scores), values, cfg.k, cfg.heads);
}

Var paa_attention(const Var& coarse_feats, const Var& volume,
                  const std::vector<std::uint8_t>& pad_mask, const DeepPeModel& model,
                  const PaaConfig& cfg) {
  return paa_attend(coarse_feats, nn::matmul(volume, model.var("paa.wk")),
                    nn::matmul(volume, model.var("paa.wv")), pad_mask, model, cfg);
}

Var global_feature(const Var& hp, const Var& hq, const Var& fp, const Var& fq) {
  return nn::maxpool_rows(nn::concat_rows(nn::sub(hp, fp), nn::sub(hq, fq)));
}

Var confidence_head(const DeepPeModel& model, const Var& g, bool training,
                    std::uint64_t step) {
  const double p = model.config().dropout;
  const std::uint64_t seed = model.config().seed;
  auto block = [&](const Var& x, const std::string& fc, const std::string& bn,
                   const std::string& drop) {
    Var mean = model.var(bn + ".running_mean");
    Var var = model.var(bn + ".running_var");
    const Var h = nn::batchnorm1d(linear(model, x, fc), model.var(bn + ".gamma"),
                                  model.var(bn + ".beta"),
                                  {&mean.mutable_value(), &var.mutable_value()}, training);
    return nn::dropout(nn::leaky_relu(h), p, training, {seed, drop, step});
  };
  const Var h1 = block(g, "pcp.fc1", "pcp.bn1", "pcp.drop1");
  const Var h2 = block(h1, "pcp.fc2", "pcp.bn2", "pcp.drop2");
  const Var out = linear(model, h2, "pcp.fc3");
  return model.config().head == ModelHead::kConfidence ? nn::sigmoid(out) : out;
}

Var pcp_confidence(const Var& hp, const Var& hq, const Var& fp, const Var& fq,
                   const DeepPeModel& model, bool training, std::uint64_t step) {
  return confidence_head(model, global_feature(hp, hq, fp, fq), training, step);
}

namespace {

struct DirectionResult {
  Var coarse;
  Var h;
};

DirectionResult attend_trainable(const DeepPeModel& model, const FeaturePyramid& pyr,
                                 const RigidTransform& t, const PaaConfig& cfg,
                                 VolumeDirection dir, const FusedProjections& fused) {
  const bool forward = dir == VolumeDirection::kPToQ;
  const PyramidSide& from = forward ? pyr.p : pyr.q;
  const PyramidSide& to = forward ? pyr.q : pyr.p;
  VolumeIndex vol = build_volume_index(pyr, t, cfg, dir);

  std::vector<std::int64_t> used;
  for (auto s : vol.slots) {
    if (s != nn::kPadRow) used.push_back(s);
  }
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());

  const Var coarse =
      linear(model, nn::constant(rows_of(from.coarse_desc)), "extractor.coarse");
  Var keys, values;
  if (used.empty()) {
    keys = values = nn::constant(Tensor(vol.slots.size(), model.d()));
  } else {
    FeatureMatrix sub(static_cast<Eigen::Index>(used.size()), to.fine_desc.cols());
    for (std::size_t r = 0; r < used.size(); ++r) {
      sub.row(static_cast<Eigen::Index>(r)) = to.fine_desc.row(used[r]);
    }
    for (auto& s : vol.slots) {
      if (s == nn::kPadRow) continue;
      s = std::lower_bound(used.begin(), used.end(), s) - used.begin();
    }
    const Var desc = nn::constant(rows_of(sub));
    keys = nn::gather_rows(
        nn::add_row(nn::matmul(desc, fused.key_weight), fused.key_bias), vol.slots);
    values = nn::gather_rows(
        nn::add_row(nn::matmul(desc, fused.value_weight), fused.value_bias), vol.slots);
  }
  return {coarse, paa_attend(coarse, keys, values, vol.pad, model, cfg)};
}

}  // namespace

FusedProjections fuse_projections(const DeepPeModel& model) {
  const Var w = model.var("extractor.fine.weight");
  const Var b = model.var("extractor.fine.bias");
  const Var wk = model.var("paa.wk");
  const Var wv = model.var("paa.wv");
  return {nn::matmul(w, wk), nn::matmul(b, wk), nn::matmul(w, wv), nn::matmul(b, wv)};
}

Var pose_global_feature(const DeepPeModel& model, const FeaturePyramid& pyr,
                        const RigidTransform& t, const PaaConfig& cfg,
                        const FusedProjections& fused) {
  const auto p = attend_trainable(model, pyr, t, cfg, VolumeDirection::kPToQ, fused);
  const auto q = attend_trainable(model, pyr, t, cfg, VolumeDirection::kQToP, fused);
  return global_feature(p.h, q.h, p.coarse, q.coarse);
}

Var pose_global_feature(const DeepPeModel& model, const FeaturePyramid& pyr,
                        const RigidTransform& t, const PaaConfig& cfg) {
  return pose_global_feature(model, pyr, t, cfg, fuse_projections(model));
}

double evaluate_pose(const DeepPeModel& model, const FeaturePyramid& pyr,
                     const RigidTransform& t, const PaaConfig& cfg) {
  if (pyr.d != model.d()) {
    throw Error(ErrorCode::kInvalidArgument, "pyramid features were not projected by this model");
  }
  auto attend = [&](VolumeDirection dir) {
    const bool forward = dir == VolumeDirection::kPToQ;
    const PyramidSide& from = forward ? pyr.p : pyr.q;
    const PyramidSide& to = forward ? pyr.q : pyr.p;
    const VolumeIndex vol = build_volume_index(pyr, t, cfg, dir);
    const Var& coarse = from.coarse_feats;
    const Var keys = nn::gather_rows(to.fine_keys, vol.slots);
    const Var values = nn::gather_rows(to.fine_values, vol.slots);
    return std::pair{coarse, paa_attend(coarse, keys, values, vol.pad, model, cfg)};
  };
  const auto [fp, hp] = attend(VolumeDirection::kPToQ);
  const auto [fq, hq] = attend(VolumeDirection::kQToP);
  const Tensor out = pcp_confidence(hp, hq, fp, fq, model, false).value();
  switch (model.config().head) {
    case ModelHead::kConfidence: return out.item();
    case ModelHead::kRegressRt: return -(out(0, 0) + out(0, 1));
    case ModelHead::kRegressRmse: return -out.item();
  }
  return out.item();
}

std::vector<std::size_t> preselect_by_cc(const EvaluationContext& ctx,
                                         const CandidatePoseSet& poses, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "delta must lie in (0, 1], got " + std::to_string(delta));
  }
  if (poses.empty()) throw Error(ErrorCode::kEmptyInput, "no candidate poses to pre-select");
  const std::size_t n = poses.size();
  std::vector<std::size_t> counts(n);
  for (std::size_t i = 0; i < n; ++i) counts[i] = cc_score(ctx, poses.poses[i]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
  auto keep = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * delta - 1e-9));
  keep = std::clamp<std::size_t>(keep, 1, n);
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

ScoredPoses evaluate_candidates(const DeepPeModel& model, const EvaluationContext& ctx,
                                const FeaturePyramid& pyr, const CandidatePoseSet& poses,
                                double delta, const PaaConfig& cfg) {
  ScoredPoses out;
  out.poses = poses;
  out.scored_indices = preselect_by_cc(ctx, poses, delta);
  out.scores.assign(poses.size(), kExcludedScore);
  for (auto i : out.scored_indices) out.scores[i] = evaluate_pose(model, pyr, poses.poses[i], cfg);
  out.best_index = select_best(out.scores);
  return out;
}

}  // namespace dpe
