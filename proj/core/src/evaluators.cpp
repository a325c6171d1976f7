#include "deeppe/evaluators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "deeppe/error.hpp"

namespace dpe {

EvaluationContext::EvaluationContext(PointCloud src, PointCloud tgt,
                                     CorrespondenceSet corrs, double inlier_eps)
    : src_(std::move(src)),
      tgt_(std::move(tgt)),
      corrs_(std::move(corrs)),
      src_index_(std::make_shared<SpatialIndex>(src_)),
      tgt_index_(std::make_shared<SpatialIndex>(tgt_)),
      inlier_eps_(inlier_eps) {
  corrs_.check_bounds(src_.size(), tgt_.size());
  if (!(inlier_eps_ > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "inlier_eps must be positive");
  }
}

std::string_view evaluator_name(EvaluatorKind kind) {
  switch (kind) {
    case EvaluatorKind::kCc: return "cc";
    case EvaluatorKind::kMae: return "mae";
    case EvaluatorKind::kMse: return "mse";
    case EvaluatorKind::kTcd: return "tcd";
    case EvaluatorKind::kDeepPe: return "deeppe";
  }
  return "unknown";
}

EvaluatorKind parse_evaluator(std::string_view name) {
  for (auto k : {EvaluatorKind::kCc, EvaluatorKind::kMae, EvaluatorKind::kMse,
                 EvaluatorKind::kTcd, EvaluatorKind::kDeepPe}) {
    if (evaluator_name(k) == name) return k;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown evaluator '" + std::string(name) +
                  "' (expected cc, mae, mse, tcd or deeppe)");
}

namespace {

template <typename Fn>
void for_each_residual(const EvaluationContext& ctx, const RigidTransform& t,
                       Fn&& fn) {
  for (const auto& c : ctx.corrs().pairs()) {
    fn((t(ctx.src().points[c.source_index]) - ctx.tgt().points[c.target_index])
           .norm());
  }
}

}  // namespace

std::size_t cc_score(const EvaluationContext& ctx, const RigidTransform& t) {
  std::size_t count = 0;
  const double eps = ctx.inlier_eps();
  for_each_residual(ctx, t, [&](double r) { count += r < eps ? 1 : 0; });
  return count;
}

double mae_score(const EvaluationContext& ctx, const RigidTransform& t) {
  double sum = 0.0;
  const double eps = ctx.inlier_eps();
  for_each_residual(ctx, t, [&](double r) {
    if (r < eps) sum += (eps - r) / eps;
  });
  return sum;
}

double mse_score(const EvaluationContext& ctx, const RigidTransform& t) {
  double sum = 0.0;
  const double eps = ctx.inlier_eps();
  for_each_residual(ctx, t, [&](double r) {
    if (r < eps) {
      const double s = (eps - r) / eps;
      sum += s * s;
    }
  });
  return sum;
}

double tcd_score(const EvaluationContext& ctx, const RigidTransform& t,
                 double trunc) {
  if (!(trunc > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "chamfer truncation must be positive");
  }
  double forward = 0.0;
  for (const auto& p : ctx.src().points) {
    forward += std::min(trunc, ctx.tgt_index().nearest_distance(t(p)));
  }
  forward /= static_cast<double>(ctx.src().size());
  const RigidTransform inv = invert(t);
  double backward = 0.0;
  for (const auto& q : ctx.tgt().points) {
    backward += std::min(trunc, ctx.src_index().nearest_distance(inv(q)));
  }
  backward /= static_cast<double>(ctx.tgt().size());
  return -0.5 * (forward + backward);
}

std::size_t select_best(std::span<const double> scores) {
  if (scores.empty()) {
    throw Error(ErrorCode::kEmptyInput, "select_best on an empty score list");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

ScoredPoses score_candidates(EvaluatorKind kind, const EvaluationContext& ctx,
                             const CandidatePoseSet& poses, double tcd_trunc) {
  if (poses.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no candidate poses to score");
  }
  ScoredPoses out;
  out.poses = poses;
  out.scores.resize(poses.size());
  out.scored_indices.resize(poses.size());
  std::iota(out.scored_indices.begin(), out.scored_indices.end(), std::size_t{0});
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto& t = poses.poses[i];
    switch (kind) {
      case EvaluatorKind::kCc: out.scores[i] = static_cast<double>(cc_score(ctx, t)); break;
      case EvaluatorKind::kMae: out.scores[i] = mae_score(ctx, t); break;
      case EvaluatorKind::kMse: out.scores[i] = mse_score(ctx, t); break;
      case EvaluatorKind::kTcd: out.scores[i] = tcd_score(ctx, t, tcd_trunc); break;
      case EvaluatorKind::kDeepPe:
        throw Error(ErrorCode::kInvalidArgument,
                    "deeppe scoring needs a model; use evaluate_candidates");
    }
  }
  out.best_index = select_best(out.scores);
  return out;
}

}  // namespace dpe
