#pragma once

#include <limits>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "deeppe/estimators.hpp"
#include "deeppe/geom3d.hpp"
#include "deeppe/spatial.hpp"

namespace dpe {

/// Inputs shared by every statistics-based evaluator for one cloud pair.
class EvaluationContext {
 public:
  EvaluationContext(PointCloud src, PointCloud tgt, CorrespondenceSet corrs,
                    double inlier_eps);

  const PointCloud& src() const noexcept { return src_; }
  const PointCloud& tgt() const noexcept { return tgt_; }
  const CorrespondenceSet& corrs() const noexcept { return corrs_; }
  const SpatialIndex& src_index() const noexcept { return *src_index_; }
  const SpatialIndex& tgt_index() const noexcept { return *tgt_index_; }
  double inlier_eps() const noexcept { return inlier_eps_; }

 private:
  PointCloud src_;
  PointCloud tgt_;
  CorrespondenceSet corrs_;
  std::shared_ptr<const SpatialIndex> src_index_;
  std::shared_ptr<const SpatialIndex> tgt_index_;
  double inlier_eps_;
};

enum class EvaluatorKind { kCc, kMae, kMse, kTcd, kDeepPe };

std::string_view evaluator_name(EvaluatorKind kind);
EvaluatorKind parse_evaluator(std::string_view name);

inline constexpr double kExcludedScore = -std::numeric_limits<double>::infinity();

/// Scores over the full candidate index space; poses left out of scoring
/// carry kExcludedScore and never win.
struct ScoredPoses {
  CandidatePoseSet poses;
  std::vector<double> scores;
  std::vector<std::size_t> scored_indices;  // ascending original indices
  std::size_t best_index = 0;
};

std::size_t cc_score(const EvaluationContext& ctx, const RigidTransform& t);
double mae_score(const EvaluationContext& ctx, const RigidTransform& t);
double mse_score(const EvaluationContext& ctx, const RigidTransform& t);
/// Negated symmetric truncated chamfer distance (0 is a perfect overlap).
double tcd_score(const EvaluationContext& ctx, const RigidTransform& t,
                 double trunc);

/// Argmax with the lowest index winning exact ties.
std::size_t select_best(std::span<const double> scores);

/// Scores every candidate with one statistics-based evaluator (not kDeepPe).
ScoredPoses score_candidates(EvaluatorKind kind, const EvaluationContext& ctx,
                             const CandidatePoseSet& poses, double tcd_trunc);

}  // namespace dpe
