#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "deeppe/evaluators.hpp"
#include "deeppe/nn/parameter.hpp"
#include "deeppe/pyramid.hpp"

namespace dpe {

enum class ModelHead {
  kConfidence,  // sigmoid probability that the pose is correct
  kRegressRt,   // two outputs: rotation error (rad), translation error (m)
  kRegressRmse, // one output: predicted d(x) in meters
};

std::string_view model_head_name(ModelHead head);
ModelHead parse_model_head(std::string_view name);

struct ModelConfig {
  std::size_t d = 64;
  std::size_t heads = 4;
  double dropout = 0.5;
  ModelHead head = ModelHead::kConfidence;
  std::uint64_t seed = 0;  // initialization and dropout masks
};

/// Deep-PE weights: two extractor projections, the attention projections
/// W^Q/W^K/W^V (head h owns column block h), and the confidence MLP
/// d -> d/4 -> max(1, d/16) -> outputs. Values are kept float32-exact so the
/// weight file round-trips bit for bit.
class DeepPeModel {
 public:
  explicit DeepPeModel(const ModelConfig& cfg);

  const ModelConfig& config() const noexcept { return cfg_; }
  std::size_t d() const noexcept { return cfg_.d; }
  std::size_t heads() const noexcept { return cfg_.heads; }
  std::size_t outputs() const noexcept;

  nn::ParameterStore& params() noexcept { return params_; }
  const nn::ParameterStore& params() const noexcept { return params_; }
  nn::Var var(const std::string& name) const { return params_.get(name).var; }

 private:
  ModelConfig cfg_;
  nn::ParameterStore params_;
};

/// build_pyramid followed by project_features.
FeaturePyramid extract_pyramid(const PointCloud& src, const PointCloud& tgt,
                               const PyramidConfig& cfg, const DeepPeModel& model);
/// Fills every projected tensor of the pyramid from the current weights.
void project_features(FeaturePyramid& pyr, const DeepPeModel& model);

/// Point-to-area attention over a dense volume: per head, queries F-hat W^Q_h,
/// keys/values volume W^K_h / W^V_h, scores scaled by 1/sqrt(d/heads),
/// softmax over the k slots of each coarse point. Returns H (coarse x d).
nn::Var paa_attention(const nn::Var& coarse_feats, const nn::Var& volume,
                      const std::vector<std::uint8_t>& pad_mask,
                      const DeepPeModel& model, const PaaConfig& cfg);
/// Same computation from projected keys/values of the volume rows.
nn::Var paa_attend(const nn::Var& coarse_feats, const nn::Var& keys,
                   const nn::Var& values, const std::vector<std::uint8_t>& pad_mask,
                   const DeepPeModel& model, const PaaConfig& cfg);

/// G = column max of concat(H^P - F^P, H^Q - F^Q), a 1 x d row.
nn::Var global_feature(const nn::Var& hp, const nn::Var& hq, const nn::Var& fp,
                       const nn::Var& fq);
/// The MLP head over a B x d batch of global features; B x outputs.
/// Batch norm and dropout are active only in training; `step` keys dropout.
nn::Var confidence_head(const DeepPeModel& model, const nn::Var& g, bool training,
                        std::uint64_t step);
nn::Var pcp_confidence(const nn::Var& hp, const nn::Var& hq, const nn::Var& fp,
                       const nn::Var& fq, const DeepPeModel& model, bool training,
                       std::uint64_t step = 0);

/// Extractor and key/value projections folded together: keys of fine rows
/// are desc * (W_fine W^K) + b_fine W^K, and likewise for values. Building
/// this once per batch keeps the per-pose graph small.
struct FusedProjections {
  nn::Var key_weight, key_bias;
  nn::Var value_weight, value_bias;
};
FusedProjections fuse_projections(const DeepPeModel& model);

/// Differentiable global feature of one (pyramid, pose), rebuilding the
/// projections of every referenced row from the descriptors so gradients
/// reach all weights.
nn::Var pose_global_feature(const DeepPeModel& model, const FeaturePyramid& pyr,
                            const RigidTransform& t, const PaaConfig& cfg,
                            const FusedProjections& fused);
nn::Var pose_global_feature(const DeepPeModel& model, const FeaturePyramid& pyr,
                            const RigidTransform& t, const PaaConfig& cfg);

/// Evaluation-mode score of one pose from the cached projections. For the
/// confidence head this is s in (0, 1); regression heads return the negated
/// predicted error so that larger is better.
double evaluate_pose(const DeepPeModel& model, const FeaturePyramid& pyr,
                     const RigidTransform& t, const PaaConfig& cfg);

/// Indices of the ceil(|poses| * delta) candidates with the largest CC score,
/// ties to the lower index, returned in ascending index order.
std::vector<std::size_t> preselect_by_cc(const EvaluationContext& ctx,
                                         const CandidatePoseSet& poses, double delta);

ScoredPoses evaluate_candidates(const DeepPeModel& model, const EvaluationContext& ctx,
                                const FeaturePyramid& pyr, const CandidatePoseSet& poses,
                                double delta, const PaaConfig& cfg);

}  // namespace dpe
