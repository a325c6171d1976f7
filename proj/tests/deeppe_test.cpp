#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "deeppe/error.hpp"
#include "deeppe/model.hpp"
#include "deeppe/nn/ops.hpp"
#include "deeppe/nn/serialize.hpp"
#include "generators.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "scenes.hpp"

namespace dpe {
namespace {

using testing::Gen;

ModelConfig small_model(std::uint64_t seed = 1, ModelHead head = ModelHead::kConfidence) {
  ModelConfig m;
  m.d = 8;
  m.heads = 2;
  m.seed = seed;
  m.head = head;
  return m;
}

// Pyramid and ground truth shared by the tests in this file.
class PyramidFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    pyr_ = new FeaturePyramid(testing::small_pair_pyramid(5, &t_gt_));
  }
  static void TearDownTestSuite() {
    delete pyr_;
    pyr_ = nullptr;
  }
  static RigidTransform near_gt(Gen& gen, double deg, double trans) {
    return compose(RigidTransform::from_axis_angle(gen.unit_vector(),
                                                   gen.uniform(0, deg) * std::numbers::pi / 180,
                                                   trans * gen.point()),
                   t_gt_);
  }

  static FeaturePyramid* pyr_;
  static RigidTransform t_gt_;
};
FeaturePyramid* PyramidFixture::pyr_ = nullptr;
RigidTransform PyramidFixture::t_gt_;

TEST(DeepPeModelTest, RejectsBadConfig) {
  ModelConfig m = small_model();
  m.heads = 3;
  EXPECT_THROW(DeepPeModel{m}, Error);
  m = small_model();
  m.dropout = 1.0;
  EXPECT_THROW(DeepPeModel{m}, Error);
}

TEST(DeepPeModelTest, MlpWidthsAndOutputs) {
  for (std::size_t d : {8u, 64u}) {
    ModelConfig cfg = small_model();
    cfg.d = d;
    const DeepPeModel m(cfg);
    EXPECT_EQ(m.params().get("pcp.fc1.weight").value().cols(), d / 4);
    EXPECT_EQ(m.params().get("pcp.fc2.weight").value().cols(), std::max<std::size_t>(1, d / 16));
    EXPECT_EQ(m.params().get("pcp.fc3.weight").value().cols(), 1u);
    EXPECT_EQ(m.params().get("extractor.fine.weight").value().rows(),
              static_cast<std::size_t>(kFpfhDim));
  }
  EXPECT_EQ(DeepPeModel(small_model(1, ModelHead::kRegressRt)).outputs(), 2u);
  EXPECT_EQ(DeepPeModel(small_model(1, ModelHead::kRegressRmse)).outputs(), 1u);
}

TEST(DeepPeModelTest, InitIsSeededAndFloatExact) {
  const DeepPeModel a(small_model(3)), b(small_model(3)), c(small_model(4));
  EXPECT_EQ(nn::encode_model(a.params()), nn::encode_model(b.params()));
  EXPECT_NE(nn::encode_model(a.params()), nn::encode_model(c.params()));
  for (const auto& p : a.params().all()) {
    for (double v : p.value().data()) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
  }
}

TEST(ModelHeadTest, NamesRoundTrip) {
  for (auto h : {ModelHead::kConfidence, ModelHead::kRegressRt, ModelHead::kRegressRmse}) {
    EXPECT_EQ(parse_model_head(model_head_name(h)), h);
  }
  EXPECT_THROW(parse_model_head("softmax"), Error);
}

TEST(PaaConfigTest, Validation) {
  PaaConfig c = testing::small_paa();
  EXPECT_NO_THROW(c.validate());
  c.k = 0;
  EXPECT_THROW(c.validate(), Error);
  c = testing::small_paa();
  c.t = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST_F(PyramidFixture, LevelsAndDescriptors) {
  for (const PyramidSide* s : {&pyr_->p, &pyr_->q}) {
    EXPECT_GT(s->fine.size(), s->coarse.size());
    EXPECT_EQ(static_cast<std::size_t>(s->fine_desc.rows()), s->fine.size());
    EXPECT_EQ(s->fine_desc.cols(), kFpfhDim);
    EXPECT_EQ(static_cast<std::size_t>(s->coarse_desc.rows()), s->coarse.size());
    EXPECT_GE(s->fine_desc.minCoeff(), 0.0);
    EXPECT_LE(s->fine_desc.maxCoeff(), 1.0 + 1e-12);
  }
  EXPECT_EQ(pyr_->d, 0u);
}

TEST_F(PyramidFixture, VolumeIndexMatchesOracleProperty) {
  Gen gen(1);
  const PaaConfig cfg = testing::small_paa();
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = trial % 2 ? near_gt(gen, 10, 0.1) : gen.transform(1.0);
    for (auto dir : {VolumeDirection::kPToQ, VolumeDirection::kQToP}) {
      const auto vol = build_volume_index(*pyr_, t, cfg, dir);
      const auto want = testing::volume_slots_oracle(*pyr_, t, cfg, dir);
      EXPECT_EQ(vol.slots, want);
      ASSERT_EQ(vol.pad.size(), want.size());
      for (std::size_t i = 0; i < want.size(); ++i) {
        EXPECT_EQ(vol.pad[i], want[i] == nn::kPadRow ? 1 : 0);
      }
    }
  }
}

TEST_F(PyramidFixture, FeatureVolumeZerosPaddedRows) {
  FeaturePyramid pyr = *pyr_;
  const DeepPeModel model(small_model());
  project_features(pyr, model);
  const PaaConfig cfg = testing::small_paa();
  std::vector<std::uint8_t> pad;
  const auto vol = build_feature_volume(pyr, t_gt_, cfg, VolumeDirection::kPToQ, &pad);
  const auto idx = build_volume_index(pyr, t_gt_, cfg, VolumeDirection::kPToQ);
  ASSERT_EQ(vol.rows(), idx.slots.size());
  for (std::size_t r = 0; r < vol.rows(); ++r) {
    for (std::size_t c = 0; c < vol.cols(); ++c) {
      const double want = idx.slots[r] == nn::kPadRow
                              ? 0.0
                              : pyr.q.fine_feats.value()(static_cast<std::size_t>(idx.slots[r]), c);
      EXPECT_EQ(vol(r, c), want);
    }
  }
  EXPECT_EQ(pad, idx.pad);
}

TEST(PaaTest, MatchesOracleProperty) {
  Gen gen(2);
  for (std::size_t heads : {1u, 2u, 4u}) {
    ModelConfig mc = small_model(heads);
    mc.heads = heads;
    const DeepPeModel model(mc);
    PaaConfig cfg = testing::small_paa(8, heads, 5);
    const std::size_t n = 7;
    const nn::Tensor coarse = gen.tensor(n, 8), volume = gen.tensor(n * 5, 8);
    const std::vector<std::uint8_t> pad(n * 5, 0);
    const auto got = paa_attention(nn::constant(coarse), nn::constant(volume), pad, model, cfg);
    const auto want = testing::paa_oracle(coarse, volume, model.params().get("paa.wq").value(),
                                          model.params().get("paa.wk").value(),
                                          model.params().get("paa.wv").value(), 5, heads);
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_NEAR(got.value().data()[i], want.data()[i], 1e-12);
    }
  }
}

TEST(PaaTest, PaddedSlotsKeepZeroScoreUnlessMasked) {
  const DeepPeModel model(small_model());
  Gen gen(3);
  const std::size_t k = 4;
  const nn::Tensor coarse = gen.tensor(1, 8);
  nn::Tensor volume = gen.tensor(k, 8);
  for (std::size_t c = 0; c < 8; ++c) volume(3, c) = 0.0;
  const std::vector<std::uint8_t> pad{0, 0, 0, 1};
  PaaConfig cfg = testing::small_paa(8, 2, k);
  const auto plain = paa_attention(nn::constant(coarse), nn::constant(volume), pad, model, cfg);
  const auto oracle = testing::paa_oracle(coarse, volume, model.params().get("paa.wq").value(),
                                          model.params().get("paa.wk").value(),
                                          model.params().get("paa.wv").value(), k, 2);
  for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(plain.value()(0, c), oracle(0, c), 1e-12);
  // Masked: identical to attention over the three real slots.
  cfg.masked_softmax = true;
  const auto masked = paa_attention(nn::constant(coarse), nn::constant(volume), pad, model, cfg);
  nn::Tensor three(3, 8);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 8; ++c) three(r, c) = volume(r, c);
  }
  const auto want = testing::paa_oracle(coarse, three, model.params().get("paa.wq").value(),
                                        model.params().get("paa.wk").value(),
                                        model.params().get("paa.wv").value(), 3, 2);
  for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(masked.value()(0, c), want(0, c), 1e-12);
}

TEST(GlobalFeatureTest, ColumnMaxOfResiduals) {
  nn::Tensor hp(1, 2), fp(1, 2), hq(2, 2), fq(2, 2);
  hp(0, 0) = 1.0;
  hp(0, 1) = 0.0;
  hq(0, 0) = 0.5;
  hq(1, 1) = 3.0;
  fq(1, 1) = 1.0;
  const auto g = global_feature(nn::constant(hp), nn::constant(hq), nn::constant(fp),
                                nn::constant(fq))
                     .value();
  EXPECT_EQ(g(0, 0), 1.0);
  EXPECT_EQ(g(0, 1), 2.0);
}

TEST(ConfidenceHeadTest, EvalModeMatchesOracle) {
  Gen gen(4);
  for (auto head : {ModelHead::kConfidence, ModelHead::kRegressRt, ModelHead::kRegressRmse}) {
    DeepPeModel model(small_model(5, head));
    // Non-trivial running statistics.
    for (auto& p : model.params().all()) {
      if (p.name.find("running_var") != std::string::npos) {
        for (double& v : p.mutable_value().data()) v = gen.uniform(0.5, 2.0);
      } else if (p.name.find("running_mean") != std::string::npos) {
        for (double& v : p.mutable_value().data()) v = gen.uniform(-0.5, 0.5);
      }
    }
    const nn::Tensor g = gen.tensor(3, 8);
    const auto got = confidence_head(model, nn::constant(g), false, 0).value();
    const auto want = testing::head_oracle(model, g);
    ASSERT_EQ(got.shape(), want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.data()[i], want.data()[i], 1e-12);
  }
}

TEST_F(PyramidFixture, EvaluatePoseMatchesOracle) {
  Gen gen(5);
  for (auto head : {ModelHead::kConfidence, ModelHead::kRegressRt, ModelHead::kRegressRmse}) {
    const DeepPeModel model(small_model(6, head));
    FeaturePyramid pyr = *pyr_;
    project_features(pyr, model);
    const PaaConfig cfg = testing::small_paa();
    for (int trial = 0; trial < 5; ++trial) {
      const auto t = trial % 2 ? near_gt(gen, 20, 0.2) : gen.transform(0.5);
      EXPECT_NEAR(evaluate_pose(model, pyr, t, cfg),
                  testing::evaluate_pose_oracle(model, pyr, t, cfg), 1e-9);
    }
  }
}

TEST_F(PyramidFixture, TrainableGlobalFeatureMatchesCachedPath) {
  Gen gen(6);
  const DeepPeModel model(small_model(7));
  FeaturePyramid pyr = *pyr_;
  project_features(pyr, model);
  const PaaConfig cfg = testing::small_paa();
  for (int trial = 0; trial < 5; ++trial) {
    const auto t = near_gt(gen, 15, 0.1);
    const auto g = pose_global_feature(model, *pyr_, t, cfg);
    const double via_graph = confidence_head(model, g, false, 0).value().item();
    EXPECT_NEAR(via_graph, evaluate_pose(model, pyr, t, cfg), 1e-12);
  }
}

TEST_F(PyramidFixture, EvaluatePoseNeedsProjection) {
  const DeepPeModel model(small_model());
  EXPECT_THROW(evaluate_pose(model, *pyr_, t_gt_, testing::small_paa()), Error);
}

TEST_F(PyramidFixture, FullyPaddedPosesSaturate) {
  const DeepPeModel model(small_model(8));
  FeaturePyramid pyr = *pyr_;
  project_features(pyr, model);
  const PaaConfig cfg = testing::small_paa();
  // Far enough that every volume slot is padded: the score stops depending on the pose.
  const RigidTransform far_a = RigidTransform::from_axis_angle({0, 0, 1}, 0.3, {100, 0, 0});
  const RigidTransform far_b = RigidTransform::from_axis_angle({1, 0, 0}, 2.0, {0, -80, 40});
  for (auto dir : {VolumeDirection::kPToQ, VolumeDirection::kQToP}) {
    const auto vol = build_volume_index(pyr, far_a, cfg, dir);
    for (auto p : vol.pad) EXPECT_EQ(p, 1);
  }
  EXPECT_EQ(evaluate_pose(model, pyr, far_a, cfg), evaluate_pose(model, pyr, far_b, cfg));
}

TEST_F(PyramidFixture, ModelGradientsMatchFiniteDifferences) {
  DeepPeModel model(small_model(9));
  Gen gen(7);
  const PaaConfig cfg = testing::small_paa();
  std::vector<RigidTransform> poses;
  for (int i = 0; i < 3; ++i) poses.push_back(near_gt(gen, 10, 0.1));
  const auto probe = testing::make_probe(3, 1, gen);
  const auto report = testing::check_model_gradients(model, [&] {
    const FusedProjections fused = fuse_projections(model);
    std::vector<nn::Var> rows;
    for (const auto& t : poses) rows.push_back(pose_global_feature(model, *pyr_, t, cfg, fused));
    // Training mode: batch norm over the batch, dropout under a fixed key.
    return probe(confidence_head(model, nn::concat_rows(rows), true, 3));
  });
  EXPECT_LT(report.max_rel_error, 1e-5) << report.worst;
  EXPECT_GT(report.entries, 500u);
}

TEST(PreselectTest, CountMatchesCeilingRule) {
  for (std::size_t n : {1u, 3u, 7u, 10u, 20u, 33u, 100u}) {
    for (double delta : {0.01, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0}) {
      std::vector<std::size_t> counts(n, 0);
      EXPECT_EQ(testing::preselect_oracle(counts, delta).size(),
                std::max<std::size_t>(1, static_cast<std::size_t>(
                                             std::ceil(std::round(n * delta * 1e6) / 1e6))))
          << n << " " << delta;
    }
  }
}

// Points on the y axis; a small rotation about x keeps the nearest points
// inside eps, so each pose's CC score is set by construction.
struct ShiftContext {
  EvaluationContext ctx;
  CandidatePoseSet poses;
  std::vector<std::size_t> counts;
};
ShiftContext shift_context(const std::vector<std::size_t>& wanted_counts) {
  PointCloud src, tgt;
  CorrespondenceSet c;
  const std::size_t m = 20;
  for (std::uint32_t i = 0; i < m; ++i) {
    src.points.push_back({0, 10.0 * (i + 1), 0});
    tgt.points.push_back({0, 10.0 * (i + 1), 0});
    c.add(i, i);
  }
  CandidatePoseSet poses;
  for (std::size_t cnt : wanted_counts) {
    const double angle = cnt == 0 ? 1.0 : 0.05 / (10.0 * (static_cast<double>(cnt) + 0.5));
    poses.add(RigidTransform::from_axis_angle({1, 0, 0}, angle), {});
  }
  return {EvaluationContext(src, tgt, c, 0.05), poses, wanted_counts};
}

TEST(PreselectTest, MatchesOracleProperty) {
  Gen gen(8);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::size_t> counts(gen.between(1, 25));
    for (auto& v : counts) v = gen.between(0, 6);  // many ties
    auto sc = shift_context(counts);
    for (std::size_t i = 0; i < counts.size(); ++i) {
      ASSERT_EQ(cc_score(sc.ctx, sc.poses.poses[i]), counts[i]) << i;
    }
    const double delta = gen.uniform(0.05, 1.0);
    EXPECT_EQ(preselect_by_cc(sc.ctx, sc.poses, delta), testing::preselect_oracle(counts, delta));
  }
  auto sc = shift_context({1, 2});
  EXPECT_THROW(preselect_by_cc(sc.ctx, sc.poses, 0.0), Error);
  EXPECT_THROW(preselect_by_cc(sc.ctx, sc.poses, 1.5), Error);
  EXPECT_THROW(preselect_by_cc(sc.ctx, CandidatePoseSet{}, 0.5), Error);
}

TEST_F(PyramidFixture, EvaluateCandidatesScoresOnlyPreselected) {
  Gen gen(9);
  const DeepPeModel model(small_model(10));
  FeaturePyramid pyr = *pyr_;
  project_features(pyr, model);
  auto sc = shift_context({3, 0, 5, 5, 1, 2, 4, 0, 1, 3});
  const auto scored =
      evaluate_candidates(model, sc.ctx, pyr, sc.poses, 0.3, testing::small_paa());
  EXPECT_EQ(scored.scored_indices, (std::vector<std::size_t>{2, 3, 6}));
  for (std::size_t i = 0; i < sc.poses.size(); ++i) {
    const bool in = i == 2 || i == 3 || i == 6;
    EXPECT_EQ(scored.scores[i] == kExcludedScore, !in) << i;
  }
  EXPECT_TRUE(scored.best_index == 2 || scored.best_index == 3 || scored.best_index == 6);
}

}  // namespace
}  // namespace dpe
