#include <benchmark/benchmark.h>

#include <random>

#include "deeppe/config.hpp"
#include "deeppe/descriptors.hpp"
#include "deeppe/model.hpp"
#include "deeppe/nn/ops.hpp"
#include "deeppe/spatial.hpp"
#include "deeppe/synth.hpp"

namespace {

dpe::PointCloud random_cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  dpe::PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.emplace_back(u(rng), u(rng), u(rng));
  return c;
}

void BM_KdTreeBuild(benchmark::State& state) {
  const auto cloud = random_cloud(state.range(0), 1);
  for (auto _ : state) {
    dpe::SpatialIndex index(cloud);
    benchmark::DoNotOptimize(index.size());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KdTreeBuild)->Arg(1000)->Arg(10000)->Arg(50000);

void BM_Knn(benchmark::State& state) {
  const auto cloud = random_cloud(20000, 2);
  const dpe::SpatialIndex index(cloud);
  const auto queries = random_cloud(1024, 3);
  std::size_t i = 0;
  for (auto _ : state) {
    auto nn = index.knn(queries.points[i++ % queries.size()], state.range(0));
    benchmark::DoNotOptimize(nn.data());
  }
}
BENCHMARK(BM_Knn)->Arg(1)->Arg(16)->Arg(64);

void BM_Fpfh(benchmark::State& state) {
  const dpe::Config cfg;
  const auto e = dpe::make_experiment(cfg);
  auto scene = e.dataset.scene;
  scene.n_points = state.range(0);
  const auto pair = dpe::synth_scene(scene, 4);
  const auto oriented = dpe::estimate_normals(pair.src, 16).cloud;
  for (auto _ : state) {
    auto f = dpe::fpfh(oriented, 0.15);
    benchmark::DoNotOptimize(f.features.data());
  }
  state.SetItemsProcessed(state.iterations() * oriented.size());
}
BENCHMARK(BM_Fpfh)->Arg(1000)->Arg(2500)->Unit(benchmark::kMillisecond);

// One Deep-PE pose evaluation at the default width.
void BM_EvaluatePose(benchmark::State& state) {
  dpe::Config cfg;
  cfg.set("d", std::to_string(state.range(0)));
  const auto e = dpe::make_experiment(cfg);
  const auto pair = dpe::synth_scene(e.dataset.scene, 5);
  const dpe::DeepPeModel model(e.model);
  const auto pyr = dpe::extract_pyramid(pair.src, pair.tgt, e.pyramid, model);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dpe::evaluate_pose(model, pyr, pair.t_gt, e.paa));
  }
}
BENCHMARK(BM_EvaluatePose)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TrainingForwardBackward(benchmark::State& state) {
  const dpe::Config cfg;
  const auto e = dpe::make_experiment(cfg);
  const auto pair = dpe::synth_scene(e.dataset.scene, 6);
  dpe::DeepPeModel model(e.model);
  const auto pyr = dpe::build_pyramid(pair.src, pair.tgt, e.pyramid);
  std::uint64_t step = 0;
  for (auto _ : state) {
    model.params().zero_grad();
    const auto fused = dpe::fuse_projections(model);
    std::vector<dpe::nn::Var> rows;
    for (int i = 0; i < 4; ++i) rows.push_back(dpe::pose_global_feature(model, pyr, pair.t_gt, e.paa, fused));
    auto loss = dpe::nn::sum(dpe::confidence_head(model, dpe::nn::concat_rows(rows), true, step++));
    dpe::nn::backward(loss);
  }
  state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_TrainingForwardBackward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
