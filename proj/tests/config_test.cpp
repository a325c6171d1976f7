#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "deeppe/config.hpp"
#include "deeppe/error.hpp"
#include "deeppe/pipeline.hpp"

namespace dpe {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kUnreachable;
}

TEST(ConfigTest, DefaultsAreLoaded) {
  const Config c;
  EXPECT_EQ(c.entries().size(), Config::defaults().size());
  EXPECT_EQ(c.get_size("d"), 64u);
  EXPECT_DOUBLE_EQ(c.get_double("beta"), 0.2);
  EXPECT_FALSE(c.get_bool("pipeline.mutual"));
  EXPECT_EQ(c.get_list("bench.evaluators").size(), 5u);
}

TEST(ConfigTest, NestedYamlFlattensToDottedKeys) {
  Config c;
  c.load_string("seed: 9\nscene:\n  noise: 0.01\n  surface: room\nbench:\n  deltas: [0.2, 0.4]\n");
  EXPECT_EQ(c.get_u64("seed"), 9u);
  EXPECT_DOUBLE_EQ(c.get_double("scene.noise"), 0.01);
  EXPECT_EQ(c.get("scene.surface"), "room");
  EXPECT_EQ(c.get_doubles("bench.deltas"), (std::vector<double>{0.2, 0.4}));
}

TEST(ConfigTest, SetOverridesFile) {
  Config c;
  c.load_string("d: 32\n");
  c.set_assignment("d=16");
  EXPECT_EQ(c.get_size("d"), 16u);
  c.set_assignment("bench.evaluators=cc, tcd");
  EXPECT_EQ(c.get_list("bench.evaluators"), (std::vector<std::string>{"cc", "tcd"}));
}

TEST(ConfigTest, ErrorsAreConfigOrIo) {
  Config c;
  EXPECT_EQ(code_of([&] { c.load_string("nope: 1\n"); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { c.load_string("scene:\n  colour: red\n"); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { c.load_string("- 1\n- 2\n"); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { c.load_string("d: [1, 2\n"); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { c.set("nope", "1"); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { c.set_assignment("d"); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { c.set_assignment("=3"); }), ErrorCode::kConfig);
  c.set("d", "abc");
  EXPECT_EQ(code_of([&] { c.get_size("d"); }), ErrorCode::kConfig);
  c.set("beta", "0.2x");
  EXPECT_EQ(code_of([&] { c.get_double("beta"); }), ErrorCode::kConfig);
  c.set("pipeline.mutual", "maybe");
  EXPECT_EQ(code_of([&] { c.get_bool("pipeline.mutual"); }), ErrorCode::kConfig);
  c.set("bench.deltas", "0.1,x");
  EXPECT_EQ(code_of([&] { c.get_doubles("bench.deltas"); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { c.load_file("/nonexistent/deeppe.yaml"); }), ErrorCode::kIo);
}

TEST(ConfigTest, YamlRoundTrip) {
  Config a;
  a.set("seed", "42");
  a.set("scene.surface", "primitives");
  a.set("bench.evaluators", "cc,deeppe");
  Config b;
  b.load_string(a.to_yaml());
  EXPECT_EQ(a.entries(), b.entries());
  const auto path = std::filesystem::temp_directory_path() / "deeppe_config_test.yaml";
  std::ofstream(path) << a.to_yaml();
  Config c;
  c.load_file(path);
  EXPECT_EQ(a.entries(), c.entries());
  std::filesystem::remove(path);
}

TEST(ExperimentTest, MapsKeysOntoStructs) {
  Config c;
  c.set("d", "16");
  c.set("heads", "2");
  c.set("k", "8");
  c.set("pipeline.ransac_iters", "0");
  c.set("bench.evaluators", "cc,deeppe");
  const Experiment e = make_experiment(c);
  EXPECT_EQ(e.model.d, 16u);
  EXPECT_EQ(e.paa.d, 16u);
  EXPECT_EQ(e.paa.heads, 2u);
  EXPECT_EQ(e.train.paa.k, 8u);
  EXPECT_FALSE(e.dataset.pipeline.use_ransac);
  EXPECT_EQ(e.bench.evaluators,
            (std::vector<EvaluatorKind>{EvaluatorKind::kCc, EvaluatorKind::kDeepPe}));
  EXPECT_DOUBLE_EQ(e.bench.beta, e.train.loss.beta);
  EXPECT_DOUBLE_EQ(e.dataset.beta, e.train.loss.beta);
  EXPECT_EQ(e.bench.echo, c.entries());
  c.set("model.head", "bogus");
  EXPECT_THROW(make_experiment(c), Error);
}

TEST(TrainingSeedsTest, DisjointFromBenchmarkSeeds) {
  for (std::uint64_t master : {0u, 1u, 7u}) {
    const auto train = training_seeds(master, 500);
    std::set<std::uint64_t> bench;
    for (std::uint64_t i = 0; i < 500; ++i) bench.insert(derive_seed(master, i));
    std::set<std::uint64_t> unique(train.begin(), train.end());
    EXPECT_EQ(unique.size(), 500u);
    for (auto s : train) EXPECT_EQ(bench.count(s), 0u);
  }
  EXPECT_EQ(training_seeds(3, 4), training_seeds(3, 4));
}

}  // namespace
}  // namespace dpe
