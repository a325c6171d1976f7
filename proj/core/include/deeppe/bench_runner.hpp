#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "deeppe/evaluators.hpp"
#include "deeppe/metrics.hpp"
#include "deeppe/model.hpp"
#include "deeppe/pipeline.hpp"
#include "deeppe/pyramid.hpp"
#include "deeppe/synth.hpp"

namespace dpe {

struct BenchConfig {
  std::size_t n_pairs = 20;
  std::uint64_t seed = 1;  // master seed; pair i uses derive_seed(seed, i)
  SceneParams scene;
  PipelineConfig pipeline;
  PyramidConfig pyramid;
  PaaConfig paa;
  std::vector<EvaluatorKind> evaluators = {EvaluatorKind::kCc, EvaluatorKind::kMae,
                                           EvaluatorKind::kMse, EvaluatorKind::kTcd,
                                           EvaluatorKind::kDeepPe};
  double delta = 0.4;
  std::vector<double> deltas = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> lambdas = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  double tcd_trunc = 0.1;
  double tau2_deg = 15.0;
  double tau3_m = 0.3;
  double beta = 0.2;
  std::vector<double> bin_edges = kDefaultBinEdges;
  // Flattened configuration copied verbatim into the report.
  std::map<std::string, std::string> echo;
};

/// Only a learned confidence can reject every candidate; the statistics-based
/// evaluators always select one, so FSRR is undefined for them.
bool admits_failure(EvaluatorKind kind);

struct PairInfo {
  std::size_t id = 0;
  std::uint64_t seed = 0;
  double overlap = 0.0;
  double inlier_ratio = 0.0;
  std::size_t correspondences = 0;
  std::size_t candidates = 0;
  bool gt_in_candidates = false;
  double best_candidate_rre = 0.0;  // closest candidate to the ground truth
  double best_candidate_rte = 0.0;
};

struct EvaluatorSummary {
  std::string name;
  double recall = 0.0;
  ErrorMeans errors;
};

struct DeltaRow {
  double delta = 0.0;
  double recall = 0.0;
  std::size_t scored = 0;  // total Deep-PE evaluations over all pairs
};

struct LambdaRow {
  double lambda = 0.0;
  std::optional<double> fsrr;  // nullopt: no pair lacks a correct candidate
};

struct BenchReport {
  std::vector<PairInfo> pairs;
  std::map<std::string, std::vector<PairResult>> results;
  std::vector<EvaluatorSummary> summary;
  double gt_bound = 0.0;
  std::vector<DeltaRow> delta_sweep;    // Deep-PE only
  std::vector<LambdaRow> lambda_sweep;  // Deep-PE only
  BinReport bins;
  std::map<std::string, std::string> echo;
};

/// Synthesizes n_pairs seeded pairs, runs the front end, and scores the
/// candidates with every configured evaluator. `model` is required when
/// kDeepPe is listed.
BenchReport run_benchmark(const BenchConfig& cfg, const DeepPeModel* model);

/// JSON report: config echo, tool version, per-pair results, summaries,
/// sweeps and bins. Contains no timings, so fixed seeds give fixed bytes.
std::string report_json(const BenchReport& report);
/// CSV mirrors, keyed by file name.
std::map<std::string, std::string> report_csv(const BenchReport& report);
/// Writes report.json and the CSV files into `dir`, each through a temporary
/// file that is renamed into place.
void write_reports(const BenchReport& report, const std::filesystem::path& dir);

/// Writes `contents` to a temporary sibling of `path` and renames it.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace dpe
