#include "deeppe/bench_runner.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "deeppe/error.hpp"

namespace dpe {

bool admits_failure(EvaluatorKind kind) { return kind == EvaluatorKind::kDeepPe; }

namespace {

PairResult make_result(std::size_t id, const ScenePair& pair, const ScoredPoses& scored,
                       bool gt_in, double ir) {
  PairResult r;
  r.pair_id = id;
  r.chosen = scored.poses.poses[scored.best_index];
  r.rre = rre(r.chosen, pair.t_gt);
  r.rte = rte(r.chosen, pair.t_gt);
  r.scores = scored.scores;
  r.gt_in_candidates = gt_in;
  r.inlier_ratio = ir;
  return r;
}

// Best candidate among `keep` under full scores; lowest index on ties.
std::size_t best_within(const std::vector<double>& scores, const std::vector<std::size_t>& keep) {
  std::size_t best = keep.front();
  for (auto i : keep) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

}  // namespace

BenchReport run_benchmark(const BenchConfig& cfg, const DeepPeModel* model) {
  const bool want_deeppe =
      std::find(cfg.evaluators.begin(), cfg.evaluators.end(), EvaluatorKind::kDeepPe) !=
      cfg.evaluators.end();
  if (want_deeppe && model == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "the deeppe evaluator needs model weights");
  }
  if (cfg.n_pairs == 0) throw Error(ErrorCode::kInvalidArgument, "benchmark needs at least one pair");

  BenchReport report;
  report.echo = cfg.echo;
  std::vector<std::vector<double>> deeppe_scores;
  std::vector<ScenePair> scenes;
  std::vector<EvaluationContext> contexts;
  std::vector<CandidatePoseSet> candidate_sets;

  for (std::size_t i = 0; i < cfg.n_pairs; ++i) {
    const std::uint64_t seed = derive_seed(cfg.seed, i);
    ScenePair pair = synth_scene(cfg.scene, seed);
    PreparedPair prep = prepare_pair(pair, cfg.pipeline, seed);
    if (prep.candidates.empty()) {
      // Keep the pair in the statistics; identity is the only guess left.
      prep.candidates.add(RigidTransform::identity(), {PoseOrigin::kExternal, 0, std::nullopt});
    }
    PairInfo info;
    info.id = i;
    info.seed = seed;
    info.overlap = pair.overlap;
    info.inlier_ratio = prep.inlier_ratio;
    info.correspondences = prep.corrs.size();
    info.candidates = prep.candidates.size();
    double best_dx = std::numeric_limits<double>::infinity();
    for (const auto& pose : prep.candidates.poses) {
      const double dx = rmse_correspondences(pose, pair.gt_corrs, pair.src, pair.tgt);
      if (dx < best_dx) {
        best_dx = dx;
        info.best_candidate_rre = rre(pose, pair.t_gt);
        info.best_candidate_rte = rte(pose, pair.t_gt);
      }
    }
    info.gt_in_candidates = best_dx < cfg.beta;

    EvaluationContext ctx(pair.src, pair.tgt, prep.corrs, cfg.pipeline.inlier_eps);
    for (auto kind : cfg.evaluators) {
      const std::string name(evaluator_name(kind));
      ScoredPoses scored;
      if (kind == EvaluatorKind::kDeepPe) {
        const FeaturePyramid pyr = extract_pyramid(pair.src, pair.tgt, cfg.pyramid, *model);
        std::vector<double> full(prep.candidates.size());
        for (std::size_t c = 0; c < full.size(); ++c) {
          full[c] = evaluate_pose(*model, pyr, prep.candidates.poses[c], cfg.paa);
        }
        scored.poses = prep.candidates;
        scored.scored_indices = preselect_by_cc(ctx, prep.candidates, cfg.delta);
        scored.scores.assign(full.size(), kExcludedScore);
        for (auto c : scored.scored_indices) scored.scores[c] = full[c];
        scored.best_index = select_best(scored.scores);
        deeppe_scores.push_back(std::move(full));
      } else {
        scored = score_candidates(kind, ctx, prep.candidates, cfg.tcd_trunc);
      }
      report.results[name].push_back(
          make_result(i, pair, scored, info.gt_in_candidates, info.inlier_ratio));
    }
    report.pairs.push_back(info);
    if (want_deeppe) {
      candidate_sets.push_back(prep.candidates);
      contexts.push_back(std::move(ctx));
      scenes.push_back(std::move(pair));
    }
  }

  std::size_t gt = 0;
  for (const auto& p : report.pairs) gt += p.gt_in_candidates;
  report.gt_bound = static_cast<double>(gt) / static_cast<double>(report.pairs.size());
  for (auto kind : cfg.evaluators) {
    const std::string name(evaluator_name(kind));
    const auto& list = report.results.at(name);
    report.summary.push_back({name, registration_recall(list, cfg.tau2_deg, cfg.tau3_m),
                              success_error_means(list, cfg.tau2_deg, cfg.tau3_m)});
  }

  if (want_deeppe) {
    for (double delta : cfg.deltas) {
      DeltaRow row;
      row.delta = delta;
      std::size_t ok = 0;
      for (std::size_t i = 0; i < scenes.size(); ++i) {
        const auto keep = preselect_by_cc(contexts[i], candidate_sets[i], delta);
        row.scored += keep.size();
        const auto& pose = candidate_sets[i].poses[best_within(deeppe_scores[i], keep)];
        ok += rre(pose, scenes[i].t_gt) < cfg.tau2_deg && rte(pose, scenes[i].t_gt) < cfg.tau3_m;
      }
      row.recall = static_cast<double>(ok) / static_cast<double>(scenes.size());
      report.delta_sweep.push_back(row);
    }
    const auto& dp = report.results.at(std::string(evaluator_name(EvaluatorKind::kDeepPe)));
    for (double lambda : cfg.lambdas) report.lambda_sweep.push_back({lambda, fsrr(dp, lambda)});
  }
  report.bins = bin_by_inlier_ratio(report.results, cfg.bin_edges, cfg.tau2_deg, cfg.tau3_m);
  return report;
}

namespace {

using nlohmann::json;

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json optional_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

std::string report_json(const BenchReport& report) {
  json j;
  j["tool"] = "deeppe";
  j["version"] = DEEPPE_VERSION;
  j["config"] = report.echo;
  j["gt_bound"] = report.gt_bound;
  json pairs = json::array();
  for (const auto& p : report.pairs) {
    pairs.push_back({{"id", p.id},
                     {"seed", p.seed},
                     {"overlap", p.overlap},
                     {"inlier_ratio", p.inlier_ratio},
                     {"correspondences", p.correspondences},
                     {"candidates", p.candidates},
                     {"gt_in_candidates", p.gt_in_candidates},
                     {"best_candidate_rre", p.best_candidate_rre},
                     {"best_candidate_rte", p.best_candidate_rte}});
  }
  j["pairs"] = pairs;
  json results = json::object();
  for (const auto& [name, list] : report.results) {
    json arr = json::array();
    for (const auto& r : list) {
      json scores = json::array();
      for (double s : r.scores) scores.push_back(number_or_null(s));
      arr.push_back({{"pair", r.pair_id},
                     {"pose", r.chosen.to_row_major()},
                     {"rre", r.rre},
                     {"rte", r.rte},
                     {"scores", scores}});
    }
    results[name] = arr;
  }
  j["results"] = results;
  json summary = json::array();
  for (const auto& s : report.summary) {
    summary.push_back({{"evaluator", s.name},
                       {"recall", s.recall},
                       {"successes", s.errors.successes},
                       {"mean_rre", s.errors.rre},
                       {"mean_rte", s.errors.rte}});
  }
  j["summary"] = summary;
  json deltas = json::array();
  for (const auto& d : report.delta_sweep) {
    deltas.push_back({{"delta", d.delta}, {"recall", d.recall}, {"scored", d.scored}});
  }
  j["delta_sweep"] = deltas;
  json lambdas = json::array();
  for (const auto& l : report.lambda_sweep) {
    lambdas.push_back({{"lambda", l.lambda}, {"fsrr", optional_json(l.fsrr)}});
  }
  j["lambda_sweep"] = lambdas;
  json bins = json::array();
  for (const auto& b : report.bins.bins) {
    json recall = json::object();
    for (const auto& [name, rr] : b.recall) recall[name] = rr;
    bins.push_back({{"lo", b.lo},
                    {"hi", b.hi},
                    {"count", b.count},
                    {"empty", b.count == 0},
                    {"recall", recall},
                    {"gt_bound", optional_json(b.gt_bound)}});
  }
  j["bins"] = bins;
  return j.dump(2) + "\n";
}

std::map<std::string, std::string> report_csv(const BenchReport& report) {
  std::map<std::string, std::string> out;
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
  };
  {
    std::ostringstream os;
    os << "evaluator,recall,successes,mean_rre,mean_rte\n";
    for (const auto& s : report.summary) {
      os << s.name << ',' << fmt(s.recall) << ',' << s.errors.successes << ','
         << fmt(s.errors.rre) << ',' << fmt(s.errors.rte) << '\n';
    }
    out["summary.csv"] = os.str();
  }
  {
    std::ostringstream os;
    os << "pair,seed,inlier_ratio,gt_in_candidates";
    for (const auto& [name, list] : report.results) os << ',' << name << "_rre," << name << "_rte";
    os << '\n';
    for (std::size_t i = 0; i < report.pairs.size(); ++i) {
      const auto& p = report.pairs[i];
      os << p.id << ',' << p.seed << ',' << fmt(p.inlier_ratio) << ',' << p.gt_in_candidates;
      for (const auto& [name, list] : report.results) {
        os << ',' << fmt(list[i].rre) << ',' << fmt(list[i].rte);
      }
      os << '\n';
    }
    out["pairs.csv"] = os.str();
  }
  if (!report.delta_sweep.empty()) {
    std::ostringstream os;
    os << "delta,recall,scored\n";
    for (const auto& d : report.delta_sweep) {
      os << fmt(d.delta) << ',' << fmt(d.recall) << ',' << d.scored << '\n';
    }
    out["delta_sweep.csv"] = os.str();
  }
  if (!report.lambda_sweep.empty()) {
    std::ostringstream os;
    os << "lambda,fsrr\n";
    for (const auto& l : report.lambda_sweep) {
      os << fmt(l.lambda) << ',' << (l.fsrr ? fmt(*l.fsrr) : "n/a") << '\n';
    }
    out["lambda_sweep.csv"] = os.str();
  }
  {
    std::ostringstream os;
    os << "lo,hi,count,gt_bound";
    std::vector<std::string> names;
    for (const auto& [name, list] : report.results) names.push_back(name);
    for (const auto& n : names) os << ',' << n;
    os << '\n';
    for (const auto& b : report.bins.bins) {
      os << fmt(b.lo) << ',' << fmt(b.hi) << ',' << b.count << ','
         << (b.gt_bound ? fmt(*b.gt_bound) : "empty");
      for (const auto& n : names) {
        auto it = b.recall.find(n);
        os << ',' << (it == b.recall.end() ? "empty" : fmt(it->second));
      }
      os << '\n';
    }
    out["bins.csv"] = os.str();
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    f << contents;
    if (!f) throw Error(ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot rename to " + path.string() + ": " + ec.message());
}

void write_reports(const BenchReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  write_file_atomic(dir / "report.json", report_json(report));
  for (const auto& [name, text] : report_csv(report)) write_file_atomic(dir / name, text);
}

}  // namespace dpe
