#include "cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "deeppe/bench_runner.hpp"
#include "deeppe/config.hpp"
#include "deeppe/dataset.hpp"
#include "deeppe/error.hpp"
#include "deeppe/evaluators.hpp"
#include "deeppe/model.hpp"
#include "deeppe/nn/serialize.hpp"
#include "deeppe/pipeline.hpp"
#include "deeppe/train.hpp"

namespace dpe::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonFlags {
  std::string config_file;
  std::vector<std::string> sets;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool out_required) {
  cmd->add_option("--config", flags.config_file, "YAML config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", flags.sets, "Override one key, key=value (repeatable)");
  auto* out = cmd->add_option("--out", flags.out_dir, "Output directory");
  if (out_required) out->required();
}

Config load_config(const CommonFlags& flags) {
  Config cfg;
  if (!flags.config_file.empty()) cfg.load_file(flags.config_file);
  for (const auto& s : flags.sets) cfg.set_assignment(s);
  return cfg;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string pose_line(const RigidTransform& t) {
  std::string line;
  for (const double v : t.to_row_major()) {
    if (!line.empty()) line += ' ';
    line += fmt(v);
  }
  return line;
}

RigidTransform read_pose_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read pose file '" + path.string() + "'");
  std::vector<double> values;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument,
                  "pose file '" + path.string() + "': '" + tok + "' is not a number");
    }
  }
  if (values.size() != 12) {
    throw Error(ErrorCode::kInvalidArgument,
                "pose file '" + path.string() + "' has " + std::to_string(values.size()) +
                    " numbers, expected 12 (row-major R then t)");
  }
  return RigidTransform::from_row_major(values);
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + dir.string() + "': " + ec.message());
}

void write_config_echo(const fs::path& dir, const Config& cfg) {
  write_file_atomic(dir / "config.yaml",
                    std::string("# deeppe ") + DEEPPE_VERSION + "\n" + cfg.to_yaml());
}

json header(const Config& cfg) {
  return {{"tool", "deeppe"}, {"version", DEEPPE_VERSION}, {"config", cfg.entries()}};
}

DeepPeModel load_weights(const Experiment& e, const std::string& path) {
  DeepPeModel model(e.model);
  model.params().assign(nn::load_model(path));
  return model;
}

std::string pair_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "pair_%04zu", i);
  return buf;
}

// synth

int cmd_synth(const CommonFlags& flags, std::size_t pairs_flag, std::ostream& out) {
  const Config cfg = load_config(flags);
  const Experiment e = make_experiment(cfg);
  const fs::path dir = flags.out_dir;
  prepare_out_dir(dir);
  const std::size_t n = pairs_flag ? pairs_flag : e.train_pairs;

  json manifest = header(cfg);
  manifest["pairs"] = json::array();
  const auto seeds = training_seeds(e.seed, n);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const ScenePair pair = synth_scene(e.dataset.scene, seeds[i]);
    const std::string stem = pair_stem(i);
    write_ply(dir / (stem + "_src.ply"), pair.src);
    write_ply(dir / (stem + "_tgt.ply"), pair.tgt);
    write_file_atomic(dir / (stem + "_gt.txt"), pose_line(pair.t_gt) + "\n");
    std::string corrs;
    for (const auto& c : pair.gt_corrs.pairs()) {
      corrs += std::to_string(c.source_index) + ' ' + std::to_string(c.target_index) + '\n';
    }
    write_file_atomic(dir / (stem + "_corrs.txt"), corrs);
    manifest["pairs"].push_back({{"id", i},
                                 {"seed", pair.seed},
                                 {"src", stem + "_src.ply"},
                                 {"tgt", stem + "_tgt.ply"},
                                 {"gt", stem + "_gt.txt"},
                                 {"corrs", stem + "_corrs.txt"},
                                 {"overlap", pair.overlap},
                                 {"noise_sigma", pair.noise_sigma}});
    out << stem << " seed " << pair.seed << " overlap " << fmt(pair.overlap) << " points "
        << pair.src.size() << '/' << pair.tgt.size() << '\n';
  }
  write_config_echo(dir, cfg);
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return kExitOk;
}

std::vector<ScenePair> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read manifest '" + path.string() + "'");
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kConfig, "manifest '" + path.string() + "': " + ex.what());
  }
  const fs::path base = path.parent_path();
  std::vector<ScenePair> scenes;
  try {
    for (const auto& p : m.at("pairs")) {
      ScenePair s;
      s.src = read_ply(base / p.at("src").get<std::string>());
      s.tgt = read_ply(base / p.at("tgt").get<std::string>());
      s.t_gt = read_pose_file(base / p.at("gt").get<std::string>());
      s.seed = p.at("seed").get<std::uint64_t>();
      s.overlap = p.at("overlap").get<double>();
      s.noise_sigma = p.at("noise_sigma").get<double>();
      const fs::path corrs_path = base / p.at("corrs").get<std::string>();
      std::ifstream cin(corrs_path);
      if (!cin) throw Error(ErrorCode::kIo, "cannot read '" + corrs_path.string() + "'");
      std::uint32_t a = 0, b = 0;
      while (cin >> a >> b) s.gt_corrs.add(a, b);
      if (!cin.eof()) {
        throw Error(ErrorCode::kInvalidArgument, "malformed correspondences in '" +
                                                     corrs_path.string() + "'");
      }
      s.gt_corrs.check_bounds(s.src.size(), s.tgt.size());
      scenes.push_back(std::move(s));
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kConfig, "manifest '" + path.string() + "': " + ex.what());
  }
  return scenes;
}

// train

int cmd_train(const CommonFlags& flags, const std::string& manifest,
              const std::string& init_dump, std::ostream& out) {
  const Config cfg = load_config(flags);
  const Experiment e = make_experiment(cfg);
  const fs::path dir = flags.out_dir;
  prepare_out_dir(dir);

  DeepPeModel model(e.model);
  if (!init_dump.empty()) nn::save_model(init_dump, model.params());

  json report = header(cfg);
  TrainLog log;
  if (e.train.epochs > 0) {
    Dataset data = manifest.empty()
                       ? generate_dataset(e.dataset, training_seeds(e.seed, e.train_pairs))
                       : generate_dataset(e.dataset, load_manifest(manifest));
    for (const auto& line : data.log) out << "dataset: " << line << '\n';
    const TrainingSet set = to_training_set(data, e.pyramid);
    std::size_t positives = 0;
    for (const auto& s : set.samples) positives += s.d_x < e.train.loss.beta;
    out << "dataset: " << data.pairs.size() << " pairs, " << set.samples.size()
        << " poses, " << positives << " correct\n";
    report["dataset"] = {{"pairs", data.pairs.size()},
                         {"poses", set.samples.size()},
                         {"correct", positives},
                         {"log", data.log}};
    log = train(model, set, e.train);
    for (std::size_t i = 0; i < log.epoch_loss.size(); ++i) {
      out << "epoch " << i << " loss " << fmt(log.epoch_loss[i]) << '\n';
    }
  } else {
    out << "epochs=0: writing the initial weights\n";
  }
  report["epoch_loss"] = log.epoch_loss;

  std::string csv = "epoch,loss\n";
  for (std::size_t i = 0; i < log.epoch_loss.size(); ++i) {
    csv += std::to_string(i) + ',' + fmt(log.epoch_loss[i]) + '\n';
  }
  std::string batches = "batch,loss\n";
  for (std::size_t i = 0; i < log.batch_loss.size(); ++i) {
    batches += std::to_string(i) + ',' + fmt(log.batch_loss[i]) + '\n';
  }
  nn::save_model(dir / "model.dpe", model.params());
  write_file_atomic(dir / "loss_log.csv", csv);
  write_file_atomic(dir / "batch_log.csv", batches);
  write_file_atomic(dir / "train.json", report.dump(2) + "\n");
  write_config_echo(dir, cfg);
  return kExitOk;
}

// register

int cmd_register(const CommonFlags& flags, const std::string& src_path,
                 const std::string& tgt_path, const std::string& weights,
                 const std::string& evaluator, const std::string& gt_path,
                 std::ostream& out) {
  const Config cfg = load_config(flags);
  const Experiment e = make_experiment(cfg);
  const EvaluatorKind kind = parse_evaluator(evaluator);
  if (kind == EvaluatorKind::kDeepPe && weights.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "evaluator deeppe needs --weights");
  }
  std::optional<RigidTransform> gt;
  if (!gt_path.empty()) gt = read_pose_file(gt_path);

  const PointCloud src = read_ply(src_path);
  const PointCloud tgt = read_ply(tgt_path);
  const PipelineConfig& pc = e.bench.pipeline;
  CorrespondenceSet corrs = putative_correspondences(src, tgt, pc, derive_seed(e.seed, 10));
  const CandidatePoseSet candidates =
      estimate_candidates(corrs, src, tgt, pc, derive_seed(e.seed, 11));
  const EvaluationContext ctx(src, tgt, std::move(corrs), pc.inlier_eps);

  ScoredPoses scored;
  if (kind == EvaluatorKind::kDeepPe) {
    const DeepPeModel model = load_weights(e, weights);
    const FeaturePyramid pyr = extract_pyramid(src, tgt, e.pyramid, model);
    scored = evaluate_candidates(model, ctx, pyr, candidates, e.bench.delta, e.paa);
  } else {
    scored = score_candidates(kind, ctx, candidates, e.bench.tcd_trunc);
  }
  const RigidTransform& pose = scored.poses.poses[scored.best_index];
  const double score = scored.scores[scored.best_index];

  out << "evaluator " << evaluator_name(kind) << '\n';
  out << "candidates " << candidates.size() << '\n';
  out << "pose " << pose_line(pose) << '\n';
  out << "score " << fmt(score) << '\n';
  json result = header(cfg);
  result["evaluator"] = evaluator_name(kind);
  result["candidates"] = candidates.size();
  result["pose"] = pose.to_row_major();
  result["score"] = score;
  if (gt) {
    const double r = rre(pose, *gt);
    const double t = rte(pose, *gt);
    out << "rre_deg " << fmt(r) << '\n';
    out << "rte_m " << fmt(t) << '\n';
    result["rre_deg"] = r;
    result["rte_m"] = t;
  }
  if (!flags.out_dir.empty()) {
    const fs::path dir = flags.out_dir;
    prepare_out_dir(dir);
    write_file_atomic(dir / "result.json", result.dump(2) + "\n");
    write_config_echo(dir, cfg);
  }
  return kExitOk;
}

// bench and sweep

bool lists_deeppe(const BenchConfig& b) {
  return std::find(b.evaluators.begin(), b.evaluators.end(), EvaluatorKind::kDeepPe) !=
         b.evaluators.end();
}

int cmd_bench(const CommonFlags& flags, const std::string& weights, std::ostream& out) {
  const Config cfg = load_config(flags);
  const Experiment e = make_experiment(cfg);
  std::optional<DeepPeModel> model;
  if (lists_deeppe(e.bench)) {
    if (weights.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "bench.evaluators lists deeppe, so --weights is required");
    }
    model = load_weights(e, weights);
  }
  const fs::path dir = flags.out_dir;
  prepare_out_dir(dir);
  const BenchReport report = run_benchmark(e.bench, model ? &*model : nullptr);
  write_reports(report, dir);
  write_config_echo(dir, cfg);
  for (const auto& s : report.summary) {
    out << std::left << std::setw(8) << s.name << " RR " << fmt(s.recall) << '\n';
  }
  out << "gt_bound RR " << fmt(report.gt_bound) << '\n';
  return kExitOk;
}

int cmd_sweep(const CommonFlags& flags, const std::string& weights, const std::string& axis,
              std::ostream& out) {
  const Config cfg = load_config(flags);
  Experiment e = make_experiment(cfg);
  e.bench.evaluators = {EvaluatorKind::kDeepPe};
  const DeepPeModel model = load_weights(e, weights);
  const fs::path dir = flags.out_dir;
  prepare_out_dir(dir);
  const BenchReport report = run_benchmark(e.bench, &model);

  json j = header(cfg);
  j["axis"] = axis;
  j["rows"] = json::array();
  std::string csv;
  if (axis == "delta") {
    csv = "delta,recall,scored\n";
    for (const auto& r : report.delta_sweep) {
      j["rows"].push_back({{"delta", r.delta}, {"recall", r.recall}, {"scored", r.scored}});
      csv += fmt(r.delta) + ',' + fmt(r.recall) + ',' + std::to_string(r.scored) + '\n';
      out << "delta " << fmt(r.delta) << " RR " << fmt(r.recall) << " scored " << r.scored
          << '\n';
    }
  } else {
    csv = "lambda,fsrr\n";
    for (const auto& r : report.lambda_sweep) {
      j["rows"].push_back({{"lambda", r.lambda},
                           {"fsrr", r.fsrr ? json(*r.fsrr) : json(nullptr)}});
      const std::string v = r.fsrr ? fmt(*r.fsrr) : "n/a";
      csv += fmt(r.lambda) + ',' + (r.fsrr ? v : "") + '\n';
      out << "lambda " << fmt(r.lambda) << " FSRR " << v << '\n';
    }
  }
  write_file_atomic(dir / ("sweep_" + axis + ".json"), j.dump(2) + "\n");
  write_file_atomic(dir / ("sweep_" + axis + ".csv"), csv);
  write_config_echo(dir, cfg);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"deeppe: point cloud registration with a learned pose evaluator"};
  app.set_version_flag("--version", std::string("deeppe ") + DEEPPE_VERSION);
  app.require_subcommand(1);

  CommonFlags common;
  std::size_t synth_pairs = 0;
  auto* synth = app.add_subcommand("synth", "Write seeded synthetic pairs and a manifest");
  add_common(synth, common, true);
  synth->add_option("--pairs", synth_pairs, "Number of pairs (default: train.pairs)");

  std::string manifest, init_dump;
  auto* train_cmd = app.add_subcommand("train", "Train a Deep-PE model");
  add_common(train_cmd, common, true);
  train_cmd->add_option("--manifest", manifest, "Train on pairs written by synth")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--init-dump", init_dump, "Also save the initial weights here");

  std::string src, tgt, weights, evaluator = "cc", gt;
  auto* reg = app.add_subcommand("register", "Register one pair of PLY clouds");
  add_common(reg, common, false);
  reg->add_option("source", src, "Source PLY")->required();
  reg->add_option("target", tgt, "Target PLY")->required();
  reg->add_option("--evaluator", evaluator, "cc, mae, mse, tcd or deeppe");
  reg->add_option("--weights", weights, "Deep-PE weights (DPE1)");
  reg->add_option("--gt", gt, "Ground-truth pose file: 12 numbers, row-major R then t");

  auto* bench = app.add_subcommand("bench", "Compare evaluators on seeded synthetic pairs");
  add_common(bench, common, true);
  bench->add_option("--weights", weights, "Deep-PE weights (DPE1)");

  std::string axis;
  auto* sweep = app.add_subcommand("sweep", "Deep-PE delta or lambda sweep");
  add_common(sweep, common, true);
  sweep->add_option("--axis", axis, "delta or lambda")
      ->required()
      ->check(CLI::IsMember({"delta", "lambda"}));
  sweep->add_option("--weights", weights, "Deep-PE weights (DPE1)")->required();

  auto* show = app.add_subcommand("config", "Print the effective configuration");
  add_common(show, common, false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error[USAGE]: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(common, synth_pairs, out);
    if (*train_cmd) return cmd_train(common, manifest, init_dump, out);
    if (*reg) return cmd_register(common, src, tgt, weights, evaluator, gt, out);
    if (*bench) return cmd_bench(common, weights, out);
    if (*sweep) return cmd_sweep(common, weights, axis, out);
    if (*show) {
      out << load_config(common).to_yaml();
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error[" << error_code_name(e.code()) << "]: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    err << "error[INTERNAL]: " << e.what() << '\n';
    return kExitError;
  }
  return kExitUsage;
}

}  // namespace dpe::cli
