#include "deeppe/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <sstream>

#include "deeppe/error.hpp"

namespace dpe {

const std::vector<std::pair<std::string, std::string>>& Config::defaults() {
  static const std::vector<std::pair<std::string, std::string>> kDefaults = {
      {"seed", "1"},
      {"d", "64"},
      {"k", "16"},
      {"t", "0.1"},
      {"heads", "4"},
      {"alpha", "5"},
      {"beta", "0.2"},
      {"gamma", "2"},
      {"delta", "0.4"},
      {"epochs", "40"},
      {"lr0", "0.001"},
      {"decay", "0.05"},
      {"voxel_fine", "0.05"},
      {"voxel_coarse", "0.2"},
      {"fpfh_radius", "0.15"},
      {"model.dropout", "0.5"},
      {"model.head", "confidence"},
      {"model.masked_softmax", "false"},
      {"train.pairs", "40"},
      {"train.batch_pos", "10"},
      {"train.batch_neg", "10"},
      {"train.weight_decay", "1e-5"},
      {"train.loss", "weighted_ce"},
      {"train.max_batches", "0"},
      {"dataset.n_correct", "10"},
      {"dataset.n_incorrect", "10"},
      {"scene.surface", "terrain"},
      {"scene.n_points", "2500"},
      {"scene.overlap", "0.3"},
      {"scene.noise", "0.005"},
      {"scene.rot_range", "180"},
      {"scene.trans_range", "0.5"},
      {"scene.spacing", "0.05"},
      {"pipeline.normal_k", "16"},
      {"pipeline.mutual", "false"},
      {"pipeline.max_corrs", "400"},
      {"pipeline.inlier_eps", "0.1"},
      {"pipeline.ransac_iters", "50"},
      {"pipeline.sc2", "true"},
      {"pipeline.sc2_seeds", "50"},
      {"pipeline.sc2_local_k", "30"},
      {"pipeline.sc2_sigma", "0.1"},
      {"pipeline.max_inlier_ratio", "1"},
      {"pipeline.perturb", "true"},
      {"perturb.n_small", "10"},
      {"perturb.n_large", "10"},
      {"perturb.small_max", "15"},
      {"perturb.large_min", "15"},
      {"perturb.large_max", "60"},
      {"perturb.trans_scale", "0.5"},
      {"bench.pairs", "20"},
      {"bench.evaluators", "cc,mae,mse,tcd,deeppe"},
      {"bench.deltas", "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0"},
      {"bench.lambdas", "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9"},
      {"bench.tcd_trunc", "0.1"},
      {"bench.tau2", "15"},
      {"bench.tau3", "0.3"},
      {"bench.bin_edges", "0,0.005,0.01,0.02,0.05,0.1,1"},
  };
  return kDefaults;
}

Config::Config() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

namespace {

void flatten(const YAML::Node& node, const std::string& prefix,
             std::vector<std::pair<std::string, std::string>>& out, const std::string& origin) {
  if (node.IsMap()) {
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      flatten(kv.second, prefix.empty() ? key : prefix + "." + key, out, origin);
    }
  } else if (node.IsSequence()) {
    std::string joined;
    for (std::size_t i = 0; i < node.size(); ++i) {
      if (!node[i].IsScalar()) {
        throw Error(ErrorCode::kConfig, origin + ": list '" + prefix + "' must hold scalars");
      }
      if (i) joined += ',';
      joined += node[i].as<std::string>();
    }
    out.emplace_back(prefix, joined);
  } else if (node.IsScalar()) {
    out.emplace_back(prefix, node.as<std::string>());
  } else if (!node.IsNull()) {
    throw Error(ErrorCode::kConfig, origin + ": unsupported value for '" + prefix + "'");
  }
}

}  // namespace

void Config::load_string(const std::string& yaml, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kConfig, origin + ": " + e.what());
  }
  if (root.IsNull()) return;
  if (!root.IsMap()) throw Error(ErrorCode::kConfig, origin + ": top level must be a mapping");
  std::vector<std::pair<std::string, std::string>> flat;
  flatten(root, "", flat, origin);
  for (const auto& [k, v] : flat) {
    if (!has(k)) throw Error(ErrorCode::kConfig, origin + ": unknown key '" + k + "'");
    values_[k] = v;
  }
}

void Config::load_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  load_string(ss.str(), path.string());
}

void Config::set(const std::string& key, const std::string& value) {
  if (!has(key)) throw Error(ErrorCode::kConfig, "unknown key '" + key + "'");
  values_[key] = value;
}

void Config::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::kConfig, "expected key=value, got '" + assignment + "'");
  }
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::kConfig, "unknown key '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key) const {
  const auto& s = get(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kConfig, "'" + key + "' must be a number, got '" + s + "'");
}

std::uint64_t Config::get_u64(const std::string& key) const {
  const auto& s = get(key);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kConfig,
                "'" + key + "' must be a non-negative integer, got '" + s + "'");
  }
  return v;
}

bool Config::get_bool(const std::string& key) const {
  const auto& s = get(key);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw Error(ErrorCode::kConfig, "'" + key + "' must be true or false, got '" + s + "'");
}

std::vector<std::string> Config::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : get_list(key)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfig, "'" + key + "' holds a non-number '" + item + "'");
    }
  }
  return out;
}

std::string Config::to_yaml() const {
  YAML::Emitter out;
  out << YAML::BeginMap;
  for (const auto& [k, v] : values_) out << YAML::Key << k << YAML::Value << v;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::vector<std::uint64_t> training_seeds(std::uint64_t master, std::size_t count) {
  const std::uint64_t base = derive_seed(master, 0x747261696e);
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(derive_seed(base, i));
  return out;
}

Experiment make_experiment(const Config& c) {
  Experiment e;
  e.seed = c.get_u64("seed");

  e.model.d = c.get_size("d");
  e.model.heads = c.get_size("heads");
  e.model.dropout = c.get_double("model.dropout");
  e.model.head = parse_model_head(c.get("model.head"));
  e.model.seed = e.seed;

  e.pyramid.voxel_fine = c.get_double("voxel_fine");
  e.pyramid.voxel_coarse = c.get_double("voxel_coarse");
  e.pyramid.fpfh_radius = c.get_double("fpfh_radius");
  e.pyramid.normal_k = c.get_size("pipeline.normal_k");

  e.paa.k = c.get_size("k");
  e.paa.t = c.get_double("t");
  e.paa.heads = e.model.heads;
  e.paa.d = e.model.d;
  e.paa.masked_softmax = c.get_bool("model.masked_softmax");

  e.train.epochs = c.get_size("epochs");
  e.train.lr0 = c.get_double("lr0");
  e.train.decay = c.get_double("decay");
  e.train.weight_decay = c.get_double("train.weight_decay");
  e.train.batch_pos = c.get_size("train.batch_pos");
  e.train.batch_neg = c.get_size("train.batch_neg");
  e.train.max_batches_per_epoch = c.get_size("train.max_batches");
  e.train.seed = e.seed;
  e.train.loss.variant = parse_loss_variant(c.get("train.loss"));
  e.train.loss.alpha = c.get_double("alpha");
  e.train.loss.beta = c.get_double("beta");
  e.train.loss.gamma = c.get_double("gamma");
  e.train.paa = e.paa;
  e.train_pairs = c.get_size("train.pairs");

  SceneParams& s = e.dataset.scene;
  s.surface = parse_surface(c.get("scene.surface"));
  s.n_points = c.get_size("scene.n_points");
  s.overlap_target = c.get_double("scene.overlap");
  s.noise_sigma = c.get_double("scene.noise");
  s.rot_range_deg = c.get_double("scene.rot_range");
  s.trans_range = c.get_double("scene.trans_range");
  s.spacing = c.get_double("scene.spacing");

  PipelineConfig& p = e.dataset.pipeline;
  p.normal_k = c.get_size("pipeline.normal_k");
  p.fpfh_radius = c.get_double("fpfh_radius");
  p.mutual = c.get_bool("pipeline.mutual");
  p.max_corrs = c.get_size("pipeline.max_corrs");
  p.inlier_eps = c.get_double("pipeline.inlier_eps");
  p.ransac_iters = c.get_size("pipeline.ransac_iters");
  p.use_ransac = p.ransac_iters > 0;
  p.use_sc2 = c.get_bool("pipeline.sc2");
  p.sc2.seed_count = c.get_size("pipeline.sc2_seeds");
  p.sc2.local_k = c.get_size("pipeline.sc2_local_k");
  p.sc2.dist_sigma = c.get_double("pipeline.sc2_sigma");
  p.max_inlier_ratio = c.get_double("pipeline.max_inlier_ratio");
  p.inject_perturbations = c.get_bool("pipeline.perturb");
  p.perturb.n_small = c.get_size("perturb.n_small");
  p.perturb.n_large = c.get_size("perturb.n_large");
  p.perturb.small_max_deg = c.get_double("perturb.small_max");
  p.perturb.large_min_deg = c.get_double("perturb.large_min");
  p.perturb.large_max_deg = c.get_double("perturb.large_max");
  p.perturb.trans_scale = c.get_double("perturb.trans_scale");

  e.dataset.n_correct = c.get_size("dataset.n_correct");
  e.dataset.n_incorrect = c.get_size("dataset.n_incorrect");
  e.dataset.beta = e.train.loss.beta;

  BenchConfig& b = e.bench;
  b.n_pairs = c.get_size("bench.pairs");
  b.seed = e.seed;
  b.scene = s;
  b.pipeline = p;
  b.pyramid = e.pyramid;
  b.paa = e.paa;
  b.evaluators.clear();
  for (const auto& name : c.get_list("bench.evaluators")) b.evaluators.push_back(parse_evaluator(name));
  b.delta = c.get_double("delta");
  b.deltas = c.get_doubles("bench.deltas");
  b.lambdas = c.get_doubles("bench.lambdas");
  b.tcd_trunc = c.get_double("bench.tcd_trunc");
  b.tau2_deg = c.get_double("bench.tau2");
  b.tau3_m = c.get_double("bench.tau3");
  b.beta = e.train.loss.beta;
  b.bin_edges = c.get_doubles("bench.bin_edges");
  b.echo = c.entries();
  return e;
}

}  // namespace dpe
