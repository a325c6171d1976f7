#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "deeppe/bench_runner.hpp"
#include "deeppe/dataset.hpp"
#include "deeppe/model.hpp"
#include "deeppe/train.hpp"

namespace dpe {

/// Flat key/value run configuration. Every key has a built-in default;
/// a YAML file (nested maps flatten to dotted keys) overrides defaults and
/// set() overrides both. Unknown keys are rejected with kConfig.
class Config {
 public:
  Config();

  void load_file(const std::filesystem::path& path);
  void load_string(const std::string& yaml, const std::string& origin = "<string>");
  void set(const std::string& key, const std::string& value);
  /// "key=value".
  void set_assignment(const std::string& assignment);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::size_t get_size(const std::string& key) const { return get_u64(key); }
  bool get_bool(const std::string& key) const;
  /// Comma-separated list.
  std::vector<std::string> get_list(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const noexcept { return values_; }
  /// The same flattened YAML that load_string accepts.
  std::string to_yaml() const;

  /// Documented keys with their defaults, in display order.
  static const std::vector<std::pair<std::string, std::string>>& defaults();

 private:
  std::map<std::string, std::string> values_;
};

/// Typed view of a Config shared by the CLI and the acceptance suite.
struct Experiment {
  std::uint64_t seed = 1;
  ModelConfig model;
  PyramidConfig pyramid;
  PaaConfig paa;
  TrainConfig train;
  DatasetConfig dataset;
  std::size_t train_pairs = 0;
  BenchConfig bench;
};

Experiment make_experiment(const Config& cfg);

/// Seeds of the training pairs; disjoint from the benchmark's pair seeds.
std::vector<std::uint64_t> training_seeds(std::uint64_t master, std::size_t count);

}  // namespace dpe
