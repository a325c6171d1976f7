#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "deeppe/geom3d.hpp"

namespace dpe {

/// Outcome of one evaluator on one pair.
struct PairResult {
  std::size_t pair_id = 0;
  RigidTransform chosen;
  double rre = 0.0;  // degrees
  double rte = 0.0;  // meters
  std::vector<double> scores;  // over all candidates; excluded ones are -inf
  bool gt_in_candidates = false;  // some candidate has d(x) < beta
  double inlier_ratio = 0.0;
};

inline bool is_success(const PairResult& r, double tau2_deg, double tau3_m) {
  return r.rre < tau2_deg && r.rte < tau3_m;
}

/// Fraction of results with rre < tau2 and rte < tau3. Throws on empty input.
double registration_recall(const std::vector<PairResult>& results, double tau2_deg,
                           double tau3_m);

struct ErrorMeans {
  std::size_t successes = 0;
  double rre = 0.0;  // mean over successes; 0 when there are none
  double rte = 0.0;
};
ErrorMeans success_error_means(const std::vector<PairResult>& results, double tau2_deg,
                               double tau3_m);

/// Over results without a correct candidate: the fraction whose every scored
/// candidate is below lambda. nullopt when no such pair exists.
std::optional<double> fsrr(const std::vector<PairResult>& results, double lambda);

inline const std::vector<double> kDefaultBinEdges = {0.0, 0.005, 0.01, 0.02, 0.05, 0.1, 1.0};

struct BinRow {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  std::map<std::string, double> recall;  // evaluator -> RR; absent when empty
  std::optional<double> gt_bound;
};

struct BinReport {
  std::vector<double> edges;
  std::vector<BinRow> bins;
};

/// Bins are [lo, hi) except the last, which is closed. Every evaluator's
/// result list must be in the same pair order (inlier ratios from the first).
BinReport bin_by_inlier_ratio(const std::map<std::string, std::vector<PairResult>>& results,
                              const std::vector<double>& edges, double tau2_deg,
                              double tau3_m);

}  // namespace dpe
