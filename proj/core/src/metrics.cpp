#include "deeppe/metrics.hpp"

#include <algorithm>

#include "deeppe/error.hpp"

namespace dpe {

double registration_recall(const std::vector<PairResult>& results, double tau2_deg,
                           double tau3_m) {
  if (results.empty()) {
    throw Error(ErrorCode::kEmptyInput, "registration recall of an empty result set");
  }
  std::size_t ok = 0;
  for (const auto& r : results) ok += is_success(r, tau2_deg, tau3_m);
  return static_cast<double>(ok) / static_cast<double>(results.size());
}

ErrorMeans success_error_means(const std::vector<PairResult>& results, double tau2_deg,
                               double tau3_m) {
  ErrorMeans m;
  for (const auto& r : results) {
    if (!is_success(r, tau2_deg, tau3_m)) continue;
    ++m.successes;
    m.rre += r.rre;
    m.rte += r.rte;
  }
  if (m.successes > 0) {
    m.rre /= static_cast<double>(m.successes);
    m.rte /= static_cast<double>(m.successes);
  }
  return m;
}

std::optional<double> fsrr(const std::vector<PairResult>& results, double lambda) {
  std::size_t hopeless = 0, rejected = 0;
  for (const auto& r : results) {
    if (r.gt_in_candidates) continue;
    ++hopeless;
    const bool all_below = std::all_of(r.scores.begin(), r.scores.end(),
                                       [&](double s) { return s < lambda; });
    rejected += all_below;
  }
  if (hopeless == 0) return std::nullopt;
  return static_cast<double>(rejected) / static_cast<double>(hopeless);
}

BinReport bin_by_inlier_ratio(const std::map<std::string, std::vector<PairResult>>& results,
                              const std::vector<double>& edges, double tau2_deg,
                              double tau3_m) {
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()) ||
      edges.front() != 0.0 || edges.back() != 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "bin edges must ascend from 0 to 1");
  }
  BinReport report;
  report.edges = edges;
  const std::size_t n_bins = edges.size() - 1;
  for (std::size_t b = 0; b < n_bins; ++b) {
    BinRow row;
    row.lo = edges[b];
    row.hi = edges[b + 1];
    report.bins.push_back(row);
  }
  if (results.empty()) return report;

  const auto& reference = results.begin()->second;
  for (const auto& [name, list] : results) {
    if (list.size() != reference.size()) {
      throw Error(ErrorCode::kShapeMismatch, "evaluator '" + name + "' has a different pair count");
    }
  }
  auto bin_of = [&](double ir) {
    for (std::size_t b = 0; b + 1 < n_bins; ++b) {
      if (ir < edges[b + 1]) return b;
    }
    return n_bins - 1;
  };
  std::vector<std::vector<std::size_t>> members(n_bins);
  for (std::size_t i = 0; i < reference.size(); ++i) {
    members[bin_of(reference[i].inlier_ratio)].push_back(i);
  }
  for (std::size_t b = 0; b < n_bins; ++b) {
    auto& row = report.bins[b];
    row.count = members[b].size();
    if (row.count == 0) continue;
    std::size_t gt = 0;
    for (auto i : members[b]) gt += reference[i].gt_in_candidates;
    row.gt_bound = static_cast<double>(gt) / static_cast<double>(row.count);
    for (const auto& [name, list] : results) {
      std::size_t ok = 0;
      for (auto i : members[b]) ok += is_success(list[i], tau2_deg, tau3_m);
      row.recall[name] = static_cast<double>(ok) / static_cast<double>(row.count);
    }
  }
  return report;
}

}  // namespace dpe
