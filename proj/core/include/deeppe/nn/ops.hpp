#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deeppe/nn/tensor.hpp"

namespace dpe::nn {

/// Row index meaning "emit a zero row" in gather_rows.
inline constexpr std::int64_t kPadRow = -1;

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// a + row, with the 1 x cols row broadcast over every row of a.
Var add_row(const Var& a, const Var& row);
Var concat_rows(const Var& a, const Var& b);
Var concat_rows(const std::vector<Var>& parts);
/// out.row(i) = t.row(indices[i]), or zeros for kPadRow.
Var gather_rows(const Var& t, const std::vector<std::int64_t>& indices);
/// Sum of all entries as a 1x1 tensor.
Var sum(const Var& a);
Var mean(const Var& a);

/// Softmax along each row, with the row max subtracted first.
Var row_softmax(const Var& t);
Var leaky_relu(const Var& t, double slope = 0.01);
Var sigmoid(const Var& t);

/// Dropout mask source: a counter-based hash of (seed, layer name, step,
/// element), so a mask is reproducible from its key alone.
struct DropoutKey {
  std::uint64_t seed = 0;
  std::string layer;
  std::uint64_t step = 0;
};
/// Survivors are scaled by 1/(1-p). Identity when !training or p == 0.
Var dropout(const Var& t, double p, bool training, const DropoutKey& key);
/// Uniform [0,1) draw used by dropout for element `index`.
double dropout_uniform(const DropoutKey& key, std::uint64_t index);

struct BatchNormStats {
  Tensor* running_mean = nullptr;  // 1 x C
  Tensor* running_var = nullptr;   // 1 x C
};
/// Batch normalization over rows. Training mode normalizes with batch
/// statistics (needs >= 2 rows) and updates the running statistics;
/// evaluation mode uses the running statistics.
Var batchnorm1d(const Var& t, const Var& gamma, const Var& beta,
                BatchNormStats stats, bool training, double momentum = 0.1,
                double eps = 1e-5);

/// 1 x C row of column maxima; gradient flows to the first argmax row.
Var maxpool_rows(const Var& t);

/// Per-point, per-head attention logits between q (n x d) and a neighbor
/// block kv (n*k x d): out(i*heads + h, j) = scale * <q_i, kv_{i*k+j}> over
/// the columns of head h.
Var grouped_scores(const Var& q, const Var& kv, std::size_t k,
                   std::size_t heads, double scale);
/// out(i, head-h columns) = sum_j attn(i*heads + h, j) * v_{i*k+j}.
Var grouped_mix(const Var& attn, const Var& v, std::size_t k, std::size_t heads);

/// Mean over rows of -(w_pos*y*log s + w_neg*(1-y)*log(1-s)), with s clamped
/// to [1e-7, 1-1e-7]. s is n x 1; y, w_pos, w_neg have n entries.
Var weighted_bce(const Var& s, const std::vector<double>& y,
                 const std::vector<double>& w_pos,
                 const std::vector<double>& w_neg);
/// Mean absolute error against a constant target of the same shape.
Var l1_loss(const Var& pred, const Tensor& target);

}  // namespace dpe::nn
