#include "deeppe/nn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "deeppe/error.hpp"

namespace dpe::nn {

namespace {

using BackwardFn = std::function<void(Node&)>;

Var make_node(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& in : inputs) {
    n->parents.push_back(in.node());
    if (in.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) n->backward = std::move(fn);
  return Var(std::move(n));
}

Var make_node(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& in : inputs) {
    n->parents.push_back(in.node());
    if (in.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) n->backward = std::move(fn);
  return Var(std::move(n));
}

// Null when the parent does not take gradients.
Tensor* grad_of(const NodePtr& p) {
  return p->requires_grad ? &p->ensure_grad() : nullptr;
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorCode::kShapeMismatch, std::string(op) + ": incompatible shapes " +
                                             a.shape_string() + " and " + b.shape_string());
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error(op, a, b);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  Tensor out(av.rows(), bv.cols());
  out.mat().noalias() = av.mat() * bv.mat();
  const NodePtr pa = a.node(), pb = b.node();
  return make_node(std::move(out), {a, b}, [pa, pb](Node& self) {
    if (Tensor* ga = grad_of(pa)) ga->mat().noalias() += self.grad.mat() * pb->value.mat().transpose();
    if (Tensor* gb = grad_of(pb)) gb->mat().noalias() += pa->value.mat().transpose() * self.grad.mat();
  });
}

Var add(const Var& a, const Var& b) {
  require_same("add", a.value(), b.value());
  Tensor out(a.value().shape());
  out.mat() = a.value().mat() + b.value().mat();
  const NodePtr pa = a.node(), pb = b.node();
  return make_node(std::move(out), {a, b}, [pa, pb](Node& self) {
    if (Tensor* ga = grad_of(pa)) ga->mat() += self.grad.mat();
    if (Tensor* gb = grad_of(pb)) gb->mat() += self.grad.mat();
  });
}

Var sub(const Var& a, const Var& b) {
  require_same("sub", a.value(), b.value());
  Tensor out(a.value().shape());
  out.mat() = a.value().mat() - b.value().mat();
  const NodePtr pa = a.node(), pb = b.node();
  return make_node(std::move(out), {a, b}, [pa, pb](Node& self) {
    if (Tensor* ga = grad_of(pa)) ga->mat() += self.grad.mat();
    if (Tensor* gb = grad_of(pb)) gb->mat() -= self.grad.mat();
  });
}

Var scale(const Var& a, double s) {
  Tensor out(a.value().shape());
  out.mat() = a.value().mat() * s;
  const NodePtr pa = a.node();
  return make_node(std::move(out), {a}, [pa, s](Node& self) {
    if (Tensor* ga = grad_of(pa)) ga->mat() += self.grad.mat() * s;
  });
}

Var add_row(const Var& a, const Var& row) {
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) shape_error("add_row", av, rv);
  Tensor out(av.shape());
  out.mat() = av.mat().rowwise() + rv.mat().row(0);
  const NodePtr pa = a.node(), pr = row.node();
  return make_node(std::move(out), {a, row}, [pa, pr](Node& self) {
    if (Tensor* ga = grad_of(pa)) ga->mat() += self.grad.mat();
    if (Tensor* gr = grad_of(pr)) gr->mat() += self.grad.mat().colwise().sum();
  });
}

Var concat_rows(const Var& a, const Var& b) { return concat_rows(std::vector<Var>{a, b}); }

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "concat_rows of zero tensors");
  }
  const std::size_t cols = parts.front().value().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.value().cols() != cols) shape_error("concat_rows", parts.front().value(), p.value());
    rows += p.value().rows();
  }
  Tensor out(rows, cols);
  std::size_t r = 0;
  std::vector<NodePtr> nodes;
  for (const auto& p : parts) {
    const auto pr = static_cast<Eigen::Index>(p.value().rows());
    out.mat().middleRows(static_cast<Eigen::Index>(r), pr) = p.value().mat();
    r += p.value().rows();
    nodes.push_back(p.node());
  }
  return make_node(std::move(out), parts, [nodes](Node& self) {
    Eigen::Index r0 = 0;
    for (const auto& n : nodes) {
      const auto pr = static_cast<Eigen::Index>(n->value.rows());
      if (Tensor* g = grad_of(n)) g->mat() += self.grad.mat().middleRows(r0, pr);
      r0 += pr;
    }
  });
}

Var gather_rows(const Var& t, const std::vector<std::int64_t>& indices) {
  const Tensor& tv = t.value();
  const std::size_t cols = tv.cols();
  Tensor out(indices.size(), cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto idx = indices[i];
    if (idx == kPadRow) continue;
    if (idx < 0 || static_cast<std::size_t>(idx) >= tv.rows()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "gather_rows: index " + std::to_string(idx) + " out of range for " +
                      tv.shape_string());
    }
    std::copy_n(tv.row_ptr(static_cast<std::size_t>(idx)), cols, out.row_ptr(i));
  }
  const NodePtr pt = t.node();
  return make_node(std::move(out), {t}, [pt, indices, cols](Node& self) {
    Tensor* g = grad_of(pt);
    if (!g) return;
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] == kPadRow) continue;
      const auto row = static_cast<std::size_t>(indices[i]);
      for (std::size_t c = 0; c < cols; ++c) (*g)(row, c) += self.grad(i, c);
    }
  });
}

Var sum(const Var& a) {
  const NodePtr pa = a.node();
  return make_node(Tensor::scalar(a.value().mat().sum()), {a}, [pa](Node& self) {
    if (Tensor* g = grad_of(pa)) g->mat().array() += self.grad.item();
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var row_softmax(const Var& t) {
  const Tensor& tv = t.value();
  Tensor out(tv.shape());
  auto x = tv.mat();
  auto y = out.mat();
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  const NodePtr pt = t.node();
  return make_node(std::move(out), {t}, [pt](Node& self) {
    Tensor* g = grad_of(pt);
    if (!g) return;
    auto yv = self.value.mat();
    auto gy = self.grad.mat();
    for (Eigen::Index r = 0; r < yv.rows(); ++r) {
      const double dot = gy.row(r).dot(yv.row(r));
      g->mat().row(r).array() += yv.row(r).array() * (gy.row(r).array() - dot);
    }
  });
}

Var leaky_relu(const Var& t, double slope) {
  Tensor out(t.value().shape());
  auto x = t.value().data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0 ? x[i] : slope * x[i];
  const NodePtr pt = t.node();
  return make_node(std::move(out), {t}, [pt, slope](Node& self) {
    Tensor* g = grad_of(pt);
    if (!g) return;
    auto xv = pt->value.data();
    auto gy = self.grad.data();
    auto gx = g->data();
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += gy[i] * (xv[i] > 0 ? 1.0 : slope);
  });
}

Var sigmoid(const Var& t) {
  Tensor out(t.value().shape());
  auto x = t.value().data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    // Split by sign so exp never overflows.
    y[i] = x[i] >= 0 ? 1.0 / (1.0 + std::exp(-x[i]))
                     : std::exp(x[i]) / (1.0 + std::exp(x[i]));
  }
  const NodePtr pt = t.node();
  return make_node(std::move(out), {t}, [pt](Node& self) {
    Tensor* g = grad_of(pt);
    if (!g) return;
    auto yv = self.value.data();
    auto gy = self.grad.data();
    auto gx = g->data();
    for (std::size_t i = 0; i < yv.size(); ++i) gx[i] += gy[i] * yv[i] * (1.0 - yv[i]);
  });
}

double dropout_uniform(const DropoutKey& key, std::uint64_t index) {
  std::uint64_t h = splitmix64(key.seed);
  h = splitmix64(h ^ fnv1a(key.layer));
  h = splitmix64(h ^ key.step);
  h = splitmix64(h ^ index);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

Var dropout(const Var& t, double p, bool training, const DropoutKey& key) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "dropout probability must lie in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) return t;
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor mask(t.value().shape());
  auto m = mask.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = dropout_uniform(key, i) >= p ? keep_scale : 0.0;
  }
  Tensor out(t.value().shape());
  out.mat() = t.value().mat().cwiseProduct(mask.mat());
  const NodePtr pt = t.node();
  return make_node(std::move(out), {t}, [pt, mask = std::move(mask)](Node& self) {
    if (Tensor* g = grad_of(pt)) g->mat() += self.grad.mat().cwiseProduct(mask.mat());
  });
}

Var batchnorm1d(const Var& t, const Var& gamma, const Var& beta,
                BatchNormStats stats, bool training, double momentum, double eps) {
  const Tensor& xv = t.value();
  const auto n = static_cast<Eigen::Index>(xv.rows());
  const auto c = static_cast<Eigen::Index>(xv.cols());
  if (gamma.value().rows() != 1 || gamma.value().cols() != xv.cols()) {
    shape_error("batchnorm1d", xv, gamma.value());
  }
  if (beta.value().shape() != gamma.value().shape()) {
    shape_error("batchnorm1d", gamma.value(), beta.value());
  }
  if (!stats.running_mean || !stats.running_var) {
    throw Error(ErrorCode::kInvalidArgument, "batchnorm1d needs running statistics");
  }
  Eigen::RowVectorXd mu, inv_std;
  if (training) {
    if (n < 2) {
      throw Error(ErrorCode::kInvalidArgument,
                  "batchnorm1d in training mode needs at least 2 rows, got " +
                      std::to_string(n));
    }
    mu = xv.mat().colwise().mean();
    const RowMatrix centered = xv.mat().rowwise() - mu;
    const Eigen::RowVectorXd var = centered.array().square().colwise().sum() /
                                   static_cast<double>(n);
    inv_std = (var.array() + eps).rsqrt();
    const Eigen::RowVectorXd unbiased = var * (static_cast<double>(n) / (n - 1));
    auto rm = stats.running_mean->mat();
    auto rv = stats.running_var->mat();
    rm = (1.0 - momentum) * rm + momentum * mu;
    rv = (1.0 - momentum) * rv + momentum * unbiased;
  } else {
    mu = stats.running_mean->mat().row(0);
    inv_std = (stats.running_var->mat().row(0).array() + eps).rsqrt();
  }
  RowMatrix xhat = (xv.mat().rowwise() - mu).array().rowwise() * inv_std.array();
  Tensor out(xv.shape());
  out.mat() = (xhat.array().rowwise() * gamma.value().mat().row(0).array()).rowwise() +
              beta.value().mat().row(0).array();

  const NodePtr px = t.node(), pg = gamma.node(), pb = beta.node();
  return make_node(std::move(out), {t, gamma, beta},
                   [px, pg, pb, xhat = std::move(xhat), inv_std, training, n, c](Node& self) {
    auto gy = self.grad.mat();
    if (Tensor* gg = grad_of(pg)) gg->mat().row(0) += gy.cwiseProduct(xhat).colwise().sum();
    if (Tensor* gb = grad_of(pb)) gb->mat().row(0) += gy.colwise().sum();
    Tensor* gx = grad_of(px);
    if (!gx) return;
    const RowMatrix dxhat = gy.array().rowwise() * pg->value.mat().row(0).array();
    if (!training) {
      gx->mat().array() += dxhat.array().rowwise() * inv_std.array();
      return;
    }
    const Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
    const Eigen::RowVectorXd sum_dx = dxhat.cwiseProduct(xhat).colwise().sum();
    const double nn = static_cast<double>(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index j = 0; j < c; ++j) {
        gx->mat()(r, j) += inv_std(j) / nn *
                           (nn * dxhat(r, j) - sum_d(j) - xhat(r, j) * sum_dx(j));
      }
    }
  });
}

Var maxpool_rows(const Var& t) {
  const Tensor& tv = t.value();
  if (tv.rows() == 0) {
    throw Error(ErrorCode::kShapeMismatch, "maxpool_rows of an empty tensor");
  }
  const std::size_t cols = tv.cols();
  Tensor out(1, cols);
  std::vector<std::size_t> argmax(cols, 0);
  for (std::size_t j = 0; j < cols; ++j) {
    double best = tv(0, j);
    for (std::size_t r = 1; r < tv.rows(); ++r) {
      if (tv(r, j) > best) {
        best = tv(r, j);
        argmax[j] = r;
      }
    }
    out(0, j) = best;
  }
  const NodePtr pt = t.node();
  return make_node(std::move(out), {t}, [pt, argmax = std::move(argmax)](Node& self) {
    Tensor* g = grad_of(pt);
    if (!g) return;
    for (std::size_t j = 0; j < argmax.size(); ++j) (*g)(argmax[j], j) += self.grad(0, j);
  });
}

Var grouped_scores(const Var& q, const Var& kv, std::size_t k, std::size_t heads,
                   double scale_factor) {
  const Tensor& qv = q.value();
  const Tensor& kvv = kv.value();
  const std::size_t n = qv.rows(), d = qv.cols();
  if (heads == 0 || d % heads != 0 || k == 0 || kvv.cols() != d || kvv.rows() != n * k) {
    shape_error("grouped_scores", qv, kvv);
  }
  const std::size_t dh = d / heads;
  Tensor out(n * heads, k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t h = 0; h < heads; ++h) {
      const double* qi = qv.row_ptr(i) + h * dh;
      for (std::size_t j = 0; j < k; ++j) {
        const double* kj = kvv.row_ptr(i * k + j) + h * dh;
        double acc = 0.0;
        for (std::size_t c = 0; c < dh; ++c) acc += qi[c] * kj[c];
        out(i * heads + h, j) = scale_factor * acc;
      }
    }
  }
  const NodePtr pq = q.node(), pk = kv.node();
  return make_node(std::move(out), {q, kv},
                   [pq, pk, n, k, heads, dh, scale_factor](Node& self) {
    Tensor* gq = grad_of(pq);
    Tensor* gk = grad_of(pk);
    const Tensor& qv2 = pq->value;
    const Tensor& kv2 = pk->value;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t h = 0; h < heads; ++h) {
        const double* g_row = self.grad.row_ptr(i * heads + h);
        const std::size_t c0 = h * dh;
        for (std::size_t j = 0; j < k; ++j) {
          const double g = scale_factor * g_row[j];
          if (g == 0.0) continue;
          const std::size_t row = i * k + j;
          if (gq) {
            double* dst = gq->row_ptr(i) + c0;
            const double* src = kv2.row_ptr(row) + c0;
            for (std::size_t c = 0; c < dh; ++c) dst[c] += g * src[c];
          }
          if (gk) {
            double* dst = gk->row_ptr(row) + c0;
            const double* src = qv2.row_ptr(i) + c0;
            for (std::size_t c = 0; c < dh; ++c) dst[c] += g * src[c];
          }
        }
      }
    }
  });
}

Var grouped_mix(const Var& attn, const Var& v, std::size_t k, std::size_t heads) {
  const Tensor& av = attn.value();
  const Tensor& vv = v.value();
  if (heads == 0 || k == 0 || av.cols() != k || av.rows() % heads != 0) {
    shape_error("grouped_mix", av, vv);
  }
  const std::size_t n = av.rows() / heads;
  const std::size_t d = vv.cols();
  if (vv.rows() != n * k || d % heads != 0) shape_error("grouped_mix", av, vv);
  const std::size_t dh = d / heads;
  Tensor out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t j = 0; j < k; ++j) {
        const double a = av(i * heads + h, j);
        const double* vj = vv.row_ptr(i * k + j) + h * dh;
        double* o = out.row_ptr(i) + h * dh;
        for (std::size_t c = 0; c < dh; ++c) o[c] += a * vj[c];
      }
    }
  }
  const NodePtr pa = attn.node(), pv = v.node();
  return make_node(std::move(out), {attn, v}, [pa, pv, n, k, heads, dh](Node& self) {
    Tensor* ga = grad_of(pa);
    Tensor* gv = grad_of(pv);
    const Tensor& a2 = pa->value;
    const Tensor& v2 = pv->value;
    for (std::size_t i = 0; i < n; ++i) {
      const double* g_row = self.grad.row_ptr(i);
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t c0 = h * dh;
        const double* g = g_row + c0;
        for (std::size_t j = 0; j < k; ++j) {
          const std::size_t row = i * k + j;
          if (ga) {
            const double* v = v2.row_ptr(row) + c0;
            double acc = 0.0;
            for (std::size_t c = 0; c < dh; ++c) acc += g[c] * v[c];
            (*ga)(i * heads + h, j) += acc;
          }
          if (gv) {
            const double a = a2(i * heads + h, j);
            if (a == 0.0) continue;
            double* dst = gv->row_ptr(row) + c0;
            for (std::size_t c = 0; c < dh; ++c) dst[c] += a * g[c];
          }
        }
      }
    }
  });
}

Var weighted_bce(const Var& s, const std::vector<double>& y,
                 const std::vector<double>& w_pos, const std::vector<double>& w_neg) {
  const Tensor& sv = s.value();
  const std::size_t n = sv.size();
  if (n == 0 || y.size() != n || w_pos.size() != n || w_neg.size() != n) {
    throw Error(ErrorCode::kShapeMismatch,
                "weighted_bce: " + std::to_string(n) + " scores vs " +
                    std::to_string(y.size()) + " labels");
  }
  constexpr double kLo = 1e-7, kHi = 1.0 - 1e-7;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(sv.data()[i], kLo, kHi);
    total -= w_pos[i] * y[i] * std::log(p) + w_neg[i] * (1.0 - y[i]) * std::log(1.0 - p);
  }
  const NodePtr ps = s.node();
  return make_node(Tensor::scalar(total / static_cast<double>(n)), {s},
                   [ps, y, w_pos, w_neg, n](Node& self) {
    Tensor* g = grad_of(ps);
    if (!g) return;
    const double up = self.grad.item() / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double raw = ps->value.data()[i];
      if (raw < kLo || raw > kHi) continue;
      g->data()[i] -= up * (w_pos[i] * y[i] / raw - w_neg[i] * (1.0 - y[i]) / (1.0 - raw));
    }
  });
}

Var l1_loss(const Var& pred, const Tensor& target) {
  require_same("l1_loss", pred.value(), target);
  const auto n = static_cast<double>(target.size());
  const double value = (pred.value().mat() - target.mat()).cwiseAbs().sum() / n;
  const NodePtr pp = pred.node();
  return make_node(Tensor::scalar(value), {pred}, [pp, target, n](Node& self) {
    Tensor* g = grad_of(pp);
    if (!g) return;
    const double up = self.grad.item() / n;
    auto pv = pp->value.data();
    auto tv = target.data();
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double diff = pv[i] - tv[i];
      g->data()[i] += up * (diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0));
    }
  });
}

}  // namespace dpe::nn
