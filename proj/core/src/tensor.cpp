#include "stacca/tensor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "stacca/errors.hpp"

namespace stacca::ad {

namespace {

using Buf = std::shared_ptr<std::vector<double>>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

Buf alloc(size_t n) { return std::make_shared<std::vector<double>>(n, 0.0); }

int numel_of(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) n *= d;
  return n;
}

// C (+)= op(A) * op(B), row-major buffers
void gemm(const double* a, int ar, int ac, bool ta, const double* b, int br,
          int bc, bool tb, double* c, bool accumulate) {
  ConstMap A(a, ar, ac), B(b, br, bc);
  const int m = ta ? ac : ar;
  const int n = tb ? br : bc;
  MutMap C(c, m, n);
  if (!ta && !tb) {
    if (accumulate) C.noalias() += A * B; else C.noalias() = A * B;
  } else if (ta && !tb) {
    if (accumulate) C.noalias() += A.transpose() * B; else C.noalias() = A.transpose() * B;
  } else if (!ta && tb) {
    if (accumulate) C.noalias() += A * B.transpose(); else C.noalias() = A * B.transpose();
  } else {
    if (accumulate) C.noalias() += A.transpose() * B.transpose();
    else C.noalias() = A.transpose() * B.transpose();
  }
}

bool is_trailing_of(const std::vector<int>& small, const std::vector<int>& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

}  // namespace

int Tensor::numel() const { return static_cast<int>(data_ ? data_->size() : 0); }

double Tensor::scalar() const {
  if (numel() != 1) throw std::invalid_argument("Tensor::scalar on non-scalar");
  return (*data_)[0];
}

Parameter::Parameter(std::string name_in, std::vector<int> shape_in)
    : name(std::move(name_in)), shape(std::move(shape_in)) {
  const int n = numel_of(shape);
  value.assign(n, 0.0);
  grad.assign(n, 0.0);
  m.assign(n, 0.0);
  v.assign(n, 0.0);
}

void adam_step(Parameter& p, const AdamConfig& cfg, long t) {
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (size_t i = 0; i < p.value.size(); ++i) {
    const double g = p.grad[i];
    p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g;
    p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g * g;
    p.value[i] -= cfg.lr * (p.m[i] / c1) / (std::sqrt(p.v[i] / c2) + cfg.eps);
  }
}

void Tape::check_finite(const std::vector<double>& data, const char* op) const {
  for (double x : data) {
    if (!std::isfinite(x))
      throw numeric_error(std::string("non-finite value produced by ") + op);
  }
}

int Tape::push_node(int numel, std::function<void(Tape&)> fn) {
  nodes_.push_back({std::move(fn), numel});
  return static_cast<int>(nodes_.size()) - 1;
}

double* Tape::grad_buffer(int node, int numel) {
  auto& g = grads_[static_cast<size_t>(node)];
  if (g.empty()) g.assign(static_cast<size_t>(numel), 0.0);
  return g.data();
}

const std::vector<double>* Tape::grad_read(int node) const {
  if (node < 0) return nullptr;
  const auto& g = grads_[static_cast<size_t>(node)];
  return g.empty() ? nullptr : &g;
}

Tensor Tape::constant(std::vector<int> shape, std::vector<double> data) {
  if (numel_of(shape) != static_cast<int>(data.size()))
    throw std::invalid_argument("constant: shape does not match data length");
  auto buf = std::make_shared<std::vector<double>>(std::move(data));
  check_finite(*buf, "constant");
  return Tensor(std::move(buf), std::move(shape), -1);
}

Tensor Tape::zeros(std::vector<int> shape) {
  auto buf = alloc(static_cast<size_t>(numel_of(shape)));
  return Tensor(std::move(buf), std::move(shape), -1);
}

Tensor Tape::full(std::vector<int> shape, double value) {
  auto buf = std::make_shared<std::vector<double>>(
      static_cast<size_t>(numel_of(shape)), value);
  check_finite(*buf, "full");
  return Tensor(std::move(buf), std::move(shape), -1);
}

Tensor Tape::watch(Parameter& p) {
  auto it = watch_ids_.find(&p);
  if (it != watch_ids_.end()) {
    auto buf = std::make_shared<std::vector<double>>(p.value);
    // reuse the existing node so gradients accumulate to one place
    return Tensor(std::move(buf), p.shape, it->second);
  }
  auto buf = std::make_shared<std::vector<double>>(p.value);
  check_finite(*buf, "watch");
  if (!recording_) return Tensor(std::move(buf), p.shape, -1);
  int id = push_node(p.numel(), nullptr);
  watch_ids_.emplace(&p, id);
  watched_.emplace_back(&p, id);
  return Tensor(std::move(buf), p.shape, id);
}

// ---------------------------------------------------------------------------
// linear algebra

Tensor Tape::matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw std::invalid_argument("matmul: expects rank-2 tensors");
  const int ar = a.dim(0), ac = a.dim(1), br = b.dim(0), bc = b.dim(1);
  const int m = trans_a ? ac : ar, k = trans_a ? ar : ac;
  const int kb = trans_b ? bc : br, n = trans_b ? br : bc;
  if (k != kb) throw std::invalid_argument("matmul: inner dimensions disagree");

  auto out = alloc(static_cast<size_t>(m) * n);
  gemm(a.data().data(), ar, ac, trans_a, b.data().data(), br, bc, trans_b,
       out->data(), false);
  check_finite(*out, "matmul");

  const bool needs = recording_ && (a.node_ >= 0 || b.node_ >= 0);
  if (!needs) return Tensor(std::move(out), {m, n}, -1);

  const int id = static_cast<int>(nodes_.size());
  auto abuf = a.data_; auto bbuf = b.data_;
  const int anode = a.node_, bnode = b.node_;
  auto fn = [=](Tape& t) {
    const auto* g = t.grad_read(id);
    if (!g) return;
    if (anode >= 0) {
      double* da = t.grad_buffer(anode, ar * ac);
      if (!trans_a)  // dA = G * op(B)^T
        gemm(g->data(), m, n, false, bbuf->data(), br, bc, !trans_b, da, true);
      else  // dA = op(B) * G^T
        gemm(bbuf->data(), br, bc, trans_b, g->data(), m, n, true, da, true);
    }
    if (bnode >= 0) {
      double* db = t.grad_buffer(bnode, br * bc);
      if (!trans_b)  // dB = op(A)^T * G
        gemm(abuf->data(), ar, ac, !trans_a, g->data(), m, n, false, db, true);
      else  // dB = G^T * op(A)
        gemm(g->data(), m, n, true, abuf->data(), ar, ac, trans_a, db, true);
    }
  };
  push_node(m * n, std::move(fn));
  return Tensor(std::move(out), {m, n}, id);
}

Tensor Tape::bmm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  if (a.rank() != 3 || b.rank() != 3)
    throw std::invalid_argument("bmm: expects rank-3 tensors");
  if (a.dim(0) != b.dim(0)) throw std::invalid_argument("bmm: batch sizes disagree");
  const int batches = a.dim(0);
  const int ar = a.dim(1), ac = a.dim(2), br = b.dim(1), bc = b.dim(2);
  const int m = trans_a ? ac : ar, k = trans_a ? ar : ac;
  const int kb = trans_b ? bc : br, n = trans_b ? br : bc;
  if (k != kb) throw std::invalid_argument("bmm: inner dimensions disagree");

  auto out = alloc(static_cast<size_t>(batches) * m * n);
  for (int s = 0; s < batches; ++s)
    gemm(a.data().data() + static_cast<size_t>(s) * ar * ac, ar, ac, trans_a,
         b.data().data() + static_cast<size_t>(s) * br * bc, br, bc, trans_b,
         out->data() + static_cast<size_t>(s) * m * n, false);
  check_finite(*out, "bmm");

  const bool needs = recording_ && (a.node_ >= 0 || b.node_ >= 0);
  if (!needs) return Tensor(std::move(out), {batches, m, n}, -1);

  const int id = static_cast<int>(nodes_.size());
  auto abuf = a.data_; auto bbuf = b.data_;
  const int anode = a.node_, bnode = b.node_;
  auto fn = [=](Tape& t) {
    const auto* g = t.grad_read(id);
    if (!g) return;
    for (int s = 0; s < batches; ++s) {
      const double* gs = g->data() + static_cast<size_t>(s) * m * n;
      const double* as = abuf->data() + static_cast<size_t>(s) * ar * ac;
      const double* bs = bbuf->data() + static_cast<size_t>(s) * br * bc;
      if (anode >= 0) {
        double* da = t.grad_buffer(anode, batches * ar * ac) +
                     static_cast<size_t>(s) * ar * ac;
        if (!trans_a) gemm(gs, m, n, false, bs, br, bc, !trans_b, da, true);
        else gemm(bs, br, bc, trans_b, gs, m, n, true, da, true);
      }
      if (bnode >= 0) {
        double* db = t.grad_buffer(bnode, batches * br * bc) +
                     static_cast<size_t>(s) * br * bc;
        if (!trans_b) gemm(as, ar, ac, !trans_a, gs, m, n, false, db, true);
        else gemm(gs, m, n, true, as, ar, ac, trans_a, db, true);
      }
    }
  };
  push_node(batches * m * n, std::move(fn));
  return Tensor(std::move(out), {batches, m, n}, id);
}

// ---------------------------------------------------------------------------
// elementwise

Tensor Tape::binary_op(const Tensor& a, const Tensor& b, const char* op,
                       double (*fwd)(double, double),
                       void (*bwd)(double, double, double, double&, double&)) {
  const auto& big = a.numel() >= b.numel() ? a : b;
  const auto& small = a.numel() >= b.numel() ? b : a;
  if (small.numel() != 1 && !is_trailing_of(small.shape(), big.shape()))
    throw std::invalid_argument(std::string(op) + ": shapes not broadcastable");
  if (big.numel() % std::max(small.numel(), 1) != 0)
    throw std::invalid_argument(std::string(op) + ": shapes not broadcastable");

  const int on = big.numel(), an = a.numel(), bn = b.numel();
  auto out = alloc(static_cast<size_t>(on));
  const auto& av = a.data();
  const auto& bv = b.data();
  for (int i = 0; i < on; ++i)
    (*out)[i] = fwd(av[i % an], bv[i % bn]);
  check_finite(*out, op);

  const bool needs = recording_ && (a.node_ >= 0 || b.node_ >= 0);
  if (!needs) return Tensor(std::move(out), big.shape(), -1);

  const int id = static_cast<int>(nodes_.size());
  auto abuf = a.data_; auto bbuf = b.data_;
  const int anode = a.node_, bnode = b.node_;
  auto fn = [=](Tape& t) {
    const auto* g = t.grad_read(id);
    if (!g) return;
    double* da = anode >= 0 ? t.grad_buffer(anode, an) : nullptr;
    double* db = bnode >= 0 ? t.grad_buffer(bnode, bn) : nullptr;
    for (int i = 0; i < on; ++i) {
      double ga = 0.0, gb = 0.0;
      bwd((*abuf)[i % an], (*bbuf)[i % bn], (*g)[i], ga, gb);
      if (da) da[i % an] += ga;
      if (db) db[i % bn] += gb;
    }
  };
  push_node(on, std::move(fn));
  return Tensor(std::move(out), big.shape(), id);
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "add", [](double x, double y) { return x + y; },
                   [](double, double, double g, double& da, double& db) {
                     da = g; db = g;
                   });
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "sub", [](double x, double y) { return x - y; },
                   [](double, double, double g, double& da, double& db) {
                     da = g; db = -g;
                   });
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "mul", [](double x, double y) { return x * y; },
                   [](double x, double y, double g, double& da, double& db) {
                     da = g * y; db = g * x;
                   });
}

Tensor Tape::minimum(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "minimum",
                   [](double x, double y) { return x <= y ? x : y; },
                   [](double x, double y, double g, double& da, double& db) {
                     if (x <= y) da = g; else db = g;
                   });
}

#define STACCA_UNARY_OP(opname, fwd_expr, bwd_expr)                            \
  {                                                                            \
    const int n = a.numel();                                                   \
    auto out = alloc(static_cast<size_t>(n));                                  \
    const auto& av = a.data();                                                 \
    for (int i = 0; i < n; ++i) {                                              \
      const double x = av[i];                                                  \
      (*out)[i] = (fwd_expr);                                                  \
    }                                                                          \
    check_finite(*out, opname);                                                \
    const bool needs = recording_ && a.node_ >= 0;                             \
    if (!needs) return Tensor(std::move(out), a.shape(), -1);                  \
    const int id = static_cast<int>(nodes_.size());                            \
    auto abuf = a.data_;                                                       \
    auto obuf = out;                                                           \
    const int anode = a.node_;                                                 \
    auto fn = [=](Tape& t) {                                                   \
      const auto* g = t.grad_read(id);                                         \
      if (!g) return;                                                          \
      double* da = t.grad_buffer(anode, n);                                    \
      for (int i = 0; i < n; ++i) {                                            \
        const double x = (*abuf)[i];                                           \
        const double y = (*obuf)[i];                                           \
        (void)x; (void)y;                                                      \
        da[i] += (*g)[i] * (bwd_expr);                                         \
      }                                                                        \
    };                                                                         \
    push_node(n, std::move(fn));                                               \
    return Tensor(std::move(out), a.shape(), id);                              \
  }

Tensor Tape::scale(const Tensor& a, double c) {
  STACCA_UNARY_OP("scale", x * c, c)
}

Tensor Tape::add_scalar(const Tensor& a, double c) {
  STACCA_UNARY_OP("add_scalar", x + c, 1.0)
}

Tensor Tape::exp(const Tensor& a) {
  STACCA_UNARY_OP("exp", std::exp(x), y)
}

Tensor Tape::log(const Tensor& a) {
  for (double x : a.data())
    if (x <= 0.0) throw numeric_error("log: non-positive input");
  STACCA_UNARY_OP("log", std::log(x), 1.0 / x)
}

Tensor Tape::tanh(const Tensor& a) {
  STACCA_UNARY_OP("tanh", std::tanh(x), 1.0 - y * y)
}

Tensor Tape::leaky_relu(const Tensor& a, double slope) {
  STACCA_UNARY_OP("leaky_relu", x >= 0.0 ? x : slope * x, x >= 0.0 ? 1.0 : slope)
}

Tensor Tape::elu(const Tensor& a) {
  STACCA_UNARY_OP("elu", x > 0.0 ? x : std::expm1(x), x > 0.0 ? 1.0 : y + 1.0)
}

Tensor Tape::clip(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("clip: lo > hi");
  STACCA_UNARY_OP("clip", std::min(std::max(x, lo), hi),
                  (x > lo && x < hi) ? 1.0 : 0.0)
}

Tensor Tape::huber(const Tensor& a, double delta) {
  if (delta <= 0.0) throw std::invalid_argument("huber: delta must be positive");
  STACCA_UNARY_OP("huber",
                  std::abs(x) <= delta ? 0.5 * x * x
                                       : delta * (std::abs(x) - 0.5 * delta),
                  std::min(std::max(x, -delta), delta))
}

#undef STACCA_UNARY_OP

// ---------------------------------------------------------------------------
// row ops (rows = last axis)

Tensor Tape::softmax_rows(const Tensor& x, const Tensor* mask) {
  if (x.rank() < 1) throw std::invalid_argument("softmax_rows: rank-0 input");
  const int cols = x.shape().back();
  const int rows = x.numel() / cols;
  const int mask_n = mask ? mask->numel() : 0;
  if (mask) {
    if (!is_trailing_of(mask->shape(), x.shape()) || x.numel() % mask_n != 0 ||
        mask_n % cols != 0)
      throw std::invalid_argument("softmax_rows: mask shape mismatch");
  }
  const double* mv = mask ? mask->data().data() : nullptr;
  auto kept = [&](int flat) { return !mv || mv[flat % mask_n] != 0.0; };

  auto out = alloc(static_cast<size_t>(x.numel()));
  const auto& xv = x.data();
  for (int r = 0; r < rows; ++r) {
    const int base = r * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < cols; ++j)
      if (kept(base + j)) mx = std::max(mx, xv[base + j]);
    if (!std::isfinite(mx))
      throw std::invalid_argument("softmax_rows: fully masked row");
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) {
      if (kept(base + j)) {
        const double e = std::exp(xv[base + j] - mx);
        (*out)[base + j] = e;
        sum += e;
      }
    }
    for (int j = 0; j < cols; ++j)
      if (kept(base + j)) (*out)[base + j] /= sum;
  }
  check_finite(*out, "softmax_rows");

  const bool needs = recording_ && x.node_ >= 0;
  if (!needs) return Tensor(std::move(out), x.shape(), -1);

  const int id = static_cast<int>(nodes_.size());
  auto obuf = out;
  auto mbuf = mask ? mask->data_ : nullptr;
  const int xnode = x.node_;
  const int n = x.numel();
  auto fn = [=](Tape& t) {
    const auto* g = t.grad_read(id);
    if (!g) return;
    double* dx = t.grad_buffer(xnode, n);
    const double* mp = mbuf ? mbuf->data() : nullptr;
    for (int r = 0; r < rows; ++r) {
      const int base = r * cols;
      double dot = 0.0;
      for (int j = 0; j < cols; ++j) dot += (*g)[base + j] * (*obuf)[base + j];
      for (int j = 0; j < cols; ++j) {
        if (mp && mp[(base + j) % mask_n] == 0.0) continue;
        dx[base + j] += (*obuf)[base + j] * ((*g)[base + j] - dot);
      }
    }
  };
  push_node(n, std::move(fn));
  return Tensor(std::move(out), x.shape(), id);
}

Tensor Tape::log_softmax_rows(const Tensor& x) {
  if (x.rank() < 1) throw std::invalid_argument("log_softmax_rows: rank-0 input");
  const int cols = x.shape().back();
  const int rows = x.numel() / cols;
  auto out = alloc(static_cast<size_t>(x.numel()));
  const auto& xv = x.data();
  for (int r = 0; r < rows; ++r) {
    const int base = r * cols;
    double mx = xv[base];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, xv[base + j]);
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) sum += std::exp(xv[base + j] - mx);
    const double lse = mx + std::log(sum);
    for (int j = 0; j < cols; ++j) (*out)[base + j] = xv[base + j] - lse;
  }
  check_finite(*out, "log_softmax_rows");

  const bool needs = recording_ && x.node_ >= 0;
  if (!needs) return Tensor(std::move(out), x.shape(), -1);

  const int id = static_cast<int>(nodes_.size());
  auto obuf = out;
  const int xnode = x.node_;
  const int n = x.numel();
  auto fn = [=](Tape& t) {
    const auto* g = t.grad_read(id);
    if (!g) return;
    double* dx = t.grad_buffer(xnode, n);
    for (int r = 0; r < rows; ++r) {
      const int base = r * cols;
      double gsum = 0.0;
      for (int j = 0; j < cols; ++j) gsum += (*g)[base + j];
      for (int j = 0; j < cols; ++j)
        dx[base + j] += (*g)[base + j] - std::exp((*obuf)[base + j]) * gsum;
    }
  };
  push_node(n, std::move(fn));
  return Tensor(std::move(out), x.shape(), id);
}

Tensor Tape::standardize_rows(const Tensor& x, double eps) {
  if (x.rank() < 1) throw std::invalid_argument("standardize_rows: rank-0 input");
  const int cols = x.shape().back();
  const int rows = x.numel() / cols;
  auto out = alloc(static_cast<size_t>(x.numel()));
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  const auto& xv = x.data();
  for (int r = 0; r < rows; ++r) {
    const int base = r * cols;
    double mean = 0.0;
    for (int j = 0; j < cols; ++j) mean += xv[base + j];
    mean /= cols;
    double var = 0.0;
    for (int j = 0; j < cols; ++j) {
      const double d = xv[base + j] - mean;
      var += d * d;
    }
    var /= cols;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (int j = 0; j < cols; ++j) (*out)[base + j] = (xv[base + j] - mean) * is;
  }
  check_finite(*out, "standardize_rows");

  const bool needs = recording_ && x.node_ >= 0;
  if (!needs) return Tensor(std::move(out), x.shape(), -1);

  const int id = static_cast<int>(nodes_.size());
  auto obuf = out;
  const int xnode = x.node_;
  const int n = x.numel();
  auto fn = [=](Tape& t) {
    const auto* g = t.grad_read(id);
    if (!g) return;
    double* dx = t.grad_buffer(xnode, n);
    for (int r = 0; r < rows; ++r) {
      const int base = r * cols;
      double gmean = 0.0, gymean = 0.0;
      for (int j = 0; j < cols; ++j) {
        gmean += (*g)[base + j];
        gymean += (*g)[base + j] * (*obuf)[base + j];
      }
      gmean /= cols;
      gymean /= cols;
      for (int j = 0; j < cols; ++j)
        dx[base + j] += ((*g)[base + j] - gmean - (*obuf)[base + j] * gymean) *
                        (*inv_std)[r];
    }
  };
  push_node(n, std::move(fn));
  return Tensor(std::move(out), x.shape(), id);
}

Tensor Tape::pairwise_sum(const Tensor& u, const Tensor& v) {
  if (u.rank() != 2 || v.rank() != 2 || u.shape() != v.shape())
    throw std::invalid_argument("pairwise_sum: expects equal rank-2 tensors");
  const int batches = u.dim(0), n = u.dim(1);
  auto out = alloc(static_cast<size_t>(batches) * n * n);
  const auto& uv = u.data();
  const auto& vv = v.data();
  for (int s = 0; s < batches; ++s)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        (*out)[(static_cast<size_t>(s) * n + i) * n + j] = uv[s * n + i] + vv[s * n + j];
  check_finite(*out, "pairwise_sum");

  const bool needs = recording_ && (u.node_ >= 0 || v.node_ >= 0);
  if (!needs) return Tensor(std::move(out), {batches, n, n}, -1);

  const int id = static_cast<int>(nodes_.size());
  const int unode = u.node_, vnode = v.node_;
  auto fn = [=](Tape& t) {
    const auto* g = t.grad_read(id);
    if (!g) return;
    double* du = unode >= 0 ? t.grad_buffer(unode, batches * n) : nullptr;
    double* dv = vnode >= 0 ? t.grad_buffer(vnode, batches * n) : nullptr;
    for (int s = 0; s < batches; ++s)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double gg = (*g)[(static_cast<size_t>(s) * n + i) * n + j];
          if (du) du[s * n + i] += gg;
          if (dv) dv[s * n + j] += gg;
        }
  };
  push_node(batches * n * n, std::move(fn));
  return Tensor(std::move(out), {batches, n, n}, id);
}

// ---------------------------------------------------------------------------
// reductions / indexing / shape

Tensor Tape::sum_axis(const Tensor& x, int axis) {
  if (x.rank() != 2) throw std::invalid_argument("sum_axis: expects rank-2");
  if (axis != 0 && axis != 1) throw std::invalid_argument("sum_axis: bad axis");
  const int r = x.dim(0), c = x.dim(1);
  const int out_n = axis == 0 ? c : r;
  auto out = alloc(static_cast<size_t>(out_n));
  const auto& xv = x.data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      (*out)[axis == 0 ? j : i] += xv[i * c + j];
  check_finite(*out, "sum_axis");

  const bool needs = recording_ && x.node_ >= 0;
  if (!needs) return Tensor(std::move(out), {out_n}, -1);
  const int id = static_cast<int>(nodes_.size());
  const int xnode = x.node_;
  auto fn = [=](Tape& t) {
    const auto* g = t.grad_read(id);
    if (!g) return;
    double* dx = t.grad_buffer(xnode, r * c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) dx[i * c + j] += (*g)[axis == 0 ? j : i];
  };
  push_node(out_n, std::move(fn));
  return Tensor(std::move(out), {out_n}, id);
}

Tensor Tape::mean_axis(const Tensor& x, int axis) {
  const double len = axis == 0 ? x.dim(0) : x.dim(1);
  return scale(sum_axis(x, axis), 1.0 / len);
}

Tensor Tape::max_axis(const Tensor& x, int axis) {
  if (x.rank() != 2) throw std::invalid_argument("max_axis: expects rank-2");
  if (axis != 0 && axis != 1) throw std::invalid_argument("max_axis: bad axis");
  const int r = x.dim(0), c = x.dim(1);
  const int out_n = axis == 0 ? c : r;
  auto out = alloc(static_cast<size_t>(out_n));
  auto argmax = std::make_shared<std::vector<int>>(out_n, -1);
  const auto& xv = x.data();
  for (int o = 0; o < out_n; ++o) {
    const int len = axis == 0 ? r : c;
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < len; ++k) {
      const int flat = axis == 0 ? k * c + o : o * c + k;
      if (xv[flat] > best) {
        best = xv[flat];
        (*argmax)[o] = flat;
      }
    }
    (*out)[o] = best;
  }
  check_finite(*out, "max_axis");

  const bool needs = recording_ && x.node_ >= 0;
  if (!needs) return Tensor(std::move(out), {out_n}, -1);
  const int id = static_cast<int>(nodes_.size());
  const int xnode = x.node_;
  auto fn = [=](Tape& t) {
    const auto* g = t.grad_read(id);
    if (!g) return;
    double* dx = t.grad_buffer(xnode, r * c);
    for (int o = 0; o < out_n; ++o) dx[(*argmax)[o]] += (*g)[o];
  };
  push_node(out_n, std::move(fn));
  return Tensor(std::move(out), {out_n}, id);
}

Tensor Tape::sum_all(const Tensor& x) {
  const int n = x.numel();
  auto out = alloc(1);
  const auto& xv = x.data();
  for (int i = 0; i < n; ++i) (*out)[0] += xv[i];
  check_finite(*out, "sum_all");

  const bool needs = recording_ && x.node_ >= 0;
  if (!needs) return Tensor(std::move(out), {1}, -1);
  const int id = static_cast<int>(nodes_.size());
  const int xnode = x.node_;
  auto fn = [=](Tape& t) {
    const auto* g = t.grad_read(id);
    if (!g) return;
    double* dx = t.grad_buffer(xnode, n);
    for (int i = 0; i < n; ++i) dx[i] += (*g)[0];
  };
  push_node(1, std::move(fn));
  return Tensor(std::move(out), {1}, id);
}

Tensor Tape::mean_all(const Tensor& x) {
  return scale(sum_all(x), 1.0 / x.numel());
}

Tensor Tape::gather_rows(const Tensor& x, std::vector<int> indices) {
  if (x.rank() != 2) throw std::invalid_argument("gather_rows: expects rank-2");
  const int r = x.dim(0), c = x.dim(1);
  for (int i : indices)
    if (i < 0 || i >= r) throw std::invalid_argument("gather_rows: index out of range");
  const int k = static_cast<int>(indices.size());
  auto out = alloc(static_cast<size_t>(k) * c);
  const auto& xv = x.data();
  for (int i = 0; i < k; ++i)
    std::copy_n(xv.data() + static_cast<size_t>(indices[i]) * c, c,
                out->data() + static_cast<size_t>(i) * c);

  const bool needs = recording_ && x.node_ >= 0;
  if (!needs) return Tensor(std::move(out), {k, c}, -1);
  const int id = static_cast<int>(nodes_.size());
  const int xnode = x.node_;
  auto idx = std::make_shared<std::vector<int>>(std::move(indices));
  auto fn = [=](Tape& t) {
    const auto* g = t.grad_read(id);
    if (!g) return;
    double* dx = t.grad_buffer(xnode, r * c);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < c; ++j)
        dx[(*idx)[i] * c + j] += (*g)[i * c + j];
  };
  push_node(k * c, std::move(fn));
  return Tensor(std::move(out), {k, c}, id);
}

Tensor Tape::concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const int rank = parts[0].rank();
  if (axis < 0 || axis >= rank) throw std::invalid_argument("concat: bad axis");
  std::vector<int> shape = parts[0].shape();
  int axis_total = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank) throw std::invalid_argument("concat: rank mismatch");
    for (int d = 0; d < rank; ++d)
      if (d != axis && p.dim(d) != shape[static_cast<size_t>(d)])
        throw std::invalid_argument("concat: dimension mismatch");
    axis_total += p.dim(axis);
  }
  shape[static_cast<size_t>(axis)] = axis_total;

  int outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= shape[static_cast<size_t>(d)];
  for (int d = axis + 1; d < rank; ++d) inner *= shape[static_cast<size_t>(d)];

  auto out = alloc(static_cast<size_t>(outer) * axis_total * inner);
  int offset = 0;
  for (const auto& p : parts) {
    const int len = p.dim(axis);
    for (int o = 0; o < outer; ++o)
      std::copy_n(p.data().data() + static_cast<size_t>(o) * len * inner,
                  static_cast<size_t>(len) * inner,
                  out->data() +
                      (static_cast<size_t>(o) * axis_total + offset) * inner);
    offset += len;
  }

  bool any = false;
  for (const auto& p : parts) any = any || p.node_ >= 0;
  const bool needs = recording_ && any;
  if (!needs) return Tensor(std::move(out), std::move(shape), -1);

  const int id = static_cast<int>(nodes_.size());
  struct Piece { int node; int len; int numel; };
  auto pieces = std::make_shared<std::vector<Piece>>();
  for (const auto& p : parts)
    pieces->push_back({p.node_, p.dim(axis), p.numel()});
  auto fn = [=](Tape& t) {
    const auto* g = t.grad_read(id);
    if (!g) return;
    int off = 0;
    for (const auto& piece : *pieces) {
      if (piece.node >= 0) {
        double* dp = t.grad_buffer(piece.node, piece.numel);
        for (int o = 0; o < outer; ++o)
          for (int i = 0; i < piece.len * inner; ++i)
            dp[o * piece.len * inner + i] +=
                (*g)[(static_cast<size_t>(o) * axis_total + off) * inner + i];
      }
      off += piece.len;
    }
  };
  push_node(outer * axis_total * inner, std::move(fn));
  return Tensor(std::move(out), std::move(shape), id);
}

Tensor Tape::reshape(const Tensor& x, std::vector<int> shape) {
  if (numel_of(shape) != x.numel())
    throw std::invalid_argument("reshape: element count mismatch");
  const bool needs = recording_ && x.node_ >= 0;
  if (!needs) return Tensor(x.data_, std::move(shape), -1);
  const int id = static_cast<int>(nodes_.size());
  const int xnode = x.node_;
  const int n = x.numel();
  auto fn = [=](Tape& t) {
    const auto* g = t.grad_read(id);
    if (!g) return;
    double* dx = t.grad_buffer(xnode, n);
    for (int i = 0; i < n; ++i) dx[i] += (*g)[i];
  };
  push_node(n, std::move(fn));
  return Tensor(x.data_, std::move(shape), id);
}

// ---------------------------------------------------------------------------

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar");
  if (!recording_)
    throw std::invalid_argument("backward: tape is not recording");
  grads_.assign(nodes_.size(), {});
  ran_backward_ = true;
  if (loss.node_ < 0) return;  // constant loss: all gradients zero
  grads_[static_cast<size_t>(loss.node_)] = {1.0};
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    if (nodes_[static_cast<size_t>(i)].backward_fn &&
        !grads_[static_cast<size_t>(i)].empty())
      nodes_[static_cast<size_t>(i)].backward_fn(*this);
  }
  for (auto& [param, node] : watched_) {
    const auto& g = grads_[static_cast<size_t>(node)];
    if (g.empty()) continue;
    for (size_t i = 0; i < g.size(); ++i) param->grad[i] += g[i];
  }
}

std::vector<double> Tape::grad_of(const Tensor& t) const {
  if (!ran_backward_)
    throw std::logic_error("grad_of: backward has not run");
  if (t.node_ < 0 || grads_[static_cast<size_t>(t.node_)].empty())
    return std::vector<double>(static_cast<size_t>(t.numel()), 0.0);
  return grads_[static_cast<size_t>(t.node_)];
}

}  // namespace stacca::ad
