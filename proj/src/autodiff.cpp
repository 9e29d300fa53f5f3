#include "arcade/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace arcade::ad {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

using EArr = Eigen::Map<Eigen::ArrayXd>;
using ECArr = Eigen::Map<const Eigen::ArrayXd>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ECRow = Eigen::Map<const RowMat>;

ECArr carr(const Tensor& t) { return ECArr(t.data(), t.numel()); }
EArr arr(Tensor& t) { return EArr(t.data(), t.numel()); }

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a.value().shape_str() + " vs " + b.value().shape_str());
}

NodePtr make_node(Tensor value, std::vector<Var> parents, VjpFn vjp) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  bool rg = false;
  for (const auto& p : parents) rg = rg || p.requires_grad();
  n->requires_grad = rg;
  if (rg) {
    n->parents = std::move(parents);
    n->vjp = std::move(vjp);
  }
  return n;
}

}  // namespace

Var Var::constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  n->requires_grad = false;
  return Var(n);
}

Var Var::leaf(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  n->requires_grad = true;
  return Var(n);
}

const Tensor& Var::value() const {
  if (!node_) throw std::logic_error("Var: undefined");
  return node_->value;
}

Tensor& Var::mutable_value() {
  if (!node_) throw std::logic_error("Var: undefined");
  return node_->value;
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

Var make_op(Tensor value, std::vector<Var> parents, VjpFn vjp) {
  return Var(make_node(std::move(value), std::move(parents), std::move(vjp)));
}

// ---------------------------------------------------------------------------
// gradients
// ---------------------------------------------------------------------------

std::vector<Var> gradients(const Var& output, const std::vector<Var>& wrt) {
  if (output.value().numel() != 1)
    throw std::invalid_argument("gradients: output must be scalar");

  std::vector<Var> result(wrt.size());
  auto zero_fill = [&] {
    for (std::size_t i = 0; i < wrt.size(); ++i)
      result[i] = Var::constant(Tensor::zeros(wrt[i].value().shape()));
  };
  if (!output.requires_grad()) {
    zero_fill();
    return result;
  }

  // Collect ancestors of the output that participate in differentiation.
  std::unordered_set<const Node*> reachable;
  std::vector<const Node*> stack{output.node().get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (!reachable.insert(n).second) continue;
    for (const auto& p : n->parents)
      if (p.requires_grad()) stack.push_back(p.node().get());
  }

  std::vector<const Node*> order(reachable.begin(), reachable.end());
  std::sort(order.begin(), order.end(),
            [](const Node* a, const Node* b) { return a->id < b->id; });

  // Restrict the sweep to nodes through which some wrt variable is actually
  // reachable; gradients for side branches are never built. This matters in
  // the gradient-penalty path, where the inner sweep targets only the
  // interpolated input.
  std::unordered_set<const Node*> leads;
  for (const auto& v : wrt)
    if (reachable.count(v.node().get())) leads.insert(v.node().get());
  for (const Node* n : order) {
    if (leads.count(n)) continue;
    for (const auto& p : n->parents)
      if (p.requires_grad() && leads.count(p.node().get())) {
        leads.insert(n);
        break;
      }
  }

  std::unordered_map<const Node*, Var> grad;
  grad[output.node().get()] = Var::constant(Tensor::full(output.value().shape(), 1.0));

  for (auto it_order = order.rbegin(); it_order != order.rend(); ++it_order) {
    const Node* n = *it_order;
    if (!leads.count(n)) continue;
    auto it = grad.find(n);
    if (it == grad.end()) continue;  // no path to output contributed
    const Var g = it->second;
    if (!n->vjp) continue;
    for (std::size_t i = 0; i < n->parents.size(); ++i) {
      const Var& p = n->parents[i];
      if (!p.requires_grad() || !leads.count(p.node().get())) continue;
      Var pg = n->vjp(g, i);
      auto pit = grad.find(p.node().get());
      if (pit == grad.end())
        grad.emplace(p.node().get(), pg);
      else
        pit->second = add(pit->second, pg);
    }
  }

  for (std::size_t i = 0; i < wrt.size(); ++i) {
    auto it = grad.find(wrt[i].node().get());
    result[i] = (it != grad.end())
                    ? it->second
                    : Var::constant(Tensor::zeros(wrt[i].value().shape()));
  }
  return result;
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::uninit(a.value().shape());
  arr(out) = carr(a.value()) + carr(b.value());
  return make_op(std::move(out), {a, b},
                 [](const Var& g, std::size_t) { return g; });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = Tensor::uninit(a.value().shape());
  arr(out) = carr(a.value()) - carr(b.value());
  return make_op(std::move(out), {a, b}, [](const Var& g, std::size_t i) {
    return i == 0 ? g : neg(g);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = Tensor::uninit(a.value().shape());
  arr(out) = carr(a.value()) * carr(b.value());
  return make_op(std::move(out), {a, b}, [a, b](const Var& g, std::size_t i) {
    return i == 0 ? mul(g, b) : mul(g, a);
  });
}

Var div(const Var& a, const Var& b) {
  check_same_shape(a, b, "div");
  Tensor out = Tensor::uninit(a.value().shape());
  arr(out) = carr(a.value()) / carr(b.value());
  return make_op(std::move(out), {a, b}, [a, b](const Var& g, std::size_t i) {
    if (i == 0) return div(g, b);
    return neg(div(mul(g, a), mul(b, b)));
  });
}

Var neg(const Var& a) {
  Tensor out = Tensor::uninit(a.value().shape());
  arr(out) = -carr(a.value());
  return make_op(std::move(out), {a},
                 [](const Var& g, std::size_t) { return neg(g); });
}

Var add_scalar(const Var& a, double c) {
  Tensor out = Tensor::uninit(a.value().shape());
  arr(out) = carr(a.value()) + c;
  return make_op(std::move(out), {a},
                 [](const Var& g, std::size_t) { return g; });
}

Var mul_scalar(const Var& a, double c) {
  Tensor out = Tensor::uninit(a.value().shape());
  arr(out) = carr(a.value()) * c;
  return make_op(std::move(out), {a},
                 [c](const Var& g, std::size_t) { return mul_scalar(g, c); });
}

Var pow_const(const Var& a, double p) {
  Tensor out = Tensor::uninit(a.value().shape());
  arr(out) = carr(a.value()).pow(p);
  return make_op(std::move(out), {a}, [a, p](const Var& g, std::size_t) {
    return mul_scalar(mul(g, pow_const(a, p - 1.0)), p);
  });
}

Var sigmoid(const Var& a) {
  Tensor out = Tensor::uninit(a.value().shape());
  const double* x = a.value().data();
  double* y = out.data();
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    double v = x[i];
    y[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                  : std::exp(v) / (1.0 + std::exp(v));
  }
  return make_op(std::move(out), {a}, [a](const Var& g, std::size_t) {
    Var s = sigmoid(a);
    return mul(g, mul(s, add_scalar(neg(s), 1.0)));
  });
}

Var leaky_relu(const Var& a, double slope) {
  Tensor mask = Tensor::uninit(a.value().shape());
  Tensor out = Tensor::uninit(a.value().shape());
  const double* x = a.value().data();
  double* m = mask.data();
  double* y = out.data();
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    m[i] = x[i] > 0 ? 1.0 : slope;
    y[i] = x[i] * m[i];
  }
  Var mask_c = Var::constant(std::move(mask));
  return make_op(std::move(out), {a}, [mask_c](const Var& g, std::size_t) {
    return mul(g, mask_c);
  });
}

// ---------------------------------------------------------------------------
// reductions / broadcasts
// ---------------------------------------------------------------------------

Var sum(const Var& a) {
  Tensor out = Tensor::scalar(carr(a.value()).sum());
  auto shape = a.value().shape();
  return make_op(std::move(out), {a}, [shape](const Var& g, std::size_t) {
    return bcast_scalar(g, shape);
  });
}

Var mean(const Var& a) {
  return mul_scalar(sum(a), 1.0 / static_cast<double>(a.value().numel()));
}

Var bcast_scalar(const Var& s, std::vector<std::int64_t> shape) {
  if (s.value().numel() != 1)
    throw std::invalid_argument("bcast_scalar: source must be scalar");
  Tensor out = Tensor::full(shape, s.value().item());
  return make_op(std::move(out), {s},
                 [](const Var& g, std::size_t) { return sum(g); });
}

Var sum_rows(const Var& a) {
  const Tensor& v = a.value();
  if (v.rank() != 2) throw std::invalid_argument("sum_rows: rank-2 required");
  const std::int64_t n = v.dim(0), f = v.dim(1);
  Tensor out = Tensor::uninit({n});
  for (std::int64_t i = 0; i < n; ++i) {
    double acc = 0;
    const double* row = v.data() + i * f;
    for (std::int64_t j = 0; j < f; ++j) acc += row[j];
    out[i] = acc;
  }
  return make_op(std::move(out), {a}, [f](const Var& g, std::size_t) {
    return bcast_colvec(g, f);
  });
}

Var sum_cols(const Var& a) {
  const Tensor& v = a.value();
  if (v.rank() != 2) throw std::invalid_argument("sum_cols: rank-2 required");
  const std::int64_t n = v.dim(0), f = v.dim(1);
  Tensor out({f});
  for (std::int64_t i = 0; i < n; ++i) {
    const double* row = v.data() + i * f;
    for (std::int64_t j = 0; j < f; ++j) out[j] += row[j];
  }
  return make_op(std::move(out), {a}, [n](const Var& g, std::size_t) {
    return bcast_rowvec(g, n);
  });
}

Var chan_sum(const Var& a) {
  const Tensor& v = a.value();
  if (v.rank() != 3) throw std::invalid_argument("chan_sum: rank-3 required");
  const std::int64_t n = v.dim(0), c = v.dim(1), l = v.dim(2);
  Tensor out({c});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < c; ++j) {
      const double* p = v.data() + (i * c + j) * l;
      double acc = 0;
      for (std::int64_t t = 0; t < l; ++t) acc += p[t];
      out[j] += acc;
    }
  return make_op(std::move(out), {a}, [n, l](const Var& g, std::size_t) {
    return bcast_chan(g, n, l);
  });
}

Var bcast_colvec(const Var& v, std::int64_t cols) {
  const Tensor& t = v.value();
  if (t.rank() != 1) throw std::invalid_argument("bcast_colvec: rank-1 required");
  const std::int64_t n = t.dim(0);
  Tensor out = Tensor::uninit({n, cols});
  for (std::int64_t i = 0; i < n; ++i)
    std::fill(out.data() + i * cols, out.data() + (i + 1) * cols, t[i]);
  return make_op(std::move(out), {v},
                 [](const Var& g, std::size_t) { return sum_rows(g); });
}

Var bcast_rowvec(const Var& v, std::int64_t rows) {
  const Tensor& t = v.value();
  if (t.rank() != 1) throw std::invalid_argument("bcast_rowvec: rank-1 required");
  const std::int64_t f = t.dim(0);
  Tensor out = Tensor::uninit({rows, f});
  for (std::int64_t i = 0; i < rows; ++i)
    std::copy(t.data(), t.data() + f, out.data() + i * f);
  return make_op(std::move(out), {v},
                 [](const Var& g, std::size_t) { return sum_cols(g); });
}

Var bcast_chan(const Var& v, std::int64_t n, std::int64_t l) {
  const Tensor& t = v.value();
  if (t.rank() != 1) throw std::invalid_argument("bcast_chan: rank-1 required");
  const std::int64_t c = t.dim(0);
  Tensor out = Tensor::uninit({n, c, l});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < c; ++j)
      std::fill(out.data() + (i * c + j) * l, out.data() + (i * c + j + 1) * l, t[j]);
  return make_op(std::move(out), {v},
                 [](const Var& g, std::size_t) { return chan_sum(g); });
}

Var reshape(const Var& a, std::vector<std::int64_t> shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  auto orig = a.value().shape();
  return make_op(std::move(out), {a}, [orig](const Var& g, std::size_t) {
    return reshape(g, orig);
  });
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b, bool ta, bool tb) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2)
    throw std::invalid_argument("matmul: rank-2 required");
  const std::int64_t m = ta ? av.dim(1) : av.dim(0);
  const std::int64_t k = ta ? av.dim(0) : av.dim(1);
  const std::int64_t k2 = tb ? bv.dim(1) : bv.dim(0);
  const std::int64_t n = tb ? bv.dim(0) : bv.dim(1);
  if (k != k2)
    throw std::invalid_argument("matmul: inner dimension mismatch " +
                                av.shape_str() + " x " + bv.shape_str());

  ECRow am(av.data(), av.dim(0), av.dim(1));
  ECRow bm(bv.data(), bv.dim(0), bv.dim(1));
  Tensor out = Tensor::uninit({m, n});
  Eigen::Map<RowMat> om(out.data(), m, n);
  if (!ta && !tb) om.noalias() = am * bm;
  else if (!ta && tb) om.noalias() = am * bm.transpose();
  else if (ta && !tb) om.noalias() = am.transpose() * bm;
  else om.noalias() = am.transpose() * bm.transpose();

  return make_op(std::move(out), {a, b}, [a, b, ta, tb](const Var& g, std::size_t i) {
    if (i == 0)
      return ta ? matmul(b, g, tb, true) : matmul(g, b, false, !tb);
    return tb ? matmul(g, a, true, ta) : matmul(a, g, !ta, false);
  });
}

// ---------------------------------------------------------------------------
// conv1d family (im2col + gemm)
// ---------------------------------------------------------------------------

namespace {

// cols[(ci*K + k), (n*Lout + t)] = x[n, ci, t*S - P + k], zero outside [0, L).
Eigen::MatrixXd im2col(const Tensor& x, int k, int stride, int pad, std::int64_t lout) {
  const std::int64_t n = x.dim(0), ci = x.dim(1), l = x.dim(2);
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(ci * k, n * lout);
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t c = 0; c < ci; ++c) {
      const double* src = x.data() + (b * ci + c) * l;
      for (std::int64_t t = 0; t < lout; ++t) {
        const std::int64_t base = t * stride - pad;
        double* dst = cols.data() + (b * lout + t) * cols.rows() + c * k;
        for (int kk = 0; kk < k; ++kk) {
          const std::int64_t j = base + kk;
          if (j >= 0 && j < l) dst[kk] = src[j];
        }
      }
    }
  return cols;
}

Tensor conv1d_fw(const Tensor& x, const Tensor& w, int stride, int pad,
                 std::int64_t lout) {
  const std::int64_t n = x.dim(0), co = w.dim(0), k = w.dim(2);
  Eigen::MatrixXd cols = im2col(x, static_cast<int>(k), stride, pad, lout);
  ECRow wm(w.data(), co, w.dim(1) * k);
  Eigen::MatrixXd om = wm * cols;  // [Co, N*Lout]
  Tensor out = Tensor::uninit({n, co, lout});
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t c = 0; c < co; ++c)
      for (std::int64_t t = 0; t < lout; ++t)
        out.at(b, c, t) = om(c, b * lout + t);
  return out;
}

Tensor conv_transpose1d_fw(const Tensor& y, const Tensor& w, int stride, int pad,
                           std::int64_t lout) {
  const std::int64_t n = y.dim(0), co = y.dim(1), lin = y.dim(2);
  const std::int64_t ci = w.dim(1), k = w.dim(2);
  Eigen::MatrixXd ym(co, n * lin);
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t c = 0; c < co; ++c)
      for (std::int64_t t = 0; t < lin; ++t)
        ym(c, b * lin + t) = y.at(b, c, t);
  ECRow wm(w.data(), co, ci * k);
  Eigen::MatrixXd cols = wm.transpose() * ym;  // [Ci*K, N*Lin]
  Tensor out({n, ci, lout});
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t c = 0; c < ci; ++c) {
      double* dst = out.data() + (b * ci + c) * lout;
      for (std::int64_t t = 0; t < lin; ++t) {
        const std::int64_t base = t * stride - pad;
        const double* src = cols.data() + (b * lin + t) * cols.rows() + c * k;
        for (std::int64_t kk = 0; kk < k; ++kk) {
          const std::int64_t j = base + kk;
          if (j >= 0 && j < lout) dst[j] += src[kk];
        }
      }
    }
  return out;
}

Tensor conv1d_wgrad_fw(const Tensor& x, const Tensor& g, int stride, int pad, int k) {
  const std::int64_t n = x.dim(0), ci = x.dim(1);
  const std::int64_t co = g.dim(1), lout = g.dim(2);
  Eigen::MatrixXd cols = im2col(x, k, stride, pad, lout);
  Eigen::MatrixXd gm(co, n * lout);
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t c = 0; c < co; ++c)
      for (std::int64_t t = 0; t < lout; ++t)
        gm(c, b * lout + t) = g.at(b, c, t);
  Eigen::MatrixXd wg = gm * cols.transpose();  // [Co, Ci*K]
  Tensor out = Tensor::uninit({co, ci, k});
  for (std::int64_t c = 0; c < co; ++c)
    for (std::int64_t cc = 0; cc < ci; ++cc)
      for (int kk = 0; kk < k; ++kk)
        out.at(c, cc, kk) = wg(c, cc * k + kk);
  return out;
}

}  // namespace

Var conv1d(const Var& x, const Var& w, int stride, int pad, std::int64_t lout) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.rank() != 3 || wv.rank() != 3)
    throw std::invalid_argument("conv1d: rank-3 tensors required");
  if (xv.dim(1) != wv.dim(1))
    throw std::invalid_argument("conv1d: channel mismatch");
  Tensor out = conv1d_fw(xv, wv, stride, pad, lout);
  const std::int64_t lx = xv.dim(2);
  const int k = static_cast<int>(wv.dim(2));
  return make_op(std::move(out), {x, w},
                 [x, w, stride, pad, lx, k](const Var& g, std::size_t i) {
                   if (i == 0) return conv_transpose1d(g, w, stride, pad, lx);
                   return conv1d_wgrad(x, g, stride, pad, k);
                 });
}

Var conv_transpose1d(const Var& y, const Var& w, int stride, int pad,
                     std::int64_t lout) {
  const Tensor& yv = y.value();
  const Tensor& wv = w.value();
  if (yv.rank() != 3 || wv.rank() != 3)
    throw std::invalid_argument("conv_transpose1d: rank-3 tensors required");
  if (yv.dim(1) != wv.dim(0))
    throw std::invalid_argument("conv_transpose1d: channel mismatch");
  Tensor out = conv_transpose1d_fw(yv, wv, stride, pad, lout);
  const std::int64_t ly = yv.dim(2);
  const int k = static_cast<int>(wv.dim(2));
  return make_op(std::move(out), {y, w},
                 [y, w, stride, pad, ly, k](const Var& g, std::size_t i) {
                   if (i == 0) return conv1d(g, w, stride, pad, ly);
                   return conv1d_wgrad(g, y, stride, pad, k);
                 });
}

Var conv1d_wgrad(const Var& x, const Var& g, int stride, int pad, int k) {
  const Tensor& xv = x.value();
  const Tensor& gv = g.value();
  if (xv.rank() != 3 || gv.rank() != 3)
    throw std::invalid_argument("conv1d_wgrad: rank-3 tensors required");
  Tensor out = conv1d_wgrad_fw(xv, gv, stride, pad, k);
  const std::int64_t lx = xv.dim(2);
  const std::int64_t lg = gv.dim(2);
  return make_op(std::move(out), {x, g},
                 [x, g, stride, pad, lx, lg](const Var& gw, std::size_t i) {
                   if (i == 0) return conv_transpose1d(g, gw, stride, pad, lx);
                   return conv1d(x, gw, stride, pad, lg);
                 });
}

}  // namespace arcade::ad
