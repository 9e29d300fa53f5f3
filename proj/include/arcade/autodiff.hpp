// Eager reverse-mode automatic differentiation.
//
// Every operation evaluates immediately and records its inputs plus a
// vector-Jacobian product. VJPs are themselves built from these same
// operations, so the output of gradients() is an ordinary graph node that
// can be differentiated again. The critic's gradient penalty relies on
// that: it needs d/dpsi of || d/dx C(x) ||.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "arcade/tensor.hpp"

namespace arcade::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  // Leaf constructors.
  static Var constant(Tensor value);
  static Var leaf(Tensor value);  // requires_grad = true

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const;
  Tensor& mutable_value();  // for in-place parameter updates between steps
  bool requires_grad() const;
  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

// vjp(grad_of_output, parent_index) -> grad contribution for that parent.
using VjpFn = std::function<Var(const Var&, std::size_t)>;

struct Node {
  Tensor value;
  std::vector<Var> parents;
  VjpFn vjp;
  bool requires_grad = false;
  std::uint64_t id = 0;
};

Var make_op(Tensor value, std::vector<Var> parents, VjpFn vjp);

// d(output)/d(wrt[i]) for a scalar output. Missing paths give zeros.
// The returned vars are regular graph nodes (differentiable again).
std::vector<Var> gradients(const Var& output, const std::vector<Var>& wrt);

// ---- elementwise ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var add_scalar(const Var& a, double c);
Var mul_scalar(const Var& a, double c);
Var pow_const(const Var& a, double p);
Var sigmoid(const Var& a);
Var leaky_relu(const Var& a, double slope);

// ---- reductions and broadcasts ----
Var sum(const Var& a);                         // -> scalar
Var mean(const Var& a);                        // -> scalar
Var sum_rows(const Var& a);                    // [N,F] -> [N]
Var sum_cols(const Var& a);                    // [N,F] -> [F]
Var chan_sum(const Var& a);                    // [N,C,L] -> [C]
Var bcast_colvec(const Var& v, std::int64_t cols);            // [N] -> [N,F]
Var bcast_rowvec(const Var& v, std::int64_t rows);            // [F] -> [N,F]
Var bcast_chan(const Var& v, std::int64_t n, std::int64_t l); // [C] -> [N,C,L]
Var bcast_scalar(const Var& s, std::vector<std::int64_t> shape);

// ---- shape ----
Var reshape(const Var& a, std::vector<std::int64_t> shape);

// ---- linear algebra ----
// op(A) * op(B) where op transposes when the flag is set. A,B rank 2.
Var matmul(const Var& a, const Var& b, bool ta = false, bool tb = false);

// ---- 1-d convolution family ----
// x: [N,Ci,L], w: [Co,Ci,K] -> [N,Co,Lout]; out[n,co,t] = sum x[n,ci,t*S-P+k] w[co,ci,k].
// Lout is explicit so the strided-floor bookkeeping stays with the caller.
Var conv1d(const Var& x, const Var& w, int stride, int pad, std::int64_t lout);
// Adjoint map: y: [N,Co,Lin], w: [Co,Ci,K] -> [N,Ci,Lout].
Var conv_transpose1d(const Var& y, const Var& w, int stride, int pad, std::int64_t lout);
// Weight gradient: x: [N,Ci,L], g: [N,Co,Lout] -> [Co,Ci,K].
Var conv1d_wgrad(const Var& x, const Var& g, int stride, int pad, int k);

inline std::int64_t conv_out_len(std::int64_t lin, int k, int stride, int pad) {
  return (lin + 2 * pad - k) / stride + 1;
}

}  // namespace arcade::ad
