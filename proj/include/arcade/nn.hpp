// Neural network layers on top of the autodiff engine, plus Adam.
//
// Layers expose forward() building a differentiable graph; inference runs
// the same path on constant inputs with norm layers in eval mode, so there
// is exactly one numeric implementation per layer.
#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "arcade/autodiff.hpp"
#include "arcade/rng.hpp"
#include "arcade/tensor.hpp"

namespace arcade::nn {

struct ParamRef {
  std::string name;
  ad::Var var;
};

struct BufferRef {
  std::string name;
  Tensor* tensor;
};

constexpr double kNormEps = 1e-5;
constexpr double kBnMomentum = 0.1;

// Strided 1-d convolution, no bias. Weight layout [Co, Ci, K].
class Conv1d {
 public:
  Conv1d(int in_ch, int out_ch, int k, int stride, int pad,
         std::int64_t lin, std::int64_t lout);
  ad::Var forward(const ad::Var& x) const;
  void init(Rng& rng, double stddev);
  void collect(std::vector<ParamRef>& out, const std::string& prefix);

  std::int64_t lin() const { return lin_; }
  std::int64_t lout() const { return lout_; }
  const ad::Var& weight() const { return w_; }

 private:
  ad::Var w_;
  int stride_, pad_;
  std::int64_t lin_, lout_;
};

// Strided transposed convolution, no bias. Weight layout [Cin, Cout, K]
// (the adjoint orientation of Conv1d). Output length is pinned at
// construction so reconstruction mirrors the encoder's floor arithmetic.
class ConvTranspose1d {
 public:
  ConvTranspose1d(int in_ch, int out_ch, int k, int stride, int pad,
                  std::int64_t lin, std::int64_t lout);
  ad::Var forward(const ad::Var& x) const;
  void init(Rng& rng, double stddev);
  void collect(std::vector<ParamRef>& out, const std::string& prefix);

  std::int64_t lout() const { return lout_; }

 private:
  ad::Var w_;
  int stride_, pad_;
  std::int64_t lin_, lout_;
};

class Linear {
 public:
  Linear(std::int64_t in, std::int64_t out, bool bias);
  ad::Var forward(const ad::Var& x) const;  // [N,in] -> [N,out]
  void init(Rng& rng, double stddev);
  void collect(std::vector<ParamRef>& out, const std::string& prefix);

  const ad::Var& weight() const { return w_; }

 private:
  ad::Var w_;  // [out, in]
  ad::Var b_;  // [out] when bias
  bool has_bias_;
};

// Batch normalization over [N,F] (per-feature batch statistics).
class BatchNorm1dFlat {
 public:
  explicit BatchNorm1dFlat(std::int64_t features);
  ad::Var forward(const ad::Var& x);
  void init(Rng& rng, double stddev);
  void collect(std::vector<ParamRef>& out, const std::string& prefix);
  void collect_buffers(std::vector<BufferRef>& out, const std::string& prefix);
  void set_training(bool t) { training_ = t; }

 private:
  std::int64_t f_;
  ad::Var gamma_, beta_;
  Tensor running_mean_, running_var_;
  bool training_ = true;
};

// Batch normalization over [N,C,L] (per-channel statistics over batch and
// position).
class BatchNorm1dChan {
 public:
  explicit BatchNorm1dChan(std::int64_t channels);
  ad::Var forward(const ad::Var& x);
  void init(Rng& rng, double stddev);
  void collect(std::vector<ParamRef>& out, const std::string& prefix);
  void collect_buffers(std::vector<BufferRef>& out, const std::string& prefix);
  void set_training(bool t) { training_ = t; }

 private:
  std::int64_t c_;
  ad::Var gamma_, beta_;
  Tensor running_mean_, running_var_;
  bool training_ = true;
};

// Layer normalization over all per-sample features. Accepts [N,F] or
// [N,C,L] with C*L == F. Statistics are per sample, so outputs never depend
// on the rest of the batch.
class LayerNorm {
 public:
  explicit LayerNorm(std::int64_t features);
  ad::Var forward(const ad::Var& x) const;
  void collect(std::vector<ParamRef>& out, const std::string& prefix);

 private:
  std::int64_t f_;
  ad::Var gamma_, beta_;
};

// ---------------------------------------------------------------------------

class Adam {
 public:
  Adam(std::vector<ad::Var> params, double beta1, double beta2,
       double eps = 1e-8);

  void step(const std::vector<Tensor>& grads, double lr);
  std::int64_t steps() const { return t_; }

  void save_state(std::ostream& os) const;
  void load_state(std::istream& is);

 private:
  std::vector<ad::Var> params_;
  std::vector<Tensor> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace arcade::nn
