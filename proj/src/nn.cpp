#include "arcade/nn.hpp"

#include <cmath>

#include "arcade/errors.hpp"
#include "arcade/io.hpp"

namespace arcade::nn {

using ad::Var;

namespace {

void fill_normal(Tensor& t, Rng& rng, double mean, double stddev) {
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(mean, stddev);
}

// Normalize [N,F] rows to zero mean / unit variance (biased variance).
Var row_standardize(const Var& x, std::int64_t f) {
  Var mu = ad::mul_scalar(ad::sum_rows(x), 1.0 / static_cast<double>(f));
  Var xc = ad::sub(x, ad::bcast_colvec(mu, f));
  Var var = ad::mul_scalar(ad::sum_rows(ad::mul(xc, xc)), 1.0 / static_cast<double>(f));
  Var inv = ad::pow_const(ad::add_scalar(var, kNormEps), -0.5);
  return ad::mul(xc, ad::bcast_colvec(inv, f));
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv1d
// ---------------------------------------------------------------------------

Conv1d::Conv1d(int in_ch, int out_ch, int k, int stride, int pad,
               std::int64_t lin, std::int64_t lout)
    : w_(ad::Var::leaf(Tensor({out_ch, in_ch, k}))),
      stride_(stride), pad_(pad), lin_(lin), lout_(lout) {}

Var Conv1d::forward(const Var& x) const {
  if (x.value().dim(2) != lin_)
    throw ContractError("Conv1d: expected input length " + std::to_string(lin_));
  return ad::conv1d(x, w_, stride_, pad_, lout_);
}

void Conv1d::init(Rng& rng, double stddev) {
  fill_normal(w_.mutable_value(), rng, 0.0, stddev);
}

void Conv1d::collect(std::vector<ParamRef>& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", w_});
}

// ---------------------------------------------------------------------------
// ConvTranspose1d
// ---------------------------------------------------------------------------

ConvTranspose1d::ConvTranspose1d(int in_ch, int out_ch, int k, int stride,
                                 int pad, std::int64_t lin, std::int64_t lout)
    : w_(ad::Var::leaf(Tensor({in_ch, out_ch, k}))),
      stride_(stride), pad_(pad), lin_(lin), lout_(lout) {}

Var ConvTranspose1d::forward(const Var& x) const {
  if (x.value().dim(2) != lin_)
    throw ContractError("ConvTranspose1d: expected input length " + std::to_string(lin_));
  return ad::conv_transpose1d(x, w_, stride_, pad_, lout_);
}

void ConvTranspose1d::init(Rng& rng, double stddev) {
  fill_normal(w_.mutable_value(), rng, 0.0, stddev);
}

void ConvTranspose1d::collect(std::vector<ParamRef>& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", w_});
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

Linear::Linear(std::int64_t in, std::int64_t out, bool bias)
    : w_(ad::Var::leaf(Tensor({out, in}))), has_bias_(bias) {
  if (bias) b_ = ad::Var::leaf(Tensor({out}));
}

Var Linear::forward(const Var& x) const {
  Var y = ad::matmul(x, w_, false, true);
  if (has_bias_) y = ad::add(y, ad::bcast_rowvec(b_, x.value().dim(0)));
  return y;
}

void Linear::init(Rng& rng, double stddev) {
  fill_normal(w_.mutable_value(), rng, 0.0, stddev);
  if (has_bias_) {
    Tensor& b = b_.mutable_value();
    std::fill(b.vec().begin(), b.vec().end(), 0.0);
  }
}

void Linear::collect(std::vector<ParamRef>& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", w_});
  if (has_bias_) out.push_back({prefix + ".bias", b_});
}

// ---------------------------------------------------------------------------
// BatchNorm1dFlat
// ---------------------------------------------------------------------------

BatchNorm1dFlat::BatchNorm1dFlat(std::int64_t features)
    : f_(features),
      gamma_(ad::Var::leaf(Tensor::full({features}, 1.0))),
      beta_(ad::Var::leaf(Tensor({features}))),
      running_mean_(Tensor({features})),
      running_var_(Tensor::full({features}, 1.0)) {}

Var BatchNorm1dFlat::forward(const Var& x) {
  const std::int64_t n = x.value().dim(0);
  Var xn;
  if (training_) {
    if (n < 2) throw ContractError("BatchNorm: batch of at least 2 required in training mode");
    Var mu = ad::mul_scalar(ad::sum_cols(x), 1.0 / static_cast<double>(n));
    Var xc = ad::sub(x, ad::bcast_rowvec(mu, n));
    Var var = ad::mul_scalar(ad::sum_cols(ad::mul(xc, xc)), 1.0 / static_cast<double>(n));
    Var inv = ad::pow_const(ad::add_scalar(var, kNormEps), -0.5);
    xn = ad::mul(xc, ad::bcast_rowvec(inv, n));
    // Running statistics track the batch mean and the unbiased variance.
    const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
    for (std::int64_t j = 0; j < f_; ++j) {
      running_mean_[j] = (1.0 - kBnMomentum) * running_mean_[j] + kBnMomentum * mu.value()[j];
      running_var_[j] = (1.0 - kBnMomentum) * running_var_[j] + kBnMomentum * var.value()[j] * unbias;
    }
  } else {
    Tensor mu = running_mean_;
    Tensor inv({f_});
    for (std::int64_t j = 0; j < f_; ++j)
      inv[j] = 1.0 / std::sqrt(running_var_[j] + kNormEps);
    Var xc = ad::sub(x, ad::bcast_rowvec(ad::Var::constant(std::move(mu)), n));
    xn = ad::mul(xc, ad::bcast_rowvec(ad::Var::constant(std::move(inv)), n));
  }
  return ad::add(ad::mul(xn, ad::bcast_rowvec(gamma_, n)), ad::bcast_rowvec(beta_, n));
}

void BatchNorm1dFlat::init(Rng& rng, double stddev) {
  fill_normal(gamma_.mutable_value(), rng, 1.0, stddev);
  std::fill(beta_.mutable_value().vec().begin(), beta_.mutable_value().vec().end(), 0.0);
  std::fill(running_mean_.vec().begin(), running_mean_.vec().end(), 0.0);
  std::fill(running_var_.vec().begin(), running_var_.vec().end(), 1.0);
}

void BatchNorm1dFlat::collect(std::vector<ParamRef>& out, const std::string& prefix) {
  out.push_back({prefix + ".gamma", gamma_});
  out.push_back({prefix + ".beta", beta_});
}

void BatchNorm1dFlat::collect_buffers(std::vector<BufferRef>& out, const std::string& prefix) {
  out.push_back({prefix + ".running_mean", &running_mean_});
  out.push_back({prefix + ".running_var", &running_var_});
}

// ---------------------------------------------------------------------------
// BatchNorm1dChan
// ---------------------------------------------------------------------------

BatchNorm1dChan::BatchNorm1dChan(std::int64_t channels)
    : c_(channels),
      gamma_(ad::Var::leaf(Tensor::full({channels}, 1.0))),
      beta_(ad::Var::leaf(Tensor({channels}))),
      running_mean_(Tensor({channels})),
      running_var_(Tensor::full({channels}, 1.0)) {}

Var BatchNorm1dChan::forward(const Var& x) {
  const std::int64_t n = x.value().dim(0), l = x.value().dim(2);
  const double cnt = static_cast<double>(n * l);
  Var xn;
  if (training_) {
    if (n * l < 2) throw ContractError("BatchNorm: at least 2 values per channel required");
    Var mu = ad::mul_scalar(ad::chan_sum(x), 1.0 / cnt);
    Var xc = ad::sub(x, ad::bcast_chan(mu, n, l));
    Var var = ad::mul_scalar(ad::chan_sum(ad::mul(xc, xc)), 1.0 / cnt);
    Var inv = ad::pow_const(ad::add_scalar(var, kNormEps), -0.5);
    xn = ad::mul(xc, ad::bcast_chan(inv, n, l));
    const double unbias = cnt / (cnt - 1.0);
    for (std::int64_t j = 0; j < c_; ++j) {
      running_mean_[j] = (1.0 - kBnMomentum) * running_mean_[j] + kBnMomentum * mu.value()[j];
      running_var_[j] = (1.0 - kBnMomentum) * running_var_[j] + kBnMomentum * var.value()[j] * unbias;
    }
  } else {
    Tensor mu = running_mean_;
    Tensor inv({c_});
    for (std::int64_t j = 0; j < c_; ++j)
      inv[j] = 1.0 / std::sqrt(running_var_[j] + kNormEps);
    Var xc = ad::sub(x, ad::bcast_chan(ad::Var::constant(std::move(mu)), n, l));
    xn = ad::mul(xc, ad::bcast_chan(ad::Var::constant(std::move(inv)), n, l));
  }
  return ad::add(ad::mul(xn, ad::bcast_chan(gamma_, n, l)), ad::bcast_chan(beta_, n, l));
}

void BatchNorm1dChan::init(Rng& rng, double stddev) {
  fill_normal(gamma_.mutable_value(), rng, 1.0, stddev);
  std::fill(beta_.mutable_value().vec().begin(), beta_.mutable_value().vec().end(), 0.0);
  std::fill(running_mean_.vec().begin(), running_mean_.vec().end(), 0.0);
  std::fill(running_var_.vec().begin(), running_var_.vec().end(), 1.0);
}

void BatchNorm1dChan::collect(std::vector<ParamRef>& out, const std::string& prefix) {
  out.push_back({prefix + ".gamma", gamma_});
  out.push_back({prefix + ".beta", beta_});
}

void BatchNorm1dChan::collect_buffers(std::vector<BufferRef>& out, const std::string& prefix) {
  out.push_back({prefix + ".running_mean", &running_mean_});
  out.push_back({prefix + ".running_var", &running_var_});
}

// ---------------------------------------------------------------------------
// LayerNorm
// ---------------------------------------------------------------------------

LayerNorm::LayerNorm(std::int64_t features)
    : f_(features),
      gamma_(ad::Var::leaf(Tensor::full({features}, 1.0))),
      beta_(ad::Var::leaf(Tensor({features}))) {}

Var LayerNorm::forward(const Var& x) const {
  const auto& shape = x.value().shape();
  const std::int64_t n = shape.at(0);
  Var flat = x;
  const bool rank3 = x.value().rank() == 3;
  if (rank3) flat = ad::reshape(x, {n, f_});
  if (flat.value().dim(1) != f_)
    throw ContractError("LayerNorm: expected " + std::to_string(f_) + " features");
  Var xn = row_standardize(flat, f_);
  Var y = ad::add(ad::mul(xn, ad::bcast_rowvec(gamma_, n)), ad::bcast_rowvec(beta_, n));
  if (rank3) y = ad::reshape(y, shape);
  return y;
}

void LayerNorm::collect(std::vector<ParamRef>& out, const std::string& prefix) {
  out.push_back({prefix + ".gamma", gamma_});
  out.push_back({prefix + ".beta", beta_});
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

Adam::Adam(std::vector<ad::Var> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(Tensor::zeros(p.value().shape()));
    v_.emplace_back(Tensor::zeros(p.value().shape()));
  }
}

void Adam::step(const std::vector<Tensor>& grads, double lr) {
  if (grads.size() != params_.size())
    throw ContractError("Adam: gradient count mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].mutable_value();
    const Tensor& g = grads[i];
    if (!p.same_shape(g)) throw ContractError("Adam: gradient shape mismatch");
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::int64_t j = 0; j < p.numel(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::save_state(std::ostream& os) const {
  io::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(t_));
  io::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(params_.size()));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    io::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(m_[i].numel()));
    for (std::int64_t j = 0; j < m_[i].numel(); ++j) io::write_f64(os, m_[i][j]);
    for (std::int64_t j = 0; j < v_[i].numel(); ++j) io::write_f64(os, v_[i][j]);
  }
}

void Adam::load_state(std::istream& is) {
  t_ = static_cast<std::int64_t>(io::read_le<std::uint64_t>(is));
  const auto count = io::read_le<std::uint64_t>(is);
  if (count != params_.size()) throw IoError("Adam state: parameter count mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto n = static_cast<std::int64_t>(io::read_le<std::uint64_t>(is));
    if (n != m_[i].numel()) throw IoError("Adam state: tensor size mismatch");
    for (std::int64_t j = 0; j < n; ++j) m_[i][j] = io::read_f64(is);
    for (std::int64_t j = 0; j < n; ++j) v_[i][j] = io::read_f64(is);
  }
}

}  // namespace arcade::nn
