#include "arcade/losses.hpp"

#include <cmath>

#include "arcade/errors.hpp"

namespace arcade::losses {

using ad::Var;

Tensor gaussian_window(int k, double sigma) {
  if (k < 1) throw ConfigError("gaussian_window: k must be >= 1");
  Tensor g({k, k});
  const double c = (k - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      const double v = std::exp(-((i - c) * (i - c) + (j - c) * (j - c)) /
                                (2.0 * sigma * sigma));
      g.at(i, j) = v;
      total += v;
    }
  for (int i = 0; i < k * k; ++i) g[i] /= total;
  return g;
}

Tensor window_matrix(int side, int k, double sigma) {
  if (side < k)
    throw ConfigError("window_matrix: image side " + std::to_string(side) +
                      " smaller than window " + std::to_string(k));
  const Tensor g = gaussian_window(k, sigma);
  const std::int64_t m_side = side - k + 1;
  Tensor p({m_side * m_side, static_cast<std::int64_t>(side) * side});
  for (std::int64_t a = 0; a < m_side; ++a)
    for (std::int64_t b = 0; b < m_side; ++b) {
      const std::int64_t row = a * m_side + b;
      for (int di = 0; di < k; ++di)
        for (int dj = 0; dj < k; ++dj)
          p.at(row, (a + di) * side + (b + dj)) = g.at(di, dj);
    }
  return p;
}

std::int64_t mssim_window_count(int l, const SSIMConfig& cfg) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(l))));
  if (side * side != l)
    throw ConfigError("mssim: l = " + std::to_string(l) + " is not a perfect square");
  if (side < cfg.window)
    throw ConfigError("mssim: window larger than packet image side");
  const std::int64_t m = side - cfg.window + 1;
  return m * m;
}

// ---------------------------------------------------------------------------
// L2
// ---------------------------------------------------------------------------

double l2_loss(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractError("l2_loss: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return acc;
}

std::vector<double> l2_per_sample(const Tensor& x, const Tensor& y) {
  if (!x.same_shape(y) || x.rank() != 2)
    throw ContractError("l2_per_sample: [N,w] pair required");
  const std::int64_t n = x.dim(0), w = x.dim(1);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const double* xr = x.data() + i * w;
    const double* yr = y.data() + i * w;
    for (std::int64_t j = 0; j < w; ++j) {
      const double d = xr[j] - yr[j];
      acc += d * d;
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

ad::Var l2_mean(const ad::Var& x, const ad::Var& y) {
  Var d = ad::sub(x, y);
  Var sq = ad::mul(d, d);
  const std::int64_t n = x.value().dim(0);
  return ad::mul_scalar(ad::sum(sq), 1.0 / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// SSIM / MSSIM
// ---------------------------------------------------------------------------

double ssim_patch(const Tensor& p, const Tensor& q, const SSIMConfig& cfg) {
  if (!p.same_shape(q)) throw ContractError("ssim_patch: shape mismatch");
  const Tensor g = gaussian_window(cfg.window, cfg.sigma);
  if (p.numel() != g.numel())
    throw ContractError("ssim_patch: patch does not match window size");
  double mp = 0, mq = 0;
  for (std::int64_t i = 0; i < g.numel(); ++i) {
    mp += g[i] * p[i];
    mq += g[i] * q[i];
  }
  double vp = 0, vq = 0, cov = 0;
  for (std::int64_t i = 0; i < g.numel(); ++i) {
    vp += g[i] * (p[i] - mp) * (p[i] - mp);
    vq += g[i] * (q[i] - mq) * (q[i] - mq);
    cov += g[i] * (p[i] - mp) * (q[i] - mq);
  }
  const double c1 = cfg.eff_c1(), c2 = cfg.eff_c2();
  return ((2 * mp * mq + c1) * (2 * cov + c2)) /
         ((mp * mp + mq * mq + c1) * (vp + vq + c2));
}

namespace {

// Core windowed computation on [R, l] chunk matrices (R = N * n packets).
Var mssim_map(const Var& xc, const Var& yc, int l, const SSIMConfig& cfg) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(l))));
  Var p = ad::Var::constant(window_matrix(side, cfg.window, cfg.sigma));
  const double c1 = cfg.eff_c1(), c2 = cfg.eff_c2();

  // Weighted first and second moments per window via one constant matmul.
  Var mu_p = ad::matmul(xc, p, false, true);
  Var mu_q = ad::matmul(yc, p, false, true);
  Var e_pp = ad::matmul(ad::mul(xc, xc), p, false, true);
  Var e_qq = ad::matmul(ad::mul(yc, yc), p, false, true);
  Var e_pq = ad::matmul(ad::mul(xc, yc), p, false, true);

  Var mu_p2 = ad::mul(mu_p, mu_p);
  Var mu_q2 = ad::mul(mu_q, mu_q);
  Var mu_pq = ad::mul(mu_p, mu_q);
  Var var_p = ad::sub(e_pp, mu_p2);
  Var var_q = ad::sub(e_qq, mu_q2);
  Var cov = ad::sub(e_pq, mu_pq);

  Var num = ad::mul(ad::add_scalar(ad::mul_scalar(mu_pq, 2.0), c1),
                    ad::add_scalar(ad::mul_scalar(cov, 2.0), c2));
  Var den = ad::mul(ad::add_scalar(ad::add(mu_p2, mu_q2), c1),
                    ad::add_scalar(ad::add(var_p, var_q), c2));
  return ad::div(num, den);
}

Var flatten_rows(const Var& v) {
  const Tensor& t = v.value();
  if (t.rank() == 3) {
    if (t.dim(1) != 1) throw ContractError("mssim: expected single-channel input");
    return ad::reshape(v, {t.dim(0), t.dim(2)});
  }
  if (t.rank() == 2) return v;
  if (t.rank() == 1) return ad::reshape(v, {1, t.dim(0)});
  throw ContractError("mssim: rank-1..3 input required");
}

}  // namespace

ad::Var mssim_mean(const ad::Var& x, const ad::Var& y, int n, int l,
                   const SSIMConfig& cfg) {
  mssim_window_count(l, cfg);  // validates l and window size
  Var xf = flatten_rows(x);
  Var yf = flatten_rows(y);
  if (!xf.value().same_shape(yf.value()))
    throw ContractError("mssim: shape mismatch");
  const std::int64_t rows = xf.value().dim(0);
  if (xf.value().dim(1) != static_cast<std::int64_t>(n) * l)
    throw ContractError("mssim: expected length n*l = " + std::to_string(n * l));
  Var xc = ad::reshape(xf, {rows * n, l});
  Var yc = ad::reshape(yf, {rows * n, l});
  // Each sample contributes (1/(n*M)) * sum of its windows, so the batch
  // mean is the plain mean over the whole window map.
  return ad::mean(mssim_map(xc, yc, l, cfg));
}

double mssim(const std::vector<double>& x, const std::vector<double>& y,
             int n, int l, const SSIMConfig& cfg) {
  if (x.size() != y.size()) throw ContractError("mssim: length mismatch");
  if (x.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(l))
    throw ContractError("mssim: length must equal n*l");
  Var xv = ad::Var::constant(Tensor({1, static_cast<std::int64_t>(x.size())}, x));
  Var yv = ad::Var::constant(Tensor({1, static_cast<std::int64_t>(y.size())}, y));
  return mssim_mean(xv, yv, n, l, cfg).value().item();
}

// ---------------------------------------------------------------------------
// Adversarial terms
// ---------------------------------------------------------------------------

namespace {

Tensor interpolate(const Tensor& x, const Tensor& x_tilde,
                   const std::vector<double>& eps) {
  if (!x.same_shape(x_tilde)) throw ContractError("gradient_penalty: shape mismatch");
  const std::int64_t n = x.dim(0);
  if (static_cast<std::int64_t>(eps.size()) != n)
    throw ContractError("gradient_penalty: one epsilon per batch sample required");
  const std::int64_t per = x.numel() / n;
  Tensor xhat(x.shape());
  for (std::int64_t i = 0; i < n; ++i) {
    const double e = eps[static_cast<std::size_t>(i)];
    const double* xs = x.data() + i * per;
    const double* ts = x_tilde.data() + i * per;
    double* hs = xhat.data() + i * per;
    for (std::int64_t j = 0; j < per; ++j) hs[j] = e * xs[j] + (1.0 - e) * ts[j];
  }
  return xhat;
}

}  // namespace

ad::Var gradient_penalty(const CriticFn& critic, const Tensor& x,
                         const Tensor& x_tilde, const std::vector<double>& eps) {
  const std::int64_t n = x.dim(0);
  Var xhat = ad::Var::leaf(interpolate(x, x_tilde, eps));
  Var scores = critic(xhat);
  if (scores.value().numel() != n)
    throw ContractError("gradient_penalty: critic must map [N,...] to [N]");
  // Per-sample input gradients; summing scores keeps them independent.
  Var g = ad::gradients(ad::sum(scores), {xhat})[0];
  Var gf = ad::reshape(g, {n, g.value().numel() / n});
  Var norms = ad::pow_const(ad::sum_rows(ad::mul(gf, gf)), 0.5);
  return ad::mean(ad::pow_const(ad::add_scalar(norms, -1.0), 2.0));
}

CriticLossParts critic_loss(const CriticFn& critic, const Tensor& x,
                            const Tensor& x_tilde, const AdversarialConfig& cfg,
                            const std::vector<double>& eps) {
  Var sx = critic(ad::Var::constant(x));
  Var st = critic(ad::Var::constant(x_tilde));
  CriticLossParts parts;
  parts.gap = ad::sub(ad::mean(sx), ad::mean(st));
  parts.penalty = gradient_penalty(critic, x, x_tilde, eps);
  parts.total = ad::add(parts.gap, ad::mul_scalar(parts.penalty, cfg.lambda_c));
  parts.objective = ad::sub(ad::mul_scalar(parts.penalty, cfg.lambda_c), parts.gap);
  return parts;
}

ad::Var generator_loss(const Tensor& x, const ad::Var& x_tilde,
                       const CriticFn& critic, const AdversarialConfig& cfg,
                       int n, int l, const SSIMConfig& ssim_cfg) {
  Var sim = mssim_mean(ad::Var::constant(x), x_tilde, n, l, ssim_cfg);
  if (cfg.lambda_g == 0.0) return sim;
  Var adv = ad::mean(critic(x_tilde));
  return ad::add(sim, ad::mul_scalar(adv, cfg.lambda_g));
}

}  // namespace arcade::losses
