// Distance metrics and adversarial objectives: per-value L2, Gaussian-window
// structural similarity over per-packet byte images, the interpolate
// gradient penalty, and the critic/generator objectives built from them.
//
// Sign convention: quantities named *_loss carry the orientation used in
// the training objectives below them; see critic_loss() for the one place
// where the ascended and descended forms are both exposed.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "arcade/autodiff.hpp"
#include "arcade/tensor.hpp"

namespace arcade::losses {

struct SSIMConfig {
  double c1 = 0.01;
  double c2 = 0.03;
  int window = 3;       // K_w, Gaussian window side
  double sigma = 1.5;
  // When set, use the conventional (k*L)^2 parameterization with L = 1,
  // i.e. the effective constants become c1^2 and c2^2.
  bool squared_constants = false;

  double eff_c1() const { return squared_constants ? c1 * c1 : c1; }
  double eff_c2() const { return squared_constants ? c2 * c2 : c2; }
};

struct AdversarialConfig {
  double lambda_c = 10.0;
  double lambda_g = 0.01;
};

// Normalized 2-d Gaussian window, [k,k], sum = 1.
Tensor gaussian_window(int k, double sigma);

// Sliding-window weight matrix for a side*side image: [M, side*side] rows,
// one Gaussian window per valid position, M = (side - k + 1)^2.
Tensor window_matrix(int side, int k, double sigma);

// sum_i (x_i - y_i)^2
double l2_loss(std::span<const double> x, std::span<const double> y);
// Row-wise L2 for [N,w] pairs.
std::vector<double> l2_per_sample(const Tensor& x, const Tensor& y);
// Differentiable batch mean of the per-sample L2.
ad::Var l2_mean(const ad::Var& x, const ad::Var& y);

// SSIM between two K_w x K_w patches with Gaussian-weighted moments.
double ssim_patch(const Tensor& p, const Tensor& q, const SSIMConfig& cfg);

// Mean SSIM over all valid windows of all per-packet byte images.
// x, y length w = n*l with l a perfect square.
double mssim(const std::vector<double>& x, const std::vector<double>& y,
             int n, int l, const SSIMConfig& cfg = {});
// Differentiable batch mean over [N,w] (also accepts [N,1,w]).
ad::Var mssim_mean(const ad::Var& x, const ad::Var& y, int n, int l,
                   const SSIMConfig& cfg = {});

// Number of valid window positions per packet image.
std::int64_t mssim_window_count(int l, const SSIMConfig& cfg);

using CriticFn = std::function<ad::Var(const ad::Var&)>;

// Mean over the batch of (||grad_xhat C(xhat)||_2 - 1)^2 with
// xhat_i = eps_i * x_i + (1 - eps_i) * x_tilde_i. The result is a graph
// node, so it can be differentiated with respect to the critic parameters.
ad::Var gradient_penalty(const CriticFn& critic, const Tensor& x,
                         const Tensor& x_tilde, const std::vector<double>& eps);

struct CriticLossParts {
  ad::Var gap;        // mean C(x) - mean C(x~)
  ad::Var penalty;    // gradient penalty
  ad::Var total;      // gap + lambda_c * penalty (the reported critic loss)
  // What the critic's optimizer descends: lambda_c * penalty - gap. The
  // critic ascends the score gap while the penalty is always minimized so
  // the interpolate gradient norm is driven to 1.
  ad::Var objective;
};

CriticLossParts critic_loss(const CriticFn& critic, const Tensor& x,
                            const Tensor& x_tilde, const AdversarialConfig& cfg,
                            const std::vector<double>& eps);

// mean MSSIM(x, x~) + lambda_g * mean C(x~); the autoencoder ascends this
// (its optimizer descends the negation).
ad::Var generator_loss(const Tensor& x, const ad::Var& x_tilde,
                       const CriticFn& critic, const AdversarialConfig& cfg,
                       int n, int l, const SSIMConfig& ssim_cfg = {});

}  // namespace arcade::losses
