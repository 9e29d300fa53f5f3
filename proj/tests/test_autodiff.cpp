#include <doctest.h>

#include <cmath>
#include <functional>

#include "arcade/autodiff.hpp"
#include "arcade/rng.hpp"

using namespace arcade;
using ad::Var;

namespace {

Tensor random_tensor(std::vector<std::int64_t> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Central-difference check of d f(inputs) / d inputs[k] for scalar f.
void gradcheck(const std::function<Var(const std::vector<Var>&)>& f,
               std::vector<Tensor> inputs, double tol = 2e-6, double h = 1e-6) {
  std::vector<Var> leaves;
  for (auto& t : inputs) leaves.push_back(Var::leaf(t));
  Var out = f(leaves);
  REQUIRE(out.value().numel() == 1);
  auto grads = ad::gradients(out, leaves);

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::int64_t i = 0; i < inputs[k].numel(); ++i) {
      auto eval = [&](double delta) {
        std::vector<Var> vs;
        for (std::size_t j = 0; j < inputs.size(); ++j) {
          Tensor t = inputs[j];
          if (j == k) t[i] += delta;
          vs.push_back(Var::constant(std::move(t)));
        }
        return f(vs).value().item();
      };
      const double fd = (eval(h) - eval(-h)) / (2.0 * h);
      const double an = grads[k].value()[i];
      CHECK(std::abs(fd - an) <= tol * (1.0 + std::abs(fd) + std::abs(an)));
    }
  }
}

}  // namespace

TEST_CASE("elementwise values") {
  Var a = Var::constant(Tensor({3}, {1.0, -2.0, 3.0}));
  Var b = Var::constant(Tensor({3}, {2.0, 4.0, -1.0}));
  CHECK(ad::add(a, b).value()[1] == 2.0);
  CHECK(ad::sub(a, b).value()[0] == -1.0);
  CHECK(ad::mul(a, b).value()[2] == -3.0);
  CHECK(ad::div(a, b).value()[1] == -0.5);
  CHECK(ad::neg(a).value()[0] == -1.0);
  CHECK(ad::add_scalar(a, 1.5).value()[0] == 2.5);
  CHECK(ad::mul_scalar(a, -2.0).value()[2] == -6.0);
  CHECK(ad::leaky_relu(a, 0.2).value()[1] == doctest::Approx(-0.4));
  CHECK(ad::sigmoid(Var::constant(Tensor::scalar(0.0))).value().item() == 0.5);
  CHECK(ad::sum(a).value().item() == 2.0);
  CHECK(ad::mean(a).value().item() == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("reduction and broadcast values") {
  Var m = Var::constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  CHECK(ad::sum_rows(m).value()[0] == 6.0);
  CHECK(ad::sum_rows(m).value()[1] == 15.0);
  CHECK(ad::sum_cols(m).value()[2] == 9.0);
  Var v = Var::constant(Tensor({2}, {10, 20}));
  CHECK(ad::bcast_colvec(v, 3).value().at(1, 2) == 20.0);
  Var r = Var::constant(Tensor({3}, {1, 2, 3}));
  CHECK(ad::bcast_rowvec(r, 2).value().at(1, 0) == 1.0);
  Var c3 = Var::constant(Tensor({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8}));
  CHECK(ad::chan_sum(c3).value()[0] == 1 + 2 + 5 + 6);
  CHECK(ad::chan_sum(c3).value()[1] == 3 + 4 + 7 + 8);
}

TEST_CASE("matmul values and transposition flags") {
  Tensor at({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor bt({3, 2}, {7, 8, 9, 10, 11, 12});
  Var a = Var::constant(at);
  Var b = Var::constant(bt);
  Tensor c = ad::matmul(a, b).value();
  CHECK(c.at(0, 0) == 58.0);
  CHECK(c.at(1, 1) == 154.0);
  // transposing the stored matrix and flipping the flag gives the same product
  Tensor c2 = ad::matmul(Var::constant(Tensor({3, 2}, {1, 4, 2, 5, 3, 6})), b, true, false).value();
  for (int i = 0; i < 4; ++i) CHECK(c2[i] == doctest::Approx(c[i]));
}

TEST_CASE("gradients of elementwise ops match finite differences") {
  Rng rng(7);
  auto t3 = [&] { return random_tensor({4}, rng, 0.2, 1.5); };
  gradcheck([](const std::vector<Var>& v) { return ad::sum(ad::mul(v[0], v[1])); },
            {t3(), t3()});
  gradcheck([](const std::vector<Var>& v) { return ad::sum(ad::div(v[0], v[1])); },
            {t3(), t3()});
  gradcheck([](const std::vector<Var>& v) { return ad::sum(ad::pow_const(v[0], 1.7)); },
            {t3()});
  gradcheck([](const std::vector<Var>& v) { return ad::sum(ad::sigmoid(v[0])); },
            {random_tensor({5}, rng, -2, 2)});
  gradcheck([](const std::vector<Var>& v) { return ad::sum(ad::leaky_relu(v[0], 0.2)); },
            {random_tensor({6}, rng, 0.3, 2.0)});
  gradcheck([](const std::vector<Var>& v) {
    return ad::mean(ad::mul(ad::sub(v[0], v[1]), ad::sub(v[0], v[1])));
  }, {t3(), t3()});
}

TEST_CASE("gradients of reductions, broadcasts, reshape") {
  Rng rng(11);
  gradcheck([](const std::vector<Var>& v) {
    return ad::sum(ad::mul(ad::bcast_colvec(v[0], 4), ad::bcast_colvec(v[0], 4)));
  }, {random_tensor({3}, rng)});
  gradcheck([](const std::vector<Var>& v) {
    return ad::sum(ad::pow_const(ad::sum_rows(v[0]), 2.0));
  }, {random_tensor({3, 4}, rng)});
  gradcheck([](const std::vector<Var>& v) {
    return ad::sum(ad::pow_const(ad::sum_cols(v[0]), 2.0));
  }, {random_tensor({3, 4}, rng)});
  gradcheck([](const std::vector<Var>& v) {
    return ad::sum(ad::pow_const(ad::chan_sum(v[0]), 2.0));
  }, {random_tensor({2, 3, 4}, rng)});
  gradcheck([](const std::vector<Var>& v) {
    return ad::sum(ad::pow_const(ad::reshape(v[0], {6}), 3.0));
  }, {random_tensor({2, 3}, rng, 0.5, 1.5)});
  gradcheck([](const std::vector<Var>& v) {
    return ad::sum(ad::mul(ad::bcast_rowvec(v[0], 3), ad::bcast_rowvec(v[1], 3)));
  }, {random_tensor({4}, rng), random_tensor({4}, rng)});
  gradcheck([](const std::vector<Var>& v) {
    return ad::sum(ad::pow_const(ad::bcast_chan(v[0], 2, 3), 2.0));
  }, {random_tensor({4}, rng, 0.5, 1.0)});
}

TEST_CASE("matmul gradients for all flag combinations") {
  Rng rng(13);
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      Tensor a = ta ? random_tensor({4, 2}, rng) : random_tensor({2, 4}, rng);
      Tensor b = tb ? random_tensor({3, 4}, rng) : random_tensor({4, 3}, rng);
      gradcheck([ta, tb](const std::vector<Var>& v) {
        return ad::sum(ad::pow_const(ad::matmul(v[0], v[1], ta, tb), 2.0));
      }, {a, b});
    }
}

TEST_CASE("conv1d family values and adjointness") {
  Rng rng(17);
  // conv against a hand-computed example: x = [1,2,3,4], w = [1,1] (k=2,s=2,p=0)
  Var x = Var::constant(Tensor({1, 1, 4}, {1, 2, 3, 4}));
  Var w = Var::constant(Tensor({1, 1, 2}, {1, 1}));
  Tensor y = ad::conv1d(x, w, 2, 0, 2).value();
  CHECK(y.at(0, 0, 0) == 3.0);   // 1+2
  CHECK(y.at(0, 0, 1) == 7.0);   // 3+4

  // <conv(x), y> == <x, convT(y)> for random tensors (adjoint identity).
  const int stride = 2, pad = 1, k = 4;
  Tensor xt = random_tensor({2, 3, 10}, rng);
  Tensor wt = random_tensor({5, 3, k}, rng);
  const std::int64_t lout = ad::conv_out_len(10, k, stride, pad);
  Tensor yt = random_tensor({2, 5, lout}, rng);
  Tensor cx = ad::conv1d(Var::constant(xt), Var::constant(wt), stride, pad, lout).value();
  Tensor cty = ad::conv_transpose1d(Var::constant(yt), Var::constant(wt), stride, pad, 10).value();
  double lhs = 0, rhs = 0;
  for (std::int64_t i = 0; i < cx.numel(); ++i) lhs += cx[i] * yt[i];
  for (std::int64_t i = 0; i < xt.numel(); ++i) rhs += xt[i] * cty[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("conv1d family gradients match finite differences") {
  Rng rng(19);
  const int stride = 2, pad = 1, k = 4;
  const std::int64_t lin = 9;  // odd length exercises the floor bookkeeping
  const std::int64_t lout = ad::conv_out_len(lin, k, stride, pad);
  Tensor x = random_tensor({2, 2, lin}, rng);
  Tensor w = random_tensor({3, 2, k}, rng);
  gradcheck([&](const std::vector<Var>& v) {
    return ad::sum(ad::pow_const(ad::conv1d(v[0], v[1], stride, pad, lout), 2.0));
  }, {x, w});

  Tensor yt = random_tensor({2, 3, lout}, rng);
  gradcheck([&](const std::vector<Var>& v) {
    return ad::sum(ad::pow_const(ad::conv_transpose1d(v[0], v[1], stride, pad, lin), 2.0));
  }, {yt, w});

  gradcheck([&](const std::vector<Var>& v) {
    return ad::sum(ad::pow_const(ad::conv1d_wgrad(v[0], v[1], stride, pad, k), 2.0));
  }, {x, yt});
}

TEST_CASE("second-order gradients (gradient of a gradient)") {
  // y = sum(x^3): dy/dx = 3x^2, d/dx sum(dy/dx) = 6x.
  Tensor xt({3}, {0.5, -1.0, 2.0});
  Var x = Var::leaf(xt);
  Var y = ad::sum(ad::pow_const(x, 3.0));
  Var g = ad::gradients(y, {x})[0];
  for (int i = 0; i < 3; ++i)
    CHECK(g.value()[i] == doctest::Approx(3.0 * xt[i] * xt[i]));
  Var gg = ad::gradients(ad::sum(g), {x})[0];
  for (int i = 0; i < 3; ++i)
    CHECK(gg.value()[i] == doctest::Approx(6.0 * xt[i]));
}

TEST_CASE("second-order gradients through a linear map") {
  // f(w) = || d/dx (w.x) ||^2 = ||w||^2; df/dw = 2w. The input-gradient
  // pathway has to stay differentiable with respect to w.
  Rng rng(23);
  Tensor wt = random_tensor({1, 4}, rng);
  Tensor xt = random_tensor({1, 4}, rng);
  Var w = Var::leaf(wt);
  Var x = Var::leaf(xt);
  Var y = ad::sum(ad::matmul(x, w, false, true));
  Var gx = ad::gradients(y, {x})[0];
  Var norm2 = ad::sum(ad::mul(gx, gx));
  CHECK(norm2.value().item() ==
        doctest::Approx(wt[0] * wt[0] + wt[1] * wt[1] + wt[2] * wt[2] + wt[3] * wt[3]));
  Var gw = ad::gradients(norm2, {w})[0];
  for (int i = 0; i < 4; ++i)
    CHECK(gw.value()[i] == doctest::Approx(2.0 * wt[i]));
}

TEST_CASE("gradient accumulates over repeated use of one variable") {
  Tensor at({2}, {3.0, 4.0});
  Var a = Var::leaf(at);
  Var y = ad::sum(ad::mul(a, a));  // same var twice
  Var g = ad::gradients(y, {a})[0];
  CHECK(g.value()[0] == 6.0);
  CHECK(g.value()[1] == 8.0);
}

TEST_CASE("gradients for unreachable variables are zero") {
  Var a = Var::leaf(Tensor({2}, {1.0, 2.0}));
  Var b = Var::leaf(Tensor({2}, {3.0, 4.0}));
  Var y = ad::sum(a);
  auto g = ad::gradients(y, {a, b});
  CHECK(g[0].value()[0] == 1.0);
  CHECK(g[1].value()[0] == 0.0);
  CHECK(g[1].value()[1] == 0.0);
}
