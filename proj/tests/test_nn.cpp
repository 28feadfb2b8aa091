#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "rangebev/nn.hpp"
#include "rangebev/rng.hpp"

using namespace rangebev;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values) v = rng.uniform(lo, hi);
  return t;
}

// Scalar loss for gradient checks: fixed random projection of the output.
double projected_loss(const Tensor& out, const Tensor& proj) {
  double s = 0.0;
  for (std::int64_t i = 0; i < out.size(); ++i)
    s += out.values[static_cast<std::size_t>(i)] * proj.values[static_cast<std::size_t>(i)];
  return s;
}

}  // namespace

TEST_CASE("conv2d 1x1 identity kernel is the identity") {
  LayerSpec spec = LayerSpec::conv(1, 1, 1, 1, 0);
  Parameter w("w", {1, 1, 1, 1});
  w.value.values[0] = 1.0;
  Parameter b("b", {1});
  Rng rng(7);
  Tensor x = random_tensor({1, 5, 4}, rng);
  Tensor y = conv2d_forward(x, w, b, spec);
  REQUIRE(y.shape == x.shape);
  for (std::int64_t i = 0; i < x.size(); ++i)
    CHECK(y.values[static_cast<std::size_t>(i)] == x.values[static_cast<std::size_t>(i)]);
}

TEST_CASE("conv2d all-ones 3x3 on all-ones 3x3 input gives 9") {
  LayerSpec spec = LayerSpec::conv(1, 1, 3, 1, 0);
  Parameter w("w", {1, 1, 3, 3});
  w.value.fill(1.0);
  Parameter b("b", {1});
  Tensor x({1, 3, 3});
  x.fill(1.0);
  Tensor y = conv2d_forward(x, w, b, spec);
  REQUIRE(y.shape == std::vector<int>{1, 1, 1});
  CHECK(y.values[0] == doctest::Approx(9.0));
}

TEST_CASE("conv2d matches the naive-loop reference elementwise") {
  Rng rng(42);
  struct Case {
    int ci, h, w, co, k, s, p;
  };
  for (const Case& c : {Case{2, 4, 4, 3, 3, 1, 1}, Case{3, 9, 11, 4, 3, 2, 1},
                        Case{4, 7, 7, 2, 1, 1, 0}, Case{1, 6, 5, 5, 3, 1, 0}}) {
    LayerSpec spec = LayerSpec::conv(c.ci, c.co, c.k, c.s, c.p);
    Parameter w("w", {c.co, c.ci, c.k, c.k});
    Parameter b("b", {c.co});
    for (double& v : w.value.values) v = rng.uniform(-1, 1);
    for (double& v : b.value.values) v = rng.uniform(-1, 1);
    Tensor x = random_tensor({c.ci, c.h, c.w}, rng);
    Tensor fast = conv2d_forward(x, w, b, spec);
    Tensor ref = conv2d_forward_ref(x, w, b, spec);
    REQUIRE(fast.shape == ref.shape);
    for (std::int64_t i = 0; i < fast.size(); ++i)
      CHECK(std::abs(fast.values[static_cast<std::size_t>(i)] -
                     ref.values[static_cast<std::size_t>(i)]) <= 1e-12);
  }
}

TEST_CASE("conv2d forward is deterministic") {
  Rng rng(5);
  LayerSpec spec = LayerSpec::conv(3, 8, 3, 2, 1);
  Parameter w("w", {8, 3, 3, 3});
  Parameter b("b", {8});
  for (double& v : w.value.values) v = rng.uniform(-1, 1);
  Tensor x = random_tensor({3, 16, 16}, rng);
  Tensor a = conv2d_forward(x, w, b, spec);
  Tensor c = conv2d_forward(x, w, b, spec);
  CHECK(a.values == c.values);
}

TEST_CASE("conv2d shape mismatch raises config error") {
  LayerSpec spec = LayerSpec::conv(2, 1, 3, 1, 1);
  Parameter w("w", {1, 2, 3, 3});
  Parameter b("b", {1});
  Tensor x({3, 4, 4});  // wrong channel count
  CHECK_THROWS_AS(conv2d_forward(x, w, b, spec), config_error);
}

TEST_CASE("conv2d_backward zero grad_out gives zero gradients") {
  Rng rng(3);
  LayerSpec spec = LayerSpec::conv(2, 3, 3, 1, 1);
  Parameter w("w", {3, 2, 3, 3});
  for (double& v : w.value.values) v = rng.uniform(-1, 1);
  Tensor x = random_tensor({2, 4, 4}, rng);
  Tensor go({3, 4, 4});
  ConvGrads g = conv2d_backward(go, x, w, spec);
  for (double v : g.grad_input.values) CHECK(v == 0.0);
  for (double v : g.grad_weights.values) CHECK(v == 0.0);
  for (double v : g.grad_bias.values) CHECK(v == 0.0);
}

TEST_CASE("conv2d_backward with 1x1 identity kernel passes grad through") {
  LayerSpec spec = LayerSpec::conv(1, 1, 1, 1, 0);
  Parameter w("w", {1, 1, 1, 1});
  w.value.values[0] = 1.0;
  Rng rng(11);
  Tensor x = random_tensor({1, 4, 4}, rng);
  Tensor go = random_tensor({1, 4, 4}, rng);
  ConvGrads g = conv2d_backward(go, x, w, spec);
  for (std::int64_t i = 0; i < go.size(); ++i)
    CHECK(g.grad_input.values[static_cast<std::size_t>(i)] ==
          go.values[static_cast<std::size_t>(i)]);
}

TEST_CASE("conv2d_backward requires a forward cache") {
  LayerSpec spec = LayerSpec::conv(1, 1, 1, 1, 0);
  Parameter w("w", {1, 1, 1, 1});
  Tensor go({1, 2, 2});
  CHECK_THROWS_AS(conv2d_backward(go, Tensor(), w, spec), usage_error);
}

TEST_CASE("conv2d gradients match finite differences over 5 seeds") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    LayerSpec spec = LayerSpec::conv(2, 3, 3, seed % 2 ? 1 : 2, 1);
    Parameter w("w", {3, 2, 3, 3});
    Parameter b("b", {3});
    for (double& v : w.value.values) v = rng.uniform(-1, 1);
    for (double& v : b.value.values) v = rng.uniform(-0.5, 0.5);
    Tensor x = random_tensor({2, 6, 6}, rng);
    const int oh = conv_out_dim(6, 3, spec.stride, 1);
    Tensor proj = random_tensor({3, oh, oh}, rng);

    ConvGrads g = conv2d_backward(proj, x, w, spec);

    auto fn_x = [&](const Tensor& t) { return projected_loss(conv2d_forward(t, w, b, spec), proj); };
    CHECK(finite_diff_check(fn_x, x, g.grad_input, 1e-5) <= 1e-4);

    auto fn_w = [&](const Tensor& t) {
      Parameter wp = w;
      wp.value = t;
      return projected_loss(conv2d_forward(x, wp, b, spec), proj);
    };
    CHECK(finite_diff_check(fn_w, w.value, g.grad_weights, 1e-5) <= 1e-4);

    auto fn_b = [&](const Tensor& t) {
      Parameter bp = b;
      bp.value = t;
      return projected_loss(conv2d_forward(x, w, bp, spec), proj);
    };
    CHECK(finite_diff_check(fn_b, b.value, g.grad_bias, 1e-5) <= 1e-4);
  }
}

TEST_CASE("activations: fixed points and finite differences") {
  LayerSpec sig = LayerSpec::sigmoid();
  Tensor zero({1, 1, 1});
  CHECK(activation_forward(zero, sig).values[0] == doctest::Approx(0.5));

  LayerSpec lrelu = LayerSpec::leaky_relu(0.1);
  Tensor pos({4});
  pos.values = {0.0, 0.5, 1.0, 3.0};
  Tensor fwd = activation_forward(pos, lrelu);
  for (std::size_t i = 0; i < 4; ++i) CHECK(fwd.values[i] == pos.values[i]);
  Tensor neg({2});
  neg.values = {-1.0, -2.0};
  Tensor fneg = activation_forward(neg, lrelu);
  CHECK(fneg.values[0] == doctest::Approx(-0.1));
  CHECK(fneg.values[1] == doctest::Approx(-0.2));

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 13);
    Tensor x = random_tensor({2, 3, 3}, rng, -2.0, 2.0);
    // keep probes away from the leaky-relu kink
    for (double& v : x.values)
      if (std::abs(v) < 1e-3) v = 0.1;
    Tensor proj = random_tensor({2, 3, 3}, rng);
    for (const LayerSpec& spec : {sig, lrelu}) {
      Tensor grad = activation_backward(proj, x, spec);
      auto fn = [&](const Tensor& t) { return projected_loss(activation_forward(t, spec), proj); };
      CHECK(finite_diff_check(fn, x, grad, 1e-5) <= 1e-4);
    }
  }
}

TEST_CASE("bce_loss analytic values") {
  Tensor half({2});
  half.values = {0.5, 0.5};
  Tensor labels({2});
  labels.values = {1.0, 0.0};
  CHECK(bce_loss(half, labels).loss == doctest::Approx(std::log(2.0)));

  Tensor perfect({2});
  perfect.values = {1.0, 0.0};
  CHECK(bce_loss(perfect, labels).loss <= 1e-6);

  Tensor pred({2});
  pred.values = {0.9, 0.2};
  const double expected = -(std::log(0.9) + std::log(0.8)) / 2.0;
  CHECK(bce_loss(pred, labels).loss == doctest::Approx(expected).epsilon(1e-9));
  CHECK(bce_loss(pred, labels).loss == doctest::Approx(0.164252).epsilon(1e-4));

  Tensor bad({1});
  bad.values = {0.5};
  Tensor badlabel({1});
  badlabel.values = {0.3};
  CHECK_THROWS_AS(bce_loss(bad, badlabel), data_error);
}

TEST_CASE("bce_loss gradient matches finite differences") {
  Rng rng(99);
  Tensor pred({6});
  Tensor label({6});
  for (std::size_t i = 0; i < 6; ++i) {
    pred.values[i] = rng.uniform(0.05, 0.95);
    label.values[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  }
  LossResult r = bce_loss(pred, label);
  auto fn = [&](const Tensor& t) { return bce_loss(t, label).loss; };
  CHECK(finite_diff_check(fn, pred, r.grad_pred, 1e-6) <= 1e-4);
}

TEST_CASE("smooth_l1 piecewise values") {
  Tensor a({1}), b({1});
  a.values = {1.0};
  b.values = {1.0};
  CHECK(smooth_l1(a, b).loss == 0.0);

  a.values = {1.5};
  b.values = {1.0};
  CHECK(smooth_l1(a, b).loss == doctest::Approx(0.125));

  a.values = {3.0};
  b.values = {1.0};
  CHECK(smooth_l1(a, b).loss == doctest::Approx(1.5));

  Tensor wrong({2});
  CHECK_THROWS_AS(smooth_l1(a, wrong), usage_error);
}

TEST_CASE("smooth_l1 gradient matches finite differences") {
  Rng rng(17);
  Tensor pred({8}), target({8});
  for (std::size_t i = 0; i < 8; ++i) {
    pred.values[i] = rng.uniform(-3, 3);
    target.values[i] = rng.uniform(-3, 3);
    // keep away from the |d| = 1 transition
    if (std::abs(std::abs(pred.values[i] - target.values[i]) - 1.0) < 1e-2)
      target.values[i] += 0.1;
  }
  LossResult r = smooth_l1(pred, target);
  auto fn = [&](const Tensor& t) { return smooth_l1(t, target).loss; };
  CHECK(finite_diff_check(fn, pred, r.grad_pred, 1e-6) <= 1e-4);
}

TEST_CASE("adam: zero gradient leaves parameters and moments unchanged") {
  Parameter p("p", {3});
  p.value.values = {1.0, -2.0, 0.5};
  adam_step({&p}, AdamConfig{}, 1);
  CHECK(p.value.values == std::vector<double>{1.0, -2.0, 0.5});
  for (double v : p.m.values) CHECK(v == 0.0);
  for (double v : p.v.values) CHECK(v == 0.0);
}

TEST_CASE("adam: first step with unit gradient moves by about -lr") {
  Parameter p("p", {2});
  p.value.values = {0.0, 5.0};
  p.grad.fill(1.0);
  AdamConfig cfg;
  adam_step({&p}, cfg, 1);
  CHECK(std::abs(p.value.values[0] + cfg.lr) < 1e-9);
  CHECK(std::abs(p.value.values[1] - (5.0 - cfg.lr)) < 1e-9);
  // gradients zeroed afterward
  for (double v : p.grad.values) CHECK(v == 0.0);
}

TEST_CASE("adam: two steps on a scalar quadratic match a hand trace") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  Parameter p("x", {1});
  p.value.values[0] = 1.0;

  // hand trace of x' = x - lr * mhat / (sqrt(vhat) + eps) for f(x) = x^2
  double x = 1.0, m = 0.0, v = 0.0;
  double g = 2.0 * x;
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
  x -= cfg.lr * (m / (1.0 - cfg.beta1)) / (std::sqrt(v / (1.0 - cfg.beta2)) + cfg.eps);
  const double x1 = x;
  g = 2.0 * x;
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
  x -= cfg.lr * (m / (1.0 - cfg.beta1 * cfg.beta1)) /
       (std::sqrt(v / (1.0 - cfg.beta2 * cfg.beta2)) + cfg.eps);
  const double x2 = x;

  p.grad.values[0] = 2.0 * p.value.values[0];
  adam_step({&p}, cfg, 1);
  CHECK(p.value.values[0] == doctest::Approx(x1).epsilon(1e-14));
  p.grad.values[0] = 2.0 * p.value.values[0];
  adam_step({&p}, cfg, 2);
  CHECK(p.value.values[0] == doctest::Approx(x2).epsilon(1e-14));
}

TEST_CASE("adam: non-finite gradient aborts with a diagnostic") {
  Parameter p("p", {1});
  p.grad.values[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step({&p}, AdamConfig{}, 1), data_error);
}

TEST_CASE("finite_diff_check calibration cases") {
  Tensor x({5});
  x.values = {0.3, -1.2, 2.0, 0.7, -0.1};
  Tensor ones({5});
  ones.fill(1.0);
  auto fsum = [](const Tensor& t) {
    double s = 0;
    for (double v : t.values) s += v;
    return s;
  };
  CHECK(finite_diff_check(fsum, x, ones, 1e-5) <= 1e-10);

  Tensor x2({2});
  x2.values = {1.0, 2.0};
  Tensor grad({2});
  grad.values = {2.0, 4.0};
  auto fsq = [](const Tensor& t) {
    double s = 0;
    for (double v : t.values) s += v * v;
    return s;
  };
  CHECK(finite_diff_check(fsq, x2, grad, 1e-5) <= 1e-8);

  // deliberately wrong gradient (x2) must be flagged far above tolerance
  Tensor wrong({2});
  wrong.values = {4.0, 8.0};
  const double err = finite_diff_check(fsq, x2, wrong, 1e-5);
  CHECK(err > 0.4);
  CHECK(err > 100 * 1e-4);
}

TEST_CASE("stack forward/backward round trip with finite differences") {
  Rng rng(2024);
  Stack stack;
  stack.add_conv("c1", 2, 4, 3, 1, 1);
  stack.add_leaky_relu(0.1);
  stack.add_conv("c2", 4, 3, 3, 2, 1);
  stack.add_leaky_relu(0.1);
  stack.init(rng);

  Tensor x = random_tensor({2, 6, 6}, rng);
  std::vector<Tensor> cache;
  Tensor out = stack.forward(x, &cache);
  REQUIRE(out.shape == std::vector<int>{3, 3, 3});
  Tensor proj = random_tensor({3, 3, 3}, rng);

  Tensor gin = stack.backward(proj, cache, true);

  auto fn = [&](const Tensor& t) { return projected_loss(stack.forward(t, nullptr), proj); };
  CHECK(finite_diff_check(fn, x, gin, 1e-5) <= 1e-4);

  // parameter gradient of the first conv, via finite differences
  Parameter& w1 = stack.entries[0].w;
  Tensor analytic = w1.grad;
  auto fn_w = [&](const Tensor& t) {
    Stack probe = stack;
    probe.entries[0].w.value = t;
    return projected_loss(probe.forward(x, nullptr), proj);
  };
  CHECK(finite_diff_check(fn_w, w1.value, analytic, 1e-5) <= 1e-4);

  // frozen pass accumulates no parameter gradients
  Stack frozen = stack;
  for (auto& e : frozen.entries)
    if (e.spec.has_params()) {
      e.w.zero_grad();
      e.b.zero_grad();
    }
  frozen.backward(proj, cache, false);
  for (auto& e : frozen.entries)
    if (e.spec.has_params())
      for (double v : e.w.grad.values) CHECK(v == 0.0);
}
