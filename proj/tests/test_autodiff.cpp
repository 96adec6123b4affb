#include <doctest.h>

#include <cmath>
#include <vector>

#include "gdee/autodiff.hpp"
#include "gdee/net.hpp"
#include "gdee/rng.hpp"

using namespace gdee;

namespace {

InputScaler identity_scaler() {
  InputScaler s;
  s.lo = {-1.0, -1.0, -1.0};
  s.hi = {1.0, 1.0, 1.0};
  return s;
}

// A wide-box scaler so the identity map is exact even for inputs outside
// [-1,1]: scale(v) = v with lo=-1, hi=1 works for any v.
}  // namespace

TEST_CASE("affine map: value and input gradient") {
  // Single linear layer f = w.x + b with w = (2,0,0), b = 1.
  NetworkParams net;
  net.layer_dims = {3, 1};
  net.weights = {{2.0, 0.0, 0.0}};
  net.biases = {{1.0}};
  net.activation = Activation::Tanh;
  const auto r = forward_with_input_tangents(net, identity_scaler(), {3.0, 0.0, 0.0});
  CHECK(r.value == doctest::Approx(7.0).epsilon(1e-14));
  CHECK(r.input_grad[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r.input_grad[1] == 0.0);
  CHECK(r.input_grad[2] == 0.0);
}

TEST_CASE("dead input has exactly zero gradient") {
  // Zero out the theta column of the first layer.
  NetworkParams net = init_glorot({3, 10, 10, 1}, Activation::Swish, 5);
  for (int row = 0; row < 10; ++row) net.weights[0][row * 3 + 1] = 0.0;
  const auto r =
      forward_with_input_tangents(net, identity_scaler(), {0.3, -0.4, 0.8});
  CHECK(r.input_grad[1] == 0.0);
}

TEST_CASE("input gradient matches finite differences on a 4x20 net") {
  const NetworkParams net =
      init_glorot({3, 20, 20, 20, 20, 1}, Activation::Tanh, 11);
  const InputScaler s = identity_scaler();
  const std::array<double, 3> pt{0.1, 0.5, 1.0};
  const auto r = forward_with_input_tangents(net, s, pt);
  for (int d = 0; d < 3; ++d) {
    std::array<double, 3> pp = pt, pm = pt;
    pp[d] += 1e-5;
    pm[d] -= 1e-5;
    const double fd =
        (forward(net, s, pp) - forward(net, s, pm)) / 2e-5;
    CHECK(r.input_grad[d] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("param gradient: quadratic and constant roots") {
  ExprTape tape;
  // root = sum of w_i^2 over 3 parameter leaves.
  std::vector<ExprTape::NodeId> w;
  for (int i = 0; i < 3; ++i) w.push_back(tape.param_leaf(i));
  ExprTape::NodeId root = tape.mul(w[0], w[0]);
  root = tape.add(root, tape.mul(w[1], w[1]));
  root = tape.add(root, tape.mul(w[2], w[2]));
  const ExprTape::NodeId konst = tape.constant(4.0);

  const std::vector<double> params = {1.5, -2.0, 0.25};
  tape.forward(params, {0.0, 0.0, 0.0});
  CHECK(tape.value(root).p ==
        doctest::Approx(1.5 * 1.5 + 4.0 + 0.0625).epsilon(1e-15));

  std::vector<double> grad = param_gradient(tape, root, 3);
  for (int i = 0; i < 3; ++i)
    CHECK(grad[i] == doctest::Approx(2.0 * params[i]).epsilon(1e-15));

  grad = param_gradient(tape, konst, 3);
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("finite difference probe basics") {
  const auto sq = [](const std::vector<double>& p) { return p[0] * p[0]; };
  CHECK(finite_diff_probe(sq, {3.0}, 1e-5)[0] == doctest::Approx(6.0).epsilon(1e-8));
  const auto sine = [](const std::vector<double>& p) { return std::sin(p[0]); };
  CHECK(finite_diff_probe(sine, {0.0}, 1e-5)[0] ==
        doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("polynomial composition derivatives are exact") {
  // f(a, b) = (a*b + 2a)^? degree-3 composition: g = a*b*a + b.
  ExprTape tape;
  const auto a = tape.param_leaf(0);
  const auto b = tape.param_leaf(1);
  const auto root = tape.add(tape.mul(tape.mul(a, b), a), b);  // a^2 b + b
  const std::vector<double> params = {1.3, -0.7};
  tape.forward(params, {0.0, 0.0, 0.0});
  CHECK(tape.value(root).p ==
        doctest::Approx(params[0] * params[0] * params[1] + params[1])
            .epsilon(1e-14));
  const auto grad = param_gradient(tape, root, 2);
  CHECK(grad[0] == doctest::Approx(2 * params[0] * params[1]).epsilon(1e-14));
  CHECK(grad[1] == doctest::Approx(params[0] * params[0] + 1).epsilon(1e-14));
}

TEST_CASE("derivatives are linear in the function") {
  // d(3f - 2g) = 3 df - 2 dg exactly, on tangent components.
  const NetworkParams f = init_glorot({3, 8, 1}, Activation::Tanh, 1);
  const NetworkParams g = init_glorot({3, 8, 1}, Activation::Tanh, 2);
  const InputScaler s = identity_scaler();
  const std::array<double, 3> pt{0.2, -0.1, 0.7};
  const auto rf = forward_with_input_tangents(f, s, pt);
  const auto rg = forward_with_input_tangents(g, s, pt);

  // Combine into one net with block-diagonal hidden layer.
  NetworkParams both;
  both.layer_dims = {3, 16, 1};
  both.activation = Activation::Tanh;
  both.weights.resize(2);
  both.biases.resize(2);
  both.weights[0].resize(16 * 3);
  both.biases[0].resize(16);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 3; ++c) {
      both.weights[0][r * 3 + c] = f.weights[0][r * 3 + c];
      both.weights[0][(8 + r) * 3 + c] = g.weights[0][r * 3 + c];
    }
  for (int r = 0; r < 8; ++r) {
    both.biases[0][r] = f.biases[0][r];
    both.biases[0][8 + r] = g.biases[0][r];
  }
  both.weights[1].resize(16);
  for (int c = 0; c < 8; ++c) {
    both.weights[1][c] = 3.0 * f.weights[1][c];
    both.weights[1][8 + c] = -2.0 * g.weights[1][c];
  }
  both.biases[1] = {3.0 * f.biases[1][0] - 2.0 * g.biases[1][0]};

  const auto rb = forward_with_input_tangents(both, s, pt);
  CHECK(rb.value == doctest::Approx(3 * rf.value - 2 * rg.value).epsilon(1e-13));
  for (int d = 0; d < 3; ++d)
    CHECK(rb.input_grad[d] ==
          doctest::Approx(3 * rf.input_grad[d] - 2 * rg.input_grad[d])
              .epsilon(1e-12));
}

TEST_CASE("tape and fused evaluator agree bit-tightly") {
  for (Activation act : {Activation::Tanh, Activation::Swish}) {
    const std::vector<int> dims = {3, 20, 20, 20, 20, 1};
    const NetworkParams net = init_glorot(dims, act, 77);
    InputScaler s;
    s.lo = {-0.11, 0.785, 0.9};
    s.hi = {0.11, 2.356, 1.1};
    const std::vector<double> flat = flatten_params(net);

    NetworkTape tape(dims, act, s);
    MlpEvaluator eval(dims, act, s);
    Rng rng(3);
    for (int rep = 0; rep < 10; ++rep) {
      const std::array<double, 3> pt{rng.uniform(-0.11, 0.11),
                                     rng.uniform(0.785, 2.356),
                                     rng.uniform(0.9, 1.1)};
      const TangentBundle a = tape.eval(flat, pt);
      const TangentBundle b = eval.forward(flat, pt);
      CHECK(a.p == doctest::Approx(b.p).epsilon(1e-13));
      for (int d = 0; d < 3; ++d)
        CHECK(a.t[d] == doctest::Approx(b.t[d]).epsilon(1e-12));

      // Parameter gradients of the same seeded scalar.
      TangentBundle seed;
      seed.p = 0.3;
      seed.t = {1.1, -0.2, 0.8};
      std::vector<double> ga(flat.size(), 0.0), gb(flat.size(), 0.0);
      tape.accumulate_gradient(seed, ga);
      eval.backward(flat, seed, gb);
      for (size_t i = 0; i < flat.size(); i += 37)
        CHECK(ga[i] == doctest::Approx(gb[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("mixed second order: d/dparam of input tangents vs finite differences") {
  const std::vector<int> dims = {3, 20, 20, 20, 20, 1};
  for (Activation act : {Activation::Tanh, Activation::Swish}) {
    const NetworkParams net = init_glorot(dims, act, 21);
    InputScaler s = identity_scaler();
    std::vector<double> flat = flatten_params(net);
    MlpEvaluator eval(dims, act, s);
    const std::array<double, 3> pt{0.1, 0.5, 1.0};

    // Gradient of dN/dx w.r.t. parameters (seed selects tangent 0).
    eval.forward(flat, pt);
    TangentBundle seed;
    seed.t = {1.0, 0.0, 0.0};
    std::vector<double> grad(flat.size(), 0.0);
    eval.backward(flat, seed, grad);

    Rng rng(55);
    for (int rep = 0; rep < 20; ++rep) {
      const size_t i = rng.below(flat.size());
      const double step = 1e-6 * std::max(1.0, std::abs(flat[i]));
      const double keep = flat[i];
      flat[i] = keep + step;
      const double fp = eval.forward(flat, pt).t[0];
      flat[i] = keep - step;
      const double fm = eval.forward(flat, pt).t[0];
      flat[i] = keep;
      const double fd = (fp - fm) / (2 * step);
      const double scale = std::max(1e-6, std::abs(fd));
      CHECK(std::abs(grad[i] - fd) / scale < 1e-5);
    }
  }
}

TEST_CASE("evaluation is deterministic") {
  const std::vector<int> dims = {3, 20, 20, 1};
  const NetworkParams net = init_glorot(dims, Activation::Swish, 8);
  const std::vector<double> flat = flatten_params(net);
  MlpEvaluator e1(dims, Activation::Swish, identity_scaler());
  MlpEvaluator e2(dims, Activation::Swish, identity_scaler());
  const std::array<double, 3> pt{0.17, -0.52, 0.91};
  const TangentBundle a = e1.forward(flat, pt);
  const TangentBundle b = e2.forward(flat, pt);
  CHECK(a.p == b.p);
  for (int d = 0; d < 3; ++d) CHECK(a.t[d] == b.t[d]);
}

TEST_CASE("non-finite intermediates are reported") {
  ExprTape tape;
  const auto p = tape.param_leaf(0);
  const auto e = tape.mul(p, p);
  (void)e;
  const double huge = 1e308;
  CHECK_THROWS(tape.forward(std::vector<double>{huge}, {0.0, 0.0, 0.0}));
}
