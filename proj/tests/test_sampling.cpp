#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "gdee/sampling.hpp"
#include "gdee/training.hpp"

using namespace gdee;

namespace {

InputScaler identity_scaler() {
  InputScaler s;
  s.lo = {-1.0, -1.0, -1.0};
  s.hi = {1.0, 1.0, 1.0};
  return s;
}

}  // namespace

TEST_CASE("latin hypercube stratification") {
  const std::vector<Interval> box = {{0.0, 1.0}, {0.0, 1.0}};
  const auto pts = lhs_sample(4, box, 5);
  REQUIRE(pts.size() == 4);
  for (int dim = 0; dim < 2; ++dim) {
    std::vector<int> strata(4, 0);
    for (const auto& p : pts) {
      CHECK(p[dim] >= 0.0);
      CHECK(p[dim] < 1.0);
      ++strata[static_cast<int>(p[dim] * 4)];
    }
    for (int c : strata) CHECK(c == 1);
  }

  // Property holds for larger n too.
  const auto many = lhs_sample(128, box, 6);
  for (int dim = 0; dim < 2; ++dim) {
    std::vector<int> strata(128, 0);
    for (const auto& p : many) ++strata[static_cast<int>(p[dim] * 128)];
    for (int c : strata) CHECK(c == 1);
  }
}

TEST_CASE("latin hypercube edge cases and determinism") {
  const std::vector<Interval> box = {{-2.0, 3.0}};
  const auto one = lhs_sample(1, box, 9);
  REQUIRE(one.size() == 1);
  CHECK(one[0][0] >= -2.0);
  CHECK(one[0][0] < 3.0);

  CHECK(lhs_sample(16, box, 77) == lhs_sample(16, box, 77));
  CHECK(lhs_sample(16, box, 77) != lhs_sample(16, box, 78));
}

TEST_CASE("gradient weight basics") {
  const std::vector<int> dims = {3, 1};
  MlpEvaluator eval(dims, Activation::Tanh, identity_scaler());

  // All-zero network.
  std::vector<double> zero(eval.num_params(), 0.0);
  CHECK(gradient_weight(eval, zero, {0.3, -0.2, 0.8}) == 0.0);

  // f = x exactly: single linear layer with w = (1, 0, 0).
  std::vector<double> fx = {1.0, 0.0, 0.0, 0.0};
  CHECK(gradient_weight(eval, fx, {0.3, -0.2, 0.8}) ==
        doctest::Approx(1.0).epsilon(1e-14));

  // Random net: matches the finite-difference gradient norm.
  const NetworkParams net = init_glorot({3, 10, 10, 1}, Activation::Swish, 3);
  MlpEvaluator ev2({3, 10, 10, 1}, Activation::Swish, identity_scaler());
  const std::vector<double> flat = flatten_params(net);
  const std::array<double, 3> pt{0.1, 0.4, -0.6};
  const double w = gradient_weight(ev2, flat, pt);
  const auto f = [&](std::array<double, 3> q) { return ev2.forward(flat, q).p; };
  auto px = pt, mx = pt, pt2 = pt, mt2 = pt;
  px[0] += 1e-6;
  mx[0] -= 1e-6;
  pt2[2] += 1e-6;
  mt2[2] -= 1e-6;
  const double gx = (f(px) - f(mx)) / 2e-6;
  const double gt = (f(pt2) - f(mt2)) / 2e-6;
  CHECK(w == doctest::Approx(std::sqrt(gx * gx + gt * gt)).epsilon(1e-6));
}

TEST_CASE("importance resampling follows the weight field") {
  // A sharp two-slope network: |gradient| ~ 3 for x < 0 and ~ 1 for x > 0.
  const std::vector<int> dims = {3, 2, 1};
  NetworkParams net;
  net.layer_dims = dims;
  net.activation = Activation::Swish;
  net.weights = {{200.0, 0.0, 0.0, -200.0, 0.0, 0.0}, {1.0 / 200, 3.0 / 200}};
  net.biases = {{0.0, 0.0}, {0.0}};
  MlpEvaluator eval(dims, Activation::Swish, identity_scaler());
  const std::vector<double> flat = flatten_params(net);

  const std::array<Interval, 3> box = {
      Interval{-1.0, 1.0}, Interval{-1.0, 1.0}, Interval{-1.0, 1.0}};
  const auto pts = importance_resample(eval, flat, box, 10000, 10, 123);
  REQUIRE(pts.size() == 10000);
  int left = 0, right = 0;
  for (const auto& p : pts) {
    CHECK(p[0] >= -1.0);
    CHECK(p[0] <= 1.0);
    if (p[0] < -0.01)
      ++left;
    else if (p[0] > 0.01)
      ++right;
  }
  const double ratio = static_cast<double>(left) / right;
  CHECK(ratio > 2.7);
  CHECK(ratio < 3.3);
}

TEST_CASE("degenerate weights fall back to uniform selection") {
  const std::vector<int> dims = {3, 1};
  MlpEvaluator eval(dims, Activation::Tanh, identity_scaler());
  std::vector<double> zero(eval.num_params(), 0.0);
  const std::array<Interval, 3> box = {
      Interval{0.0, 1.0}, Interval{0.0, 1.0}, Interval{0.0, 1.0}};
  const auto pts = importance_resample(eval, zero, box, 2000, 10, 321);
  REQUIRE(pts.size() == 2000);
  // Statistically uniform in x: mean near 0.5, quartile counts balanced.
  double mean = 0.0;
  int low = 0;
  for (const auto& p : pts) {
    mean += p[0];
    if (p[0] < 0.5) ++low;
  }
  mean /= pts.size();
  CHECK(mean == doctest::Approx(0.5).epsilon(0.05));
  CHECK(low > 900);
  CHECK(low < 1100);

  CHECK(importance_resample(eval, zero, box, 0, 10, 1).empty());
}

TEST_CASE("collocation set construction") {
  const GdeeProblem problem = make_problem(CaseId::Sdof);
  const std::vector<int> dims = {3, 8, 1};
  const NetworkParams net = init_glorot(dims, Activation::Tanh, 4);
  const std::vector<double> flat = flatten_params(net);
  MlpEvaluator eval(dims, Activation::Tanh, scaler_for(problem));

  SUBCASE("pure stratified interior when the fraction is zero") {
    const auto set = build_collocation(problem, eval, flat, 200, 50, 0.0, 1, 0);
    CHECK(set.interior.size() == 200);
    CHECK(set.anchor.size() == 50);
  }

  SUBCASE("split counts at fraction 0.2") {
    const auto set =
        build_collocation(problem, eval, flat, 2500, 500, 0.2, 1, 0);
    CHECK(set.interior.size() == 2500);  // 2000 stratified + 500 importance
    CHECK(set.anchor.size() == 500);
  }

  SUBCASE("all points respect the box; anchors sit at the window start") {
    const auto set =
        build_collocation(problem, eval, flat, 300, 80, 0.3, 7, 5);
    for (const auto& p : set.interior) {
      CHECK(p[0] >= problem.x_lo);
      CHECK(p[0] <= problem.x_hi);
      CHECK(p[1] >= problem.theta_min);
      CHECK(p[1] <= problem.theta_max);
      CHECK(p[2] >= problem.t_min);
      CHECK(p[2] <= problem.t_max);
    }
    for (const auto& a : set.anchor) {
      CHECK(a[0] >= problem.x_lo);
      CHECK(a[0] <= problem.x_hi);
      CHECK(a[1] >= problem.theta_min);
      CHECK(a[1] <= problem.theta_max);
    }
    // Anchor time is t_min by construction (stored as 2-vectors).
  }

  SUBCASE("(seed, epoch) reproducibility") {
    const auto a = build_collocation(problem, eval, flat, 100, 30, 0.2, 9, 3);
    const auto b = build_collocation(problem, eval, flat, 100, 30, 0.2, 9, 3);
    CHECK(a.interior == b.interior);
    CHECK(a.anchor == b.anchor);
    const auto c = build_collocation(problem, eval, flat, 100, 30, 0.2, 9, 4);
    CHECK(a.interior != c.interior);
  }
}
