#include <doctest.h>

#include <cmath>
#include <vector>

#include "gdee/marginal.hpp"
#include "gdee/rng.hpp"

using namespace gdee;

TEST_CASE("gauss-legendre low orders") {
  const QuadratureRule r1 = gauss_legendre(1, -1.0, 1.0);
  CHECK(r1.nodes[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r1.weights[0] == doctest::Approx(2.0).epsilon(1e-15));

  const QuadratureRule r2 = gauss_legendre(2, -1.0, 1.0);
  CHECK(r2.nodes[0] == doctest::Approx(-0.5773503).epsilon(1e-6));
  CHECK(r2.nodes[1] == doctest::Approx(0.5773503).epsilon(1e-6));
  CHECK(r2.weights[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r2.weights[1] == doctest::Approx(1.0).epsilon(1e-14));

  const QuadratureRule r5 = gauss_legendre(5, -1.0, 1.0);
  const double v = integrate(r5, [](double x) { return std::pow(x, 8); });
  CHECK(v == doctest::Approx(2.0 / 9.0).epsilon(1e-14));
}

TEST_CASE("weights sum to the interval length") {
  for (int n : {1, 2, 5, 16, 32, 256}) {
    const QuadratureRule r = gauss_legendre(n, 0.25, 2.75);
    double sum = 0.0;
    for (double w : r.weights) sum += w;
    CHECK(sum == doctest::Approx(2.5).epsilon(1e-12));
  }
}

TEST_CASE("exactness for random polynomials of degree <= 2n-1") {
  Rng rng(17);
  for (int n : {2, 5, 16, 32}) {
    const QuadratureRule r = gauss_legendre(n, -1.0, 1.0);
    const int deg = 2 * n - 1;
    std::vector<double> coeff(deg + 1);
    for (double& c : coeff) c = rng.uniform(-1.0, 1.0);
    const auto poly = [&](double x) {
      double acc = 0.0;
      for (int k = deg; k >= 0; --k) acc = acc * x + coeff[k];
      return acc;
    };
    // Exact integral: only even powers contribute on [-1,1].
    double exact = 0.0;
    for (int k = 0; k <= deg; k += 2) exact += coeff[k] * 2.0 / (k + 1);
    CHECK(integrate(r, poly) == doctest::Approx(exact).epsilon(1e-12));
  }
}

TEST_CASE("affine map consistency") {
  const double a = 0.3, b = 1.9;
  const auto f = [](double x) { return std::exp(-x) * std::sin(3 * x); };
  const QuadratureRule rab = gauss_legendre(24, a, b);
  const QuadratureRule r11 = gauss_legendre(24, -1.0, 1.0);
  const double direct = integrate(rab, f);
  const double mapped = integrate(r11, [&](double u) {
    return f(0.5 * (a + b) + 0.5 * (b - a) * u) * 0.5 * (b - a);
  });
  CHECK(direct == doctest::Approx(mapped).epsilon(1e-13));
}

TEST_CASE("marginalize basics") {
  const QuadratureRule rule = gauss_legendre(16, 0.5, 2.5);
  const std::vector<double> xs = {-1.0, 0.0, 2.0};

  const auto zero = [](double, double, double) { return 0.0; };
  for (double v : marginalize(zero, 1.0, xs, rule)) CHECK(v == 0.0);

  const auto constant = [](double, double, double) { return 0.7; };
  for (double v : marginalize(constant, 1.0, xs, rule))
    CHECK(v == doctest::Approx(0.7 * 2.0).epsilon(1e-13));
}

TEST_CASE("error metrics basics and sanity bracket") {
  GridMatrix ref{2, 2, {1.0, 2.0, 3.0, 4.0}};
  CHECK(error_metrics(ref, ref).rel_l2 == 0.0);
  CHECK(error_metrics(ref, ref).max_abs == 0.0);
  CHECK(error_metrics(ref, ref).spectral_norm == 0.0);

  GridMatrix pred{2, 2, {4.0, 2.0, 3.0, 5.0}};  // E = diag(3, 1)
  const ErrorMetrics m = error_metrics(pred, ref);
  CHECK(m.max_abs == doctest::Approx(3.0));
  CHECK(m.spectral_norm == doctest::Approx(3.0).epsilon(1e-9));
  const double fro = std::sqrt(9.0 + 1.0);
  CHECK(m.rel_l2 == doctest::Approx(fro / std::sqrt(30.0)).epsilon(1e-12));
  CHECK(m.spectral_norm <= fro + 1e-12);
  CHECK(m.spectral_norm >= fro / std::sqrt(2.0) - 1e-12);

  GridMatrix zero{2, 2, {0.0, 0.0, 0.0, 0.0}};
  const ErrorMetrics z = error_metrics(pred, zero);
  CHECK(z.reference_zero);
  CHECK(z.rel_l2 == doctest::Approx(std::sqrt(16 + 4 + 9 + 25)));
}

TEST_CASE("power iteration agrees with restarted consensus") {
  Rng rng(2024);
  GridMatrix e{50, 50, {}};
  e.data.resize(2500);
  for (double& v : e.data) v = rng.uniform(-1.0, 1.0);

  const double base = spectral_norm(e);
  double best = 0.0;
  for (uint64_t s = 1; s <= 100; ++s)
    best = std::max(best, spectral_norm(e, s * 7919));
  CHECK(base == doctest::Approx(best).epsilon(1e-8));

  double fro = 0.0;
  for (double v : e.data) fro += v * v;
  fro = std::sqrt(fro);
  CHECK(base <= fro + 1e-10);
  CHECK(base >= fro / std::sqrt(50.0) - 1e-10);
}

TEST_CASE("tanh-sinh handles integrable endpoint singularities") {
  const double v =
      tanh_sinh([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0);
  CHECK(v == doctest::Approx(2.0).epsilon(1e-8));
  const double w = tanh_sinh([](double x) { return std::sin(x); }, 0.0, 3.0);
  CHECK(w == doctest::Approx(1.0 - std::cos(3.0)).epsilon(1e-12));
}

TEST_CASE("trapezoid on a nonuniform grid") {
  const std::vector<double> x = {0.0, 0.5, 1.5, 2.0};
  const std::vector<double> y = {0.0, 0.5, 1.5, 2.0};  // y = x
  CHECK(trapezoid(x, y) == doctest::Approx(2.0).epsilon(1e-14));
}
