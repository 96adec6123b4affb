#include "gdee/marginal.hpp"

#include <cmath>
#include <stdexcept>

#include "gdee/rng.hpp"

namespace gdee {

QuadratureRule gauss_legendre(int n, double a, double b) {
  if (n < 1) throw std::invalid_argument("quadrature order must be >= 1");
  if (!(a < b)) throw std::invalid_argument("interval must satisfy a < b");

  QuadratureRule rule;
  rule.order = n;
  rule.nodes.resize(n);
  rule.weights.resize(n);

  const double pi = 3.14159265358979323846;
  const int m = (n + 1) / 2;  // roots come in +/- pairs
  for (int i = 0; i < m; ++i) {
    // Tricomi-style initial guess, then Newton on P_n.
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Recurrence for P_n(x) and P_n'(x).
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;

  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = mid + half * rule.nodes[i];
    rule.weights[i] *= half;
  }
  return rule;
}

double integrate(const QuadratureRule& rule,
                 const std::function<double(double)>& f) {
  double s = 0.0;
  for (int i = 0; i < rule.order; ++i) s += rule.weights[i] * f(rule.nodes[i]);
  return s;
}

double tanh_sinh(const std::function<double(double)>& f, double a, double b,
                 int max_levels, double tol) {
  if (!(a < b)) throw std::invalid_argument("interval must satisfy a < b");
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  const double pi_half = 1.5707963267948966;

  const auto eval = [&](double u) -> double {
    // x = mid + half*tanh(pi/2 sinh u); weight = half * pi/2 cosh u / cosh^2
    const double s = std::sinh(u);
    const double c = std::cosh(u);
    const double t = pi_half * s;
    const double x = mid + half * std::tanh(t);
    if (x <= a || x >= b) return 0.0;
    const double ch = std::cosh(t);
    const double w = half * pi_half * c / (ch * ch);
    const double fv = f(x);
    if (!std::isfinite(fv)) return 0.0;  // integrable endpoint singularity
    return w * fv;
  };

  const double umax = 4.0;
  double h = 1.0;
  double sum = eval(0.0);
  for (double u = h; u <= umax; u += h) sum += eval(u) + eval(-u);
  double prev = h * sum;
  for (int level = 1; level <= max_levels; ++level) {
    h *= 0.5;
    for (double u = h; u <= umax; u += 2.0 * h) sum += eval(u) + eval(-u);
    const double cur = h * sum;
    if (level >= 3 && std::abs(cur - prev) <= tol * std::max(1.0, std::abs(cur)))
      return cur;
    prev = cur;
  }
  return prev;
}

ErrorMetrics error_metrics(const GridMatrix& pred, const GridMatrix& ref) {
  if (pred.rows != ref.rows || pred.cols != ref.cols)
    throw std::invalid_argument("error_metrics: shape mismatch");

  GridMatrix err{pred.rows, pred.cols, {}};
  err.data.resize(pred.data.size());
  double fro2 = 0.0, ref2 = 0.0, max_abs = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const double e = pred.data[i] - ref.data[i];
    err.data[i] = e;
    fro2 += e * e;
    ref2 += ref.data[i] * ref.data[i];
    max_abs = std::max(max_abs, std::abs(e));
  }

  ErrorMetrics m;
  m.max_abs = max_abs;
  if (ref2 > 0.0) {
    m.rel_l2 = std::sqrt(fro2 / ref2);
  } else {
    m.rel_l2 = std::sqrt(fro2);
    m.reference_zero = true;
  }
  m.spectral_norm = spectral_norm(err);
  return m;
}

double spectral_norm(const GridMatrix& m, uint64_t seed) {
  if (m.rows == 0 || m.cols == 0) return 0.0;
  double fro2 = 0.0;
  for (double v : m.data) fro2 += v * v;
  if (fro2 == 0.0) return 0.0;

  Rng rng(seed);
  std::vector<double> v(m.cols), av(m.rows), w(m.cols);
  for (double& x : v) x = rng.normal();
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;

  double sigma = 0.0;
  for (int iter = 0; iter < 10000; ++iter) {
    // w = E^T (E v)
    for (int r = 0; r < m.rows; ++r) {
      double s = 0.0;
      const double* row = m.data.data() + static_cast<size_t>(r) * m.cols;
      for (int c = 0; c < m.cols; ++c) s += row[c] * v[c];
      av[r] = s;
    }
    for (int c = 0; c < m.cols; ++c) w[c] = 0.0;
    for (int r = 0; r < m.rows; ++r) {
      const double* row = m.data.data() + static_cast<size_t>(r) * m.cols;
      const double avr = av[r];
      for (int c = 0; c < m.cols; ++c) w[c] += row[c] * avr;
    }
    double wn = 0.0;
    for (double x : w) wn += x * x;
    wn = std::sqrt(wn);
    if (wn == 0.0) return 0.0;
    const double sigma_new = std::sqrt(wn);  // ||E^T E v|| -> sigma^2
    for (int c = 0; c < m.cols; ++c) v[c] = w[c] / wn;
    if (iter > 0 && std::abs(sigma_new - sigma) <= 1e-10 * std::max(1.0, sigma_new)) {
      sigma = sigma_new;
      break;
    }
    sigma = sigma_new;
  }
  return sigma;
}

std::vector<double> marginalize(
    const std::function<double(double, double, double)>& joint, double t,
    const std::vector<double>& x_grid, const QuadratureRule& rule) {
  std::vector<double> out(x_grid.size(), 0.0);
  for (size_t i = 0; i < x_grid.size(); ++i) {
    double s = 0.0;
    for (int k = 0; k < rule.order; ++k)
      s += rule.weights[k] * joint(x_grid[i], rule.nodes[k], t);
    out[i] = s;
  }
  return out;
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("trapezoid: bad grid");
  double s = 0.0;
  for (size_t i = 0; i + 1 < x.size(); ++i)
    s += 0.5 * (x[i + 1] - x[i]) * (y[i] + y[i + 1]);
  return s;
}

}  // namespace gdee
