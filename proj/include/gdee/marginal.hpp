#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace gdee {

/// Gauss-Legendre rule mapped to [a, b]; exact for polynomials of degree
/// <= 2n-1.
struct QuadratureRule {
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Nodes via Newton iteration on the Legendre polynomial, converged to 1e-15
/// on [-1,1], then mapped affinely.
QuadratureRule gauss_legendre(int n, double a, double b);

double integrate(const QuadratureRule& rule,
                 const std::function<double(double)>& f);

/// Double-exponential (tanh-sinh) quadrature on [a, b]. Robust to integrable
/// endpoint singularities; used to integrate exact marginals over x.
double tanh_sinh(const std::function<double(double)>& f, double a, double b,
                 int max_levels = 12, double tol = 1e-12);

/// Dense row-major matrix of grid values.
struct GridMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return data[static_cast<size_t>(r) * cols + c];
  }
};

struct ErrorMetrics {
  double rel_l2 = 0.0;   // ||E||_F / ||R||_F (absolute ||E||_F when flagged)
  double max_abs = 0.0;
  double spectral_norm = 0.0;  // largest singular value of E
  bool reference_zero = false;
};

/// Error metrics between prediction and reference grids of equal shape.
/// Spectral norm by power iteration on E^T E (tol 1e-10, <= 1e4 iterations).
ErrorMetrics error_metrics(const GridMatrix& pred, const GridMatrix& ref);

/// Largest singular value of a matrix (exposed for tests).
double spectral_norm(const GridMatrix& m, uint64_t seed = 12345);

/// Quadrature marginalization of a joint density over theta:
/// p(x, t) = sum_k w_k joint(x, theta_k, t).
std::vector<double> marginalize(
    const std::function<double(double x, double theta, double t)>& joint,
    double t, const std::vector<double>& x_grid, const QuadratureRule& rule);

/// Trapezoid integral over a (not necessarily uniform) grid.
double trapezoid(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace gdee
