#pragma once

#include <string>
#include <vector>

namespace gdee {

enum class CaseId { Sdof, BeamFree, BeamForced };

CaseId case_from_name(const std::string& name);
const char* case_name(CaseId id);

/// First nondimensional cantilever eigenvalue (l = 1): smallest positive root
/// of 1 + cos(mu) cosh(mu) = 0, bisected to 1e-12.
double cantilever_mu1();

/// First cantilever mode shape at position x for beam length l.
double mode_shape(double x, double l);

/// One benchmark case: deterministic response X(theta, t), its drift, the
/// uniform parameter density, and the training box.
struct GdeeProblem {
  CaseId id = CaseId::Sdof;
  double theta_min = 0.0, theta_max = 1.0;  // uniform p_theta
  double t_min = 0.0, t_max = 1.0;
  double x_lo = -1.0, x_hi = 1.0;  // padded response image
  double h = 0.02;                 // mollification bandwidth (response units)

  // Case constants.
  double sdof_x0 = 0.1, sdof_v0 = 0.0;         // Sdof (theta = omega)
  double beam_l = 1.0;                         // both beam cases
  double forced_alpha = 1.0, forced_omega = 2.0, forced_q0 = 1.0;  // BeamForced

  double theta_density() const { return 1.0 / (theta_max - theta_min); }
  bool theta_in_window(double theta) const {
    return theta >= theta_min && theta <= theta_max;
  }
};

/// Builder with the per-case defaults; x-domain is the (theta, t)-box image
/// of the response scanned on a 512x512 grid, padded by x_pad per side, and
/// h = h_rel * (x_hi - x_lo).
struct ProblemConfig {
  CaseId id = CaseId::Sdof;
  double theta_min = 0.0, theta_max = 0.0;  // <= means case default
  double t_min = 0.9, t_max = 1.1;
  double x_pad = 0.1;
  double h_rel = 0.02;
};

GdeeProblem make_problem(const ProblemConfig& cfg);
GdeeProblem make_problem(CaseId id);

/// Deterministic response of the tracked location for parameter theta.
double characteristic_response(const GdeeProblem& p, double theta, double t);

/// Time derivative of the characteristic response (the GDEE advection
/// coefficient).
double drift(const GdeeProblem& p, double theta, double t);

/// d X / d theta, used for delta-composition densities.
double dresponse_dtheta(const GdeeProblem& p, double theta, double t);

struct RootInfo {
  double theta = 0.0;
  double abs_dx_dtheta = 0.0;
  bool singular = false;  // |dX/dtheta| < 1e-12 at the root
};

struct DeltaRoots {
  std::vector<RootInfo> roots;
  bool any_singular = false;
};

/// All theta in [theta_min, theta_max] with X(theta, t) = x, found by
/// bracketing on a 2048-point grid and bisection to 1e-12.
DeltaRoots find_delta_roots(const GdeeProblem& p, double x, double t);

/// Exact marginal density: sum over roots of p_theta / |dX/dtheta|.
/// Returns +inf when a root is singular (integrable singularity).
double exact_marginal(const GdeeProblem& p, double x, double t);

/// Closed-form root cross-checks (arccos for Sdof, arctan for BeamForced).
/// Returns candidate roots inside the theta window.
std::vector<double> closed_form_roots(const GdeeProblem& p, double x, double t);

/// Gaussian-mollified joint density delta_h(x - X(theta,t)) * p_theta(theta).
/// An exact GDEE solution: the drift does not depend on x, so mollification
/// commutes with the transport.
double mollified_joint(const GdeeProblem& p, double x, double theta, double t);

/// d/dx and d/dt of the mollified joint (analytic).
double mollified_joint_dx(const GdeeProblem& p, double x, double theta, double t);
double mollified_joint_dt(const GdeeProblem& p, double x, double theta, double t);

/// delta_h-smoothed marginal: Gauss-Legendre integral of the mollified joint
/// over the theta window.
double smoothed_marginal(const GdeeProblem& p, double x, double t,
                         int quad_order = 256);

/// Integral of the exact marginal over x at fixed t, splitting at fold points
/// (critical theta of X) and window-edge images, with tanh-sinh quadrature on
/// each smooth piece. Independent normalization check.
double exact_marginal_integral(const GdeeProblem& p, double t);

/// theta values in the open window where dX/dtheta = 0 (fold points).
std::vector<double> critical_thetas(const GdeeProblem& p, double t);

}  // namespace gdee
