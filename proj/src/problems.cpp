#include "gdee/problems.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gdee/marginal.hpp"

namespace gdee {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSingularTol = 1e-12;

double freq_equation(double mu) { return 1.0 + std::cos(mu) * std::cosh(mu); }

}  // namespace

CaseId case_from_name(const std::string& name) {
  if (name == "sdof") return CaseId::Sdof;
  if (name == "beam_free") return CaseId::BeamFree;
  if (name == "beam_forced") return CaseId::BeamForced;
  throw std::invalid_argument("unknown case: " + name);
}

const char* case_name(CaseId id) {
  switch (id) {
    case CaseId::Sdof: return "sdof";
    case CaseId::BeamFree: return "beam_free";
    case CaseId::BeamForced: return "beam_forced";
  }
  return "?";
}

double cantilever_mu1() {
  static const double mu = [] {
    double lo = 1.8, hi = 1.9;
    // freq_equation changes sign on (1.8, 1.9)
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (hi - lo < 1e-14) break;
      if (freq_equation(lo) * freq_equation(mid) <= 0.0)
        hi = mid;
      else
        lo = mid;
    }
    return 0.5 * (lo + hi);
  }();
  return mu;
}

double mode_shape(double x, double l) {
  const double mu = cantilever_mu1() / l;
  const double ml = mu * l;
  const double coeff =
      (std::sin(ml) + std::sinh(ml)) / (std::cos(ml) + std::cosh(ml));
  return (std::cos(mu * x) - std::cosh(mu * x)) -
         coeff * (std::sin(mu * x) - std::sinh(mu * x));
}

namespace {

struct ForcedTerms {
  // X(psi, t) = base(t) + a(t) cos(psi) + b(t) sin(psi), all at the beam tip.
  double base, a, b;
};

ForcedTerms forced_terms(const GdeeProblem& p, double t) {
  const double mu = cantilever_mu1() / p.beam_l;
  const double w1 = p.forced_alpha * mu * mu;
  const double om = p.forced_omega;
  const double phi = mode_shape(p.beam_l, p.beam_l);
  const double k = p.forced_q0 / (om * om - w1 * w1);
  ForcedTerms ft;
  ft.base = (std::sin(w1 * t) + std::cos(w1 * t)) * phi;
  ft.a = k * phi * ((om / w1) * std::sin(w1 * t) - std::sin(om * t));
  ft.b = k * phi * (std::cos(w1 * t) - std::cos(om * t));
  return ft;
}

ForcedTerms forced_terms_dt(const GdeeProblem& p, double t) {
  const double mu = cantilever_mu1() / p.beam_l;
  const double w1 = p.forced_alpha * mu * mu;
  const double om = p.forced_omega;
  const double phi = mode_shape(p.beam_l, p.beam_l);
  const double k = p.forced_q0 / (om * om - w1 * w1);
  ForcedTerms ft;
  ft.base = w1 * (std::cos(w1 * t) - std::sin(w1 * t)) * phi;
  ft.a = k * phi * (om * std::cos(w1 * t) - om * std::cos(om * t));
  ft.b = k * phi * (-w1 * std::sin(w1 * t) + om * std::sin(om * t));
  return ft;
}

}  // namespace

double characteristic_response(const GdeeProblem& p, double theta, double t) {
  switch (p.id) {
    case CaseId::Sdof:
      return p.sdof_v0 / theta * std::sin(theta * t) +
             p.sdof_x0 * std::cos(theta * t);
    case CaseId::BeamFree: {
      const double mu = cantilever_mu1() / p.beam_l;
      const double w = theta * mu * mu;
      return mode_shape(p.beam_l, p.beam_l) *
             (std::cos(w * t) + std::sin(w * t));
    }
    case CaseId::BeamForced: {
      const ForcedTerms ft = forced_terms(p, t);
      return ft.base + ft.a * std::cos(theta) + ft.b * std::sin(theta);
    }
  }
  throw std::invalid_argument("unknown case id");
}

double drift(const GdeeProblem& p, double theta, double t) {
  switch (p.id) {
    case CaseId::Sdof:
      return p.sdof_v0 * std::cos(theta * t) -
             p.sdof_x0 * theta * std::sin(theta * t);
    case CaseId::BeamFree: {
      const double mu = cantilever_mu1() / p.beam_l;
      const double w = theta * mu * mu;
      return mode_shape(p.beam_l, p.beam_l) * w *
             (std::cos(w * t) - std::sin(w * t));
    }
    case CaseId::BeamForced: {
      const ForcedTerms ft = forced_terms_dt(p, t);
      return ft.base + ft.a * std::cos(theta) + ft.b * std::sin(theta);
    }
  }
  throw std::invalid_argument("unknown case id");
}

double dresponse_dtheta(const GdeeProblem& p, double theta, double t) {
  switch (p.id) {
    case CaseId::Sdof: {
      const double w = theta;
      return -p.sdof_v0 / (w * w) * std::sin(w * t) +
             p.sdof_v0 * t / w * std::cos(w * t) -
             p.sdof_x0 * t * std::sin(w * t);
    }
    case CaseId::BeamFree: {
      const double mu = cantilever_mu1() / p.beam_l;
      const double m2 = mu * mu;
      const double w = theta * m2;
      return mode_shape(p.beam_l, p.beam_l) * m2 * t *
             (std::cos(w * t) - std::sin(w * t));
    }
    case CaseId::BeamForced: {
      const ForcedTerms ft = forced_terms(p, t);
      return -ft.a * std::sin(theta) + ft.b * std::cos(theta);
    }
  }
  throw std::invalid_argument("unknown case id");
}

GdeeProblem make_problem(const ProblemConfig& cfg) {
  GdeeProblem p;
  p.id = cfg.id;
  p.t_min = cfg.t_min;
  p.t_max = cfg.t_max;
  p.theta_min = cfg.theta_min;
  p.theta_max = cfg.theta_max;
  if (!(p.theta_min < p.theta_max)) {
    p.theta_min = kPi / 4.0;
    p.theta_max = 3.0 * kPi / 4.0;
  }
  if (!(p.t_min < p.t_max))
    throw std::invalid_argument("time window must satisfy t_min < t_max");

  // Response image over the (theta, t) box on a 512x512 grid.
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const int n = 512;
  for (int i = 0; i < n; ++i) {
    const double theta =
        p.theta_min + (p.theta_max - p.theta_min) * i / (n - 1.0);
    for (int j = 0; j < n; ++j) {
      const double t = p.t_min + (p.t_max - p.t_min) * j / (n - 1.0);
      const double x = characteristic_response(p, theta, t);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  const double pad = cfg.x_pad * (hi - lo);
  p.x_lo = lo - pad;
  p.x_hi = hi + pad;
  p.h = cfg.h_rel * (p.x_hi - p.x_lo);
  return p;
}

GdeeProblem make_problem(CaseId id) {
  ProblemConfig cfg;
  cfg.id = id;
  return make_problem(cfg);
}

DeltaRoots find_delta_roots(const GdeeProblem& p, double x, double t) {
  DeltaRoots out;
  const auto f = [&](double theta) {
    return characteristic_response(p, theta, t) - x;
  };

  const auto record = [&](double theta) {
    for (const RootInfo& r : out.roots)
      if (std::abs(r.theta - theta) < 1e-9 * (p.theta_max - p.theta_min))
        return;  // duplicate from adjacent segments
    RootInfo r;
    r.theta = theta;
    r.abs_dx_dtheta = std::abs(dresponse_dtheta(p, theta, t));
    r.singular = r.abs_dx_dtheta < kSingularTol;
    if (r.singular) out.any_singular = true;
    out.roots.push_back(r);
  };

  // X is monotone between consecutive fold points, so a sign change of the
  // endpoint values brackets exactly one root per segment. Splitting at the
  // folds also catches root pairs that straddle a fold arbitrarily closely,
  // which a uniform grid scan would miss.
  std::vector<double> seg = {p.theta_min, p.theta_max};
  for (double th : critical_thetas(p, t)) seg.push_back(th);
  std::sort(seg.begin(), seg.end());

  if (f(p.theta_min) == 0.0) record(p.theta_min);
  for (size_t s = 0; s + 1 < seg.size(); ++s) {
    const double a = seg[s], b = seg[s + 1];
    if (b - a < 1e-14) continue;
    const double fa = f(a), fb = f(b);
    if (fb == 0.0) {
      record(b);
    } else if (fa * fb < 0.0) {
      double lo = a, hi = b, flo = fa;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if (flo * fm < 0.0) {
          hi = mid;
        } else {
          lo = mid;
          flo = fm;
        }
        if (hi - lo < 1e-15 * std::max(1.0, std::abs(lo))) break;
      }
      double theta = 0.5 * (lo + hi);
      // Newton polish for the last digits.
      for (int it = 0; it < 3; ++it) {
        const double d = dresponse_dtheta(p, theta, t);
        if (std::abs(d) < kSingularTol) break;
        const double step = f(theta) / d;
        const double next = theta - step;
        if (next < a || next > b) break;
        theta = next;
      }
      record(theta);
    }
  }
  std::sort(out.roots.begin(), out.roots.end(),
            [](const RootInfo& a, const RootInfo& b) { return a.theta < b.theta; });
  return out;
}

double exact_marginal(const GdeeProblem& p, double x, double t) {
  const DeltaRoots dr = find_delta_roots(p, x, t);
  if (dr.any_singular) return std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (const RootInfo& r : dr.roots) s += p.theta_density() / r.abs_dx_dtheta;
  return s;
}

std::vector<double> closed_form_roots(const GdeeProblem& p, double x, double t) {
  std::vector<double> roots;
  const auto keep = [&](double theta) {
    if (!p.theta_in_window(theta)) return;
    const double res = characteristic_response(p, theta, t) - x;
    const double scale = std::max(1.0, std::abs(x));
    if (std::abs(res) > 1e-8 * scale) return;
    for (double r : roots)
      if (std::abs(r - theta) < 1e-9) return;
    roots.push_back(theta);
  };

  switch (p.id) {
    case CaseId::Sdof: {
      // x0 cos(omega t) = x (zero initial velocity branch inversion)
      const double c = x / p.sdof_x0;
      if (std::abs(c) > 1.0) break;
      const double base = std::acos(c);
      for (int k = -1; k <= 2; ++k) {
        keep((base + 2.0 * kPi * k) / t);
        keep((-base + 2.0 * kPi * k) / t);
      }
      break;
    }
    case CaseId::BeamForced: {
      // c1 sin(psi) + c2 cos(psi) + c3 = 0, arctan branches.
      const ForcedTerms ft = forced_terms(p, t);
      const double c1 = ft.b, c2 = ft.a, c3 = ft.base - x;
      const double disc = c1 * c1 * (c1 * c1 + c2 * c2 - c3 * c3);
      if (disc < 0.0 || c1 == 0.0) break;
      const double sq = std::sqrt(disc);
      const double num1 = -c1 * c1 * c3 - c2 * sq;
      const double den1 = (-c2 * c3 + sq) * c1;
      const double num2 = c1 * c1 * c3 - c2 * sq;
      const double den2 = (c2 * c3 + sq) * c1;
      for (double psi0 : {std::atan(num1 / den1), std::atan(num2 / den2)}) {
        if (!std::isfinite(psi0)) continue;
        for (int k = -2; k <= 2; ++k) keep(psi0 + kPi * k);
      }
      break;
    }
    case CaseId::BeamFree: {
      // sqrt(2) |phi| sin(alpha mu^2 t + pi/4) inversion.
      const double mu = cantilever_mu1() / p.beam_l;
      const double phi = mode_shape(p.beam_l, p.beam_l);
      const double c = x / (std::sqrt(2.0) * phi);
      if (std::abs(c) > 1.0) break;
      const double base = std::asin(c);
      for (int k = -1; k <= 2; ++k) {
        keep((base + 2.0 * kPi * k - kPi / 4.0) / (mu * mu * t));
        keep((kPi - base + 2.0 * kPi * k - kPi / 4.0) / (mu * mu * t));
      }
      break;
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

double mollified_joint(const GdeeProblem& p, double x, double theta, double t) {
  if (!p.theta_in_window(theta)) return 0.0;
  const double u = x - characteristic_response(p, theta, t);
  const double h = p.h;
  const double g =
      std::exp(-0.5 * u * u / (h * h)) / (h * std::sqrt(2.0 * kPi));
  return g * p.theta_density();
}

double mollified_joint_dx(const GdeeProblem& p, double x, double theta,
                          double t) {
  const double u = x - characteristic_response(p, theta, t);
  return -u / (p.h * p.h) * mollified_joint(p, x, theta, t);
}

double mollified_joint_dt(const GdeeProblem& p, double x, double theta,
                          double t) {
  return -drift(p, theta, t) * mollified_joint_dx(p, x, theta, t);
}

double smoothed_marginal(const GdeeProblem& p, double x, double t,
                         int quad_order) {
  const QuadratureRule rule =
      gauss_legendre(quad_order, p.theta_min, p.theta_max);
  double s = 0.0;
  for (int k = 0; k < rule.order; ++k)
    s += rule.weights[k] * mollified_joint(p, x, rule.nodes[k], t);
  return s;
}

std::vector<double> critical_thetas(const GdeeProblem& p, double t) {
  std::vector<double> crit;
  const int n = 2048;
  const double dth = (p.theta_max - p.theta_min) / n;
  double fa = dresponse_dtheta(p, p.theta_min, t);
  for (int i = 0; i < n; ++i) {
    const double a = p.theta_min + i * dth;
    const double b = (i == n - 1) ? p.theta_max : a + dth;
    const double fb = dresponse_dtheta(p, b, t);
    if (fa * fb < 0.0) {
      double lo = a, hi = b, flo = fa;
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = dresponse_dtheta(p, mid, t);
        if (flo * fm <= 0.0)
          hi = mid;
        else {
          lo = mid;
          flo = fm;
        }
        if (hi - lo < 1e-14) break;
      }
      crit.push_back(0.5 * (lo + hi));
    }
    fa = fb;
  }
  return crit;
}

double exact_marginal_integral(const GdeeProblem& p, double t) {
  // Discontinuities/singularities of p_X sit at the window-edge images and at
  // fold-point images; integrate each smooth piece with tanh-sinh.
  std::vector<double> breaks = {characteristic_response(p, p.theta_min, t),
                                characteristic_response(p, p.theta_max, t)};
  for (double th : critical_thetas(p, t))
    breaks.push_back(characteristic_response(p, th, t));
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [](double a, double b) {
                             return std::abs(a - b) < 1e-13;
                           }),
               breaks.end());

  // The image of the window is [min X, max X]; pick up the extremes too.
  double lo = breaks.front(), hi = breaks.back();
  for (double th : {p.theta_min, p.theta_max}) {
    const double v = characteristic_response(p, th, t);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<double> pieces;
  pieces.push_back(lo);
  for (double b : breaks)
    if (b > lo + 1e-13 && b < hi - 1e-13) pieces.push_back(b);
  pieces.push_back(hi);

  double total = 0.0;
  for (size_t i = 0; i + 1 < pieces.size(); ++i) {
    if (pieces[i + 1] - pieces[i] < 1e-13) continue;
    total += tanh_sinh(
        [&](double x) { return exact_marginal(p, x, t); }, pieces[i],
        pieces[i + 1], 9, 1e-9);
  }
  return total;
}

}  // namespace gdee
