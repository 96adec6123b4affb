#include "gdee/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace gdee {

double pde_residual(MlpEvaluator& eval, std::span<const double> params,
                    const GdeeProblem& problem,
                    const std::array<double, 3>& point) {
  const TangentBundle out = eval.forward(params, point);
  const double a = drift(problem, point[1], point[2]);
  return out.t[2] + a * out.t[0];
}

double ic_residual(MlpEvaluator& eval, std::span<const double> params,
                   const GdeeProblem& problem,
                   const std::array<double, 2>& anchor) {
  const std::array<double, 3> point{anchor[0], anchor[1], problem.t_min};
  const TangentBundle out = eval.forward(params, point);
  return out.p - mollified_joint(problem, anchor[0], anchor[1], problem.t_min);
}

LossBreakdown total_loss(MlpEvaluator& eval, std::span<const double> params,
                         const GdeeProblem& problem,
                         const CollocationSet& colloc, const Normalizers& norm,
                         std::span<double> grad) {
  const bool want_grad = !grad.empty();
  const double w_pde = norm.enabled ? 1.0 / norm.pde0 : norm.alpha1;
  const double w_ic = norm.enabled ? 1.0 / norm.ic0 : norm.alpha2;

  LossBreakdown loss;
  const size_t n_int = colloc.interior.size();
  for (const auto& pt : colloc.interior) {
    const TangentBundle out = eval.forward(params, pt);
    const double a = drift(problem, pt[1], pt[2]);
    const double r = out.t[2] + a * out.t[0];
    loss.pde += r * r;
    if (want_grad) {
      TangentBundle seed;
      const double c = 2.0 * r * w_pde / static_cast<double>(n_int);
      seed.t = {c * a, 0.0, c};
      eval.backward(params, seed, grad);
    }
  }
  if (n_int > 0) loss.pde /= static_cast<double>(n_int);

  const size_t n_ic = colloc.anchor.size();
  for (const auto& pt : colloc.anchor) {
    const std::array<double, 3> point{pt[0], pt[1], problem.t_min};
    const TangentBundle out = eval.forward(params, point);
    const double r =
        out.p - mollified_joint(problem, pt[0], pt[1], problem.t_min);
    loss.ic += r * r;
    if (want_grad) {
      TangentBundle seed;
      seed.p = 2.0 * r * w_ic / static_cast<double>(n_ic);
      eval.backward(params, seed, grad);
    }
  }
  if (n_ic > 0) loss.ic /= static_cast<double>(n_ic);

  loss.total = w_pde * loss.pde + w_ic * loss.ic;
  return loss;
}

Normalizers capture_normalizers(MlpEvaluator& eval,
                                std::span<const double> params,
                                const GdeeProblem& problem,
                                const CollocationSet& colloc) {
  Normalizers norm;
  const LossBreakdown raw = total_loss(eval, params, problem, colloc, norm);
  if (raw.pde < 1e-30 || raw.ic < 1e-30) {
    std::fprintf(stderr,
                 "warning: epoch-0 loss component underflow (pde=%g ic=%g); "
                 "normalization disabled, alpha-weighted loss in use\n",
                 raw.pde, raw.ic);
    norm.enabled = false;
    return norm;
  }
  norm.pde0 = raw.pde;
  norm.ic0 = raw.ic;
  return norm;
}

void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grad) {
  if (params.size() != grad.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: size mismatch");
  for (double g : grad)
    if (!std::isfinite(g))
      throw std::runtime_error("adam_step: non-finite gradient component");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double b1 = state.beta1, b2 = state.beta2;
  const double bc1 = 1.0 - std::pow(b1, t);
  const double bc2 = 1.0 - std::pow(b2, t);

  bool adaptive = true;
  double rect = 1.0;
  if (state.rectified) {
    // Variance-rectification: SGD-with-momentum while the second-moment
    // estimate is still untrustworthy, then a damped adaptive step.
    const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
    const double rho_t = rho_inf - 2.0 * t * std::pow(b2, t) / bc2;
    if (rho_t > 4.0) {
      rect = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                       ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
    } else {
      adaptive = false;
    }
  }
  state.last_lr = state.lr0 * (adaptive ? rect : 1.0);

  for (size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double mhat = state.m[i] / bc1;
    if (adaptive) {
      const double vhat = std::sqrt(state.v[i] / bc2);
      params[i] -= state.lr0 * rect * mhat / (vhat + state.eps);
    } else {
      params[i] -= state.lr0 * mhat;
    }
  }
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Strong-Wolfe line search (bracket + zoom). Returns accepted step or -1.
double wolfe_search(const LossClosure& closure, const std::vector<double>& x0,
                    const std::vector<double>& dir, double f0, double g0,
                    double c1, double c2, int max_trials,
                    std::vector<double>& x_out, std::vector<double>& g_out,
                    double& f_out) {
  const size_t n = x0.size();
  std::vector<double> x(n), g(n);
  const auto phi = [&](double alpha, double& dphi) {
    for (size_t i = 0; i < n; ++i) x[i] = x0[i] + alpha * dir[i];
    std::fill(g.begin(), g.end(), 0.0);
    const double f = closure(x, g);
    dphi = dot(g, dir);
    return f;
  };

  const auto accept = [&](double alpha, double f) {
    x_out = x;
    g_out = g;
    f_out = f;
    return alpha;
  };

  double alpha_prev = 0.0, f_prev = f0, dphi_prev = g0;
  double alpha = 1.0;
  int trials = 0;

  const auto zoom = [&](double lo, double hi, double flo, double dlo) -> double {
    double fhi_unused = 0.0;
    (void)fhi_unused;
    for (; trials < max_trials; ++trials) {
      const double a = 0.5 * (lo + hi);
      double dphi = 0.0;
      const double f = phi(a, dphi);
      if (!std::isfinite(f)) {
        hi = a;
        continue;
      }
      if (f > f0 + c1 * a * g0 || f >= flo) {
        hi = a;
      } else {
        if (std::abs(dphi) <= -c2 * g0) return accept(a, f);
        if (dphi * (hi - lo) >= 0.0) hi = lo;
        lo = a;
        flo = f;
        dlo = dphi;
      }
      if (std::abs(hi - lo) < 1e-16) break;
    }
    return -1.0;
  };

  for (; trials < max_trials; ++trials) {
    double dphi = 0.0;
    double f;
    try {
      f = phi(alpha, dphi);
    } catch (const std::exception&) {
      alpha *= 0.5;
      continue;
    }
    if (!std::isfinite(f)) {
      alpha *= 0.5;
      continue;
    }
    if (f > f0 + c1 * alpha * g0 || (trials > 0 && f >= f_prev)) {
      return zoom(alpha_prev, alpha, f_prev, dphi_prev);
    }
    if (std::abs(dphi) <= -c2 * g0) return accept(alpha, f);
    if (dphi >= 0.0) {
      return zoom(alpha, alpha_prev, f, dphi);
    }
    alpha_prev = alpha;
    f_prev = f;
    dphi_prev = dphi;
    alpha *= 2.0;
  }
  return -1.0;
}

}  // namespace

LbfgsStepResult lbfgs_step(LbfgsState& state, std::vector<double>& params,
                           const LossClosure& closure) {
  const size_t n = params.size();
  std::vector<double> grad(n, 0.0);
  const double f0 = closure(params, grad);

  // Two-loop recursion.
  std::vector<double> q = grad;
  const int m = static_cast<int>(state.history.size());
  std::vector<double> alpha_hist(m), rho(m);
  for (int i = m - 1; i >= 0; --i) {
    const auto& [s, y] = state.history[i];
    rho[i] = 1.0 / dot(s, y);
    alpha_hist[i] = rho[i] * dot(s, q);
    for (size_t k = 0; k < n; ++k) q[k] -= alpha_hist[i] * y[k];
  }
  double gamma = 1.0;
  if (m > 0) {
    const auto& [s, y] = state.history.back();
    gamma = dot(s, y) / dot(y, y);
  }
  for (double& v : q) v *= gamma;
  for (int i = 0; i < m; ++i) {
    const auto& [s, y] = state.history[i];
    const double beta = rho[i] * dot(y, q);
    for (size_t k = 0; k < n; ++k) q[k] += (alpha_hist[i] - beta) * s[k];
  }
  std::vector<double> dir(n);
  for (size_t k = 0; k < n; ++k) dir[k] = -q[k];

  double g0 = dot(grad, dir);
  if (g0 >= 0.0) {
    // Not a descent direction; restart from steepest descent.
    state.clear();
    for (size_t k = 0; k < n; ++k) dir[k] = -grad[k];
    g0 = dot(grad, dir);
  }

  LbfgsStepResult res;
  std::vector<double> x_new(n), g_new(n);
  double f_new = f0;
  double step = wolfe_search(closure, params, dir, f0, g0, state.c1, state.c2,
                             state.max_line_search, x_new, g_new, f_new);

  if (step < 0.0) {
    // Armijo backtracking along steepest descent.
    res.line_search_failed = true;
    for (size_t k = 0; k < n; ++k) dir[k] = -grad[k];
    g0 = dot(grad, dir);
    double alpha = 1.0 / std::max(1.0, norm2(grad));
    bool ok = false;
    for (int it = 0; it < state.max_line_search; ++it) {
      for (size_t k = 0; k < n; ++k) x_new[k] = params[k] + alpha * dir[k];
      std::fill(g_new.begin(), g_new.end(), 0.0);
      double f;
      try {
        f = closure(x_new, g_new);
      } catch (const std::exception&) {
        alpha *= 0.5;
        continue;
      }
      if (std::isfinite(f) && f <= f0 + state.c1 * alpha * g0) {
        f_new = f;
        ok = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!ok) {
      res.loss = f0;
      res.stalled = true;
      return res;
    }
  }

  // Curvature-guarded history push.
  std::vector<double> s(n), y(n);
  for (size_t k = 0; k < n; ++k) {
    s[k] = x_new[k] - params[k];
    y[k] = g_new[k] - grad[k];
  }
  const double sy = dot(s, y);
  if (sy > 1e-10 * norm2(s) * norm2(y)) {
    state.history.emplace_back(std::move(s), std::move(y));
    while (static_cast<int>(state.history.size()) > state.memory)
      state.history.pop_front();
  }
  params = std::move(x_new);
  res.loss = f_new;
  return res;
}

bool convergence_flag(const std::vector<double>& total_history, int epochs) {
  if (static_cast<int>(total_history.size()) != epochs) return false;
  if (epochs < 10) return false;
  const size_t i0 = static_cast<size_t>(std::floor(0.9 * epochs));
  const double l0 = total_history[std::min(i0, total_history.size() - 1)];
  const double l1 = total_history.back();
  if (l0 == 0.0) return true;
  return (l0 - l1) / l0 < 1e-4;
}

InputScaler scaler_for(const GdeeProblem& problem) {
  InputScaler s;
  s.lo = {problem.x_lo, problem.theta_min, problem.t_min};
  s.hi = {problem.x_hi, problem.theta_max, problem.t_max};
  return s;
}

namespace {

void write_log_header(std::ofstream& out) {
  out << "epoch,loss_total,loss_pde,loss_ic,lr,wall_ms\n";
}

void write_log_row(std::ofstream& out, int epoch, const EpochLog& log) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", epoch,
                log.total, log.pde, log.ic, log.lr, log.wall_ms);
  out << buf;
}

}  // namespace

TrainReport train(const GdeeProblem& problem, const TrainOptions& opts) {
  const auto t_start = std::chrono::steady_clock::now();
  const auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - t_start)
        .count();
  };

  TrainReport report;
  report.seed = opts.seed;
  report.layer_dims = opts.layer_dims;
  report.activation = opts.activation;
  report.scaler = scaler_for(problem);

  const NetworkParams net0 =
      init_glorot(opts.layer_dims, opts.activation, opts.seed);
  std::vector<double> params = flatten_params(net0);
  MlpEvaluator eval(opts.layer_dims, opts.activation, report.scaler);

  CollocationSet colloc =
      build_collocation(problem, eval, params, opts.n_interior, opts.n_anchor,
                        opts.fraction, opts.seed, 0);
  report.normalizers = capture_normalizers(eval, params, problem, colloc);
  {
    const LossBreakdown l0 =
        total_loss(eval, params, problem, colloc, report.normalizers);
    report.initial_total = l0.total;
    report.final_total = l0.total;
  }

  std::ofstream log;
  const bool io = !opts.out_dir.empty();
  if (io) {
    std::filesystem::create_directories(opts.out_dir);
    log.open(opts.out_dir + "/train_log.csv");
    write_log_header(log);
  }
  const auto checkpoint = [&](int epoch) {
    if (!io || opts.checkpoint_every <= 0) return;
    if (epoch % opts.checkpoint_every != 0 && epoch != opts.epochs) return;
    const NetworkParams net =
        unflatten_params(params, opts.layer_dims, opts.activation);
    save_net(net, report.scaler, opts.out_dir + "/net_" +
                                     std::to_string(epoch) + ".ckpt");
  };

  AdamState adam(eval.num_params(), opts.lr0, opts.rectified);
  LbfgsState lbfgs;
  std::vector<double> grad(eval.num_params(), 0.0);

  report.history.reserve(opts.epochs);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    if (opts.resample_every > 0 && epoch > 0 &&
        epoch % opts.resample_every == 0) {
      colloc = build_collocation(problem, eval, params, opts.n_interior,
                                 opts.n_anchor, opts.fraction, opts.seed,
                                 epoch);
      lbfgs.clear();  // the objective changed; stale curvature pairs corrupt
                      // the quasi-Newton direction
    }

    EpochLog entry;
    try {
      if (opts.optimizer == OptimizerKind::Adam) {
        std::fill(grad.begin(), grad.end(), 0.0);
        const LossBreakdown loss =
            total_loss(eval, params, problem, colloc, report.normalizers, grad);
        adam_step(adam, params, grad);
        entry = {loss.total, loss.pde, loss.ic, adam.last_lr, elapsed_ms()};
      } else {
        const LossClosure closure = [&](std::span<const double> p,
                                        std::span<double> g) {
          const LossBreakdown l =
              total_loss(eval, p, problem, colloc, report.normalizers, g);
          return l.total;
        };
        std::fill(grad.begin(), grad.end(), 0.0);
        const LossBreakdown loss =
            total_loss(eval, params, problem, colloc, report.normalizers);
        const LbfgsStepResult step = lbfgs_step(lbfgs, params, closure);
        entry = {loss.total, loss.pde, loss.ic, opts.lr0, elapsed_ms()};
        if (step.stalled) {
          report.history.push_back(entry);
          if (io) write_log_row(log, epoch, entry);
          report.diverged = true;
          report.diverged_reason = "line search exhausted";
          break;
        }
      }
    } catch (const std::exception& e) {
      report.diverged = true;
      report.diverged_reason = e.what();
      break;
    }

    report.history.push_back(entry);
    report.final_total = entry.total;
    if (io) write_log_row(log, epoch, entry);
    checkpoint(epoch);

    if (!std::isfinite(entry.total) ||
        entry.total > 1e6 * report.initial_total) {
      report.diverged = true;
      report.diverged_reason = "loss exceeded 1e6 x initial";
      break;
    }
  }

  std::vector<double> totals;
  totals.reserve(report.history.size());
  for (const EpochLog& e : report.history) totals.push_back(e.total);
  report.converged = !report.diverged && convergence_flag(totals, opts.epochs);
  report.params = params;
  report.wall_ms = elapsed_ms();
  checkpoint(opts.epochs);
  return report;
}

}  // namespace gdee
