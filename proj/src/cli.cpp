#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "gdee/config.hpp"
#include "gdee/marginal.hpp"
#include "gdee/rng.hpp"
#include "gdee/sampling.hpp"
#include "gdee/training.hpp"

namespace gdee {

namespace {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_t(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", t);
  return buf;
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

void write_resolved(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream out(cfg.out_dir + "/config.resolved");
  if (!out) throw IoError("cannot write config.resolved in " + cfg.out_dir);
  out << cfg.resolved();
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1.0);
  return v;
}

using KvList = std::vector<std::pair<std::string, std::string>>;

/// Registers every RunConfig key as a --key flag that records an override.
void add_config_flags(CLI::App* cmd, std::string& config_path, KvList& overrides) {
  cmd->add_option("--config", config_path, "line-oriented key = value file");
  static const char* keys[] = {
      "case",       "theta_min",        "theta_max",      "t_min",
      "t_max",      "x_pad",            "h_mollify",      "depth",
      "width",      "activation",       "optimizer",      "lr0",
      "plain_adam", "epochs",           "n_interior",     "n_ic",
      "sampling_fraction", "resample_every", "n_quad",    "seed",
      "out_dir",    "checkpoint_every"};
  for (const char* key : keys) {
    const std::string k = key;
    cmd->add_option_function<std::string>(
        "--" + k, [&overrides, k](const std::string& v) {
          overrides.emplace_back(k, v);
        });
  }
}

int cmd_train(const RunConfig& cfg) {
  const GdeeProblem problem = cfg.problem();
  write_resolved(cfg);
  const TrainReport report = train(problem, cfg.train_options());
  std::cout << "epochs run: " << report.history.size() << "\n"
            << "initial loss: " << fmt17(report.initial_total) << "\n"
            << "final loss:   " << fmt17(report.final_total) << "\n"
            << "converged: " << (report.converged ? "yes" : "no") << "\n"
            << "diverged:  " << (report.diverged ? "yes" : "no");
  if (report.diverged) std::cout << " (" << report.diverged_reason << ")";
  std::cout << "\nwall time: " << fmt17(report.wall_ms) << " ms\n";
  return report.diverged ? 2 : 0;
}

int cmd_oracle(const RunConfig& cfg, const std::vector<double>& ts, int nx,
               bool joint) {
  const GdeeProblem problem = cfg.problem();
  write_resolved(cfg);
  const std::vector<double> xs = linspace(problem.x_lo, problem.x_hi, nx);
  for (double t : ts) {
    auto out = open_csv(cfg.out_dir + "/oracle_t" + fmt_t(t) + ".csv");
    out << "x,p_exact,p_exact_smoothed\n";
    for (double x : xs)
      out << fmt17(x) << "," << fmt17(exact_marginal(problem, x, t)) << ","
          << fmt17(smoothed_marginal(problem, x, t)) << "\n";
    if (joint) {
      auto jout = open_csv(cfg.out_dir + "/joint_t" + fmt_t(t) + ".csv");
      jout << "x,theta,p_joint\n";
      const std::vector<double> thetas =
          linspace(problem.theta_min, problem.theta_max, 101);
      for (double x : xs)
        for (double theta : thetas)
          jout << fmt17(x) << "," << fmt17(theta) << ","
               << fmt17(mollified_joint(problem, x, theta, t)) << "\n";
    }
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint,
             const std::vector<double>& ts, int nx, double reference_ms) {
  const auto t_start = std::chrono::steady_clock::now();
  const GdeeProblem problem = cfg.problem();
  write_resolved(cfg);
  auto [net, scaler] = load_net(checkpoint);
  MlpEvaluator eval(net.layer_dims, net.activation, scaler);
  const std::vector<double> params = flatten_params(net);

  const QuadratureRule rule =
      gauss_legendre(cfg.n_quad, problem.theta_min, problem.theta_max);
  const std::vector<double> xs = linspace(problem.x_lo, problem.x_hi, nx);

  GridMatrix pred{static_cast<int>(ts.size()), nx, {}};
  GridMatrix ref{static_cast<int>(ts.size()), nx, {}};
  pred.data.resize(pred.rows * static_cast<size_t>(pred.cols));
  ref.data.resize(pred.data.size());

  for (size_t ti = 0; ti < ts.size(); ++ti) {
    const double t = ts[ti];
    const std::vector<double> p_pred = marginalize(
        [&](double x, double theta, double tt) {
          return eval.forward(params, {x, theta, tt}).p;
        },
        t, xs, rule);
    auto out = open_csv(cfg.out_dir + "/marginal_t" + fmt_t(t) + ".csv");
    out << "x,p_pred,p_exact_smoothed,p_exact\n";
    for (int i = 0; i < nx; ++i) {
      const double sm = smoothed_marginal(problem, xs[i], t);
      out << fmt17(xs[i]) << "," << fmt17(p_pred[i]) << "," << fmt17(sm) << ","
          << fmt17(exact_marginal(problem, xs[i], t)) << "\n";
      pred.at(static_cast<int>(ti), i) = p_pred[i];
      ref.at(static_cast<int>(ti), i) = sm;
    }
  }

  const double wall_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t_start)
                             .count();
  auto mout = open_csv(cfg.out_dir + "/metrics.csv");
  mout << "t,rel_l2,max_abs,spectral_norm,wall_ms";
  if (reference_ms > 0.0) mout << ",net";
  mout << "\n";
  for (size_t ti = 0; ti < ts.size(); ++ti) {
    GridMatrix prow{1, nx, {}}, rrow{1, nx, {}};
    prow.data.assign(pred.data.begin() + ti * nx,
                     pred.data.begin() + (ti + 1) * nx);
    rrow.data.assign(ref.data.begin() + ti * nx,
                     ref.data.begin() + (ti + 1) * nx);
    const ErrorMetrics m = error_metrics(prow, rrow);
    mout << fmt_t(ts[ti]) << "," << fmt17(m.rel_l2) << "," << fmt17(m.max_abs)
         << "," << fmt17(m.spectral_norm) << "," << fmt17(wall_ms);
    if (reference_ms > 0.0) mout << "," << fmt17(wall_ms / reference_ms);
    mout << "\n";
  }
  const ErrorMetrics all = error_metrics(pred, ref);
  mout << "all," << fmt17(all.rel_l2) << "," << fmt17(all.max_abs) << ","
       << fmt17(all.spectral_norm) << "," << fmt17(wall_ms);
  if (reference_ms > 0.0) mout << "," << fmt17(wall_ms / reference_ms);
  mout << "\n";
  return 0;
}

int cmd_sample(const RunConfig& cfg, const std::string& checkpoint, int epoch) {
  const GdeeProblem problem = cfg.problem();
  write_resolved(cfg);

  NetworkParams net;
  InputScaler scaler;
  if (!checkpoint.empty()) {
    std::tie(net, scaler) = load_net(checkpoint);
  } else {
    net = init_glorot(cfg.layer_dims(), activation_from_name(cfg.activation),
                      cfg.seed);
    scaler = scaler_for(problem);
  }
  MlpEvaluator eval(net.layer_dims, net.activation, scaler);
  const std::vector<double> params = flatten_params(net);

  const CollocationSet set =
      build_collocation(problem, eval, params, cfg.n_interior, cfg.n_ic,
                        cfg.sampling_fraction, cfg.seed, epoch);
  const int n_imp =
      static_cast<int>(std::lround(cfg.sampling_fraction * cfg.n_interior));
  const int n_lhs = cfg.n_interior - n_imp;

  auto out =
      open_csv(cfg.out_dir + "/samples_epoch" + std::to_string(epoch) + ".csv");
  out << "kind,x,theta,t\n";
  for (size_t i = 0; i < set.interior.size(); ++i) {
    const auto& pt = set.interior[i];
    out << (static_cast<int>(i) < n_lhs ? "lhs" : "importance") << ","
        << fmt17(pt[0]) << "," << fmt17(pt[1]) << "," << fmt17(pt[2]) << "\n";
  }
  for (const auto& pt : set.anchor)
    out << "anchor," << fmt17(pt[0]) << "," << fmt17(pt[1]) << ","
        << fmt17(problem.t_min) << "\n";
  return 0;
}

int cmd_sweep(const RunConfig& cfg, double lr_min, double lr_max, int lr_count,
              std::vector<uint64_t> seeds, int mc_seeds, double reference_ms) {
  const GdeeProblem problem = cfg.problem();
  write_resolved(cfg);

  std::vector<double> lrs;
  if (mc_seeds > 0) {
    // Monte-Carlo initialization study: one learning rate, sequential seeds.
    lrs = {cfg.lr0};
    seeds.clear();
    for (int i = 1; i <= mc_seeds; ++i) seeds.push_back(i);
  } else {
    for (int i = 0; i < lr_count; ++i) {
      const double f = lr_count == 1 ? 0.0 : i / (lr_count - 1.0);
      lrs.push_back(std::exp(std::log(lr_min) +
                             f * (std::log(lr_max) - std::log(lr_min))));
    }
  }

  auto out = open_csv(cfg.out_dir + "/sweep.csv");
  out << "lr,seed,final_loss,converged,diverged,wall_ms";
  if (reference_ms > 0.0) out << ",net";
  out << "\n";
  for (double lr : lrs) {
    for (uint64_t seed : seeds) {
      TrainOptions opts = cfg.train_options();
      opts.lr0 = lr;
      opts.seed = seed;
      opts.out_dir.clear();  // sweep rows only, no per-run artifacts
      const TrainReport rep = train(problem, opts);
      out << fmt17(lr) << "," << seed << "," << fmt17(rep.final_total) << ","
          << (rep.converged ? 1 : 0) << "," << (rep.diverged ? 1 : 0) << ","
          << fmt17(rep.wall_ms);
      if (reference_ms > 0.0) out << "," << fmt17(rep.wall_ms / reference_ms);
      out << "\n";
      out.flush();
    }
  }
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg) {
  int failures = 0;
  const auto report = [&](const std::string& name, bool ok, double err) {
    std::cout << (ok ? "PASS" : "FAIL") << "  " << name
              << "  max_rel_err=" << fmt17(err) << "\n";
    if (!ok) ++failures;
  };

  const GdeeProblem problem = cfg.problem();
  const InputScaler scaler = scaler_for(problem);
  const std::vector<int> dims = cfg.layer_dims();

  for (Activation act : {Activation::Tanh, Activation::Swish}) {
    const std::string tag = activation_name(act);
    const NetworkParams net = init_glorot(dims, act, cfg.seed);
    const std::vector<double> flat = flatten_params(net);
    MlpEvaluator eval(dims, act, scaler);
    Rng rng(mix_seed(cfg.seed, 7));

    // Input gradient vs central finite differences.
    double max_err = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
      const std::array<double, 3> pt{rng.uniform(problem.x_lo, problem.x_hi),
                                     rng.uniform(problem.theta_min, problem.theta_max),
                                     rng.uniform(problem.t_min, problem.t_max)};
      const TangentBundle out = eval.forward(flat, pt);
      for (int d = 0; d < 3; ++d) {
        const double step = 1e-5 * std::max(1.0, std::abs(pt[d]));
        std::array<double, 3> pp = pt, pm = pt;
        pp[d] += step;
        pm[d] -= step;
        const double fd =
            (eval.forward(flat, pp).p - eval.forward(flat, pm).p) / (2 * step);
        const double scale = std::max(1e-8, std::abs(fd));
        max_err = std::max(max_err, std::abs(out.t[d] - fd) / scale);
      }
    }
    report("input gradient vs finite differences (" + tag + ")",
           max_err < 1e-5, max_err);

    // Loss parameter gradient vs finite differences on 20 coordinates.
    CollocationSet colloc;
    {
      MlpEvaluator tmp(dims, act, scaler);
      colloc = build_collocation(problem, tmp, flat, 64, 32, 0.0, cfg.seed, 0);
    }
    const Normalizers norm = capture_normalizers(eval, flat, problem, colloc);
    std::vector<double> grad(eval.num_params(), 0.0);
    total_loss(eval, flat, problem, colloc, norm, grad);
    max_err = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const size_t i = rng.below(flat.size());
      const double step = 1e-6 * std::max(1.0, std::abs(flat[i]));
      std::vector<double> p = flat;
      p[i] += step;
      const double fp = total_loss(eval, p, problem, colloc, norm).total;
      p[i] = flat[i] - step;
      const double fm = total_loss(eval, p, problem, colloc, norm).total;
      const double fd = (fp - fm) / (2 * step);
      const double scale = std::max(1e-6, std::abs(fd));
      max_err = std::max(max_err, std::abs(grad[i] - fd) / scale);
    }
    report("loss parameter gradient vs finite differences (" + tag + ")",
           max_err < 1e-5, max_err);

    // Tape engine vs fused evaluator.
    NetworkTape tape(dims, act, scaler);
    max_err = 0.0;
    for (int rep = 0; rep < 3; ++rep) {
      const std::array<double, 3> pt{rng.uniform(problem.x_lo, problem.x_hi),
                                     rng.uniform(problem.theta_min, problem.theta_max),
                                     rng.uniform(problem.t_min, problem.t_max)};
      const TangentBundle a = eval.forward(flat, pt);
      const TangentBundle b = tape.eval(flat, pt);
      max_err = std::max(max_err, std::abs(a.p - b.p));
      for (int d = 0; d < 3; ++d)
        max_err = std::max(max_err, std::abs(a.t[d] - b.t[d]));
    }
    report("tape vs fused evaluator agreement (" + tag + ")", max_err < 1e-12,
           max_err);
  }

  // Drift vs finite difference of the characteristic response, all cases.
  for (CaseId id : {CaseId::Sdof, CaseId::BeamFree, CaseId::BeamForced}) {
    const GdeeProblem p = make_problem(id);
    Rng rng(mix_seed(cfg.seed, 11));
    double max_err = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      const double theta = rng.uniform(p.theta_min, p.theta_max);
      const double t = rng.uniform(p.t_min, p.t_max);
      const double fd = (characteristic_response(p, theta, t + 1e-6) -
                         characteristic_response(p, theta, t - 1e-6)) /
                        2e-6;
      const double scale = std::max(1e-8, std::abs(fd));
      max_err = std::max(max_err, std::abs(drift(p, theta, t) - fd) / scale);
    }
    report(std::string("drift vs finite differences (") + case_name(id) + ")",
           max_err < 1e-6, max_err);
  }

  return failures == 0 ? 0 : 2;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"GDEE physics-informed network solver"};
  app.require_subcommand(1);

  struct SubState {
    std::string config_path;
    KvList overrides;
  };
  SubState st_train, st_oracle, st_eval, st_sample, st_sweep, st_grad;

  CLI::App* c_train = app.add_subcommand("train", "train a network");
  add_config_flags(c_train, st_train.config_path, st_train.overrides);

  CLI::App* c_oracle =
      app.add_subcommand("oracle", "emit exact/smoothed marginal grids");
  add_config_flags(c_oracle, st_oracle.config_path, st_oracle.overrides);
  std::vector<double> oracle_ts = {1.0};
  int oracle_nx = 401;
  bool oracle_joint = false;
  c_oracle->add_option("--t", oracle_ts, "evaluation times");
  c_oracle->add_option("--nx", oracle_nx, "x-grid size");
  c_oracle->add_flag("--joint", oracle_joint, "also emit the joint grid");

  CLI::App* c_eval =
      app.add_subcommand("eval", "marginalize a checkpoint and score it");
  add_config_flags(c_eval, st_eval.config_path, st_eval.overrides);
  std::string eval_ckpt;
  std::vector<double> eval_ts = {0.9, 1.0, 1.1};
  int eval_nx = 401;
  double eval_ref_ms = 0.0;
  c_eval->add_option("--checkpoint", eval_ckpt, "network checkpoint")
      ->required();
  c_eval->add_option("--t", eval_ts, "evaluation times");
  c_eval->add_option("--nx", eval_nx, "x-grid size");
  c_eval->add_option("--reference-ms", eval_ref_ms,
                     "reference wall time for normalized-elapsed-time column");

  CLI::App* c_sample = app.add_subcommand("sample", "emit a collocation set");
  add_config_flags(c_sample, st_sample.config_path, st_sample.overrides);
  std::string sample_ckpt;
  int sample_epoch = 0;
  c_sample->add_option("--checkpoint", sample_ckpt,
                       "network guiding importance sampling");
  c_sample->add_option("--epoch", sample_epoch, "generation epoch");

  CLI::App* c_sweep =
      app.add_subcommand("sweep", "learning-rate / seed sensitivity sweep");
  add_config_flags(c_sweep, st_sweep.config_path, st_sweep.overrides);
  double lr_min = 1e-4, lr_max = 1e-1, sweep_ref_ms = 0.0;
  int lr_count = 10, mc_seeds = 0;
  std::vector<uint64_t> sweep_seeds = {1, 123123, 321321};
  c_sweep->add_option("--lr-min", lr_min, "smallest learning rate");
  c_sweep->add_option("--lr-max", lr_max, "largest learning rate");
  c_sweep->add_option("--lr-count", lr_count, "log-spaced grid size");
  c_sweep->add_option("--sweep-seeds", sweep_seeds, "seeds per grid point");
  bool mc_mode = false;
  c_sweep->add_flag("--mc", mc_mode,
                    "Monte-Carlo initialization study: 50 sequential seeds at lr0");
  c_sweep->add_option("--mc-seeds", mc_seeds,
                      "Monte-Carlo mode with N sequential seeds instead of 50");
  c_sweep->add_option("--reference-ms", sweep_ref_ms,
                      "reference wall time for normalized-elapsed-time column");

  CLI::App* c_grad =
      app.add_subcommand("gradcheck", "run finite-difference invariants");
  add_config_flags(c_grad, st_grad.config_path, st_grad.overrides);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (c_train->parsed())
      return cmd_train(parse_config(st_train.config_path, st_train.overrides));
    if (c_oracle->parsed())
      return cmd_oracle(parse_config(st_oracle.config_path, st_oracle.overrides),
                        oracle_ts, oracle_nx, oracle_joint);
    if (c_eval->parsed())
      return cmd_eval(parse_config(st_eval.config_path, st_eval.overrides),
                      eval_ckpt, eval_ts, eval_nx, eval_ref_ms);
    if (c_sample->parsed())
      return cmd_sample(parse_config(st_sample.config_path, st_sample.overrides),
                        sample_ckpt, sample_epoch);
    if (c_sweep->parsed()) {
      if (mc_mode && mc_seeds == 0) mc_seeds = 50;
      return cmd_sweep(parse_config(st_sweep.config_path, st_sweep.overrides),
                       lr_min, lr_max, lr_count, sweep_seeds, mc_seeds,
                       sweep_ref_ms);
    }
    if (c_grad->parsed())
      return cmd_gradcheck(parse_config(st_grad.config_path, st_grad.overrides));
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace gdee
