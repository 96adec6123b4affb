#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gdee/autodiff.hpp"
#include "gdee/net.hpp"
#include "gdee/problems.hpp"
#include "gdee/sampling.hpp"

namespace gdee {

struct LossBreakdown {
  double pde = 0.0;   // mean squared PDE residual over interior points
  double ic = 0.0;    // mean squared anchor mismatch
  double total = 0.0; // pde/pde0 + ic/ic0 (or alpha-weighted when disabled)
};

struct Normalizers {
  double pde0 = 1.0;
  double ic0 = 1.0;
  bool enabled = true;  // disabled when an epoch-0 component underflows
  double alpha1 = 1.0;  // legacy weights, used only when disabled
  double alpha2 = 1.0;
};

/// PDE residual dN/dt + drift * dN/dx at an interior point, raw coordinates.
double pde_residual(MlpEvaluator& eval, std::span<const double> params,
                    const GdeeProblem& problem,
                    const std::array<double, 3>& point);

/// Anchor mismatch N(x, theta, t_min) - mollified target.
double ic_residual(MlpEvaluator& eval, std::span<const double> params,
                   const GdeeProblem& problem,
                   const std::array<double, 2>& anchor);

/// Full-batch loss over the collocation set. When grad is non-empty it
/// receives the exact parameter gradient of the (normalized) total;
/// accumulation order is the fixed point order of the set.
LossBreakdown total_loss(MlpEvaluator& eval, std::span<const double> params,
                         const GdeeProblem& problem,
                         const CollocationSet& colloc,
                         const Normalizers& norm,
                         std::span<double> grad = {});

/// Normalizers captured on the epoch-0 collocation set. Components below
/// 1e-30 disable normalization (alpha-weighted loss instead).
Normalizers capture_normalizers(MlpEvaluator& eval,
                                std::span<const double> params,
                                const GdeeProblem& problem,
                                const CollocationSet& colloc);

struct AdamState {
  std::vector<double> m, v;
  long step = 0;
  double lr0 = 0.0015;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  bool rectified = true;  // variance-rectified warmup schedule
  double last_lr = 0.0;   // effective rate of the most recent step

  explicit AdamState(int num_params, double lr = 0.0015, bool rect = true)
      : m(num_params, 0.0), v(num_params, 0.0), lr0(lr), rectified(rect) {}
};

/// Bias-corrected Adam update, optionally with the variance-rectification
/// multiplier (small effective rate for early steps).
void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grad);

/// Closure returning the loss and filling the gradient at trial parameters.
using LossClosure =
    std::function<double(std::span<const double>, std::span<double>)>;

struct LbfgsState {
  std::deque<std::pair<std::vector<double>, std::vector<double>>> history;
  int memory = 10;
  double c1 = 1e-4, c2 = 0.9;  // strong Wolfe
  int max_line_search = 40;

  void clear() { history.clear(); }
};

struct LbfgsStepResult {
  double loss = 0.0;
  bool line_search_failed = false;  // fell back to Armijo steepest descent
  bool stalled = false;             // no acceptable step found at all
};

/// One L-BFGS iteration: two-loop-recursion direction, strong-Wolfe line
/// search, curvature-guarded history push.
LbfgsStepResult lbfgs_step(LbfgsState& state, std::vector<double>& params,
                           const LossClosure& closure);

/// Convergence rule: relative decrease of the total loss over the last ten
/// percent of the epochs is below 1e-4 (endpoint to endpoint).
bool convergence_flag(const std::vector<double>& total_history, int epochs);

enum class OptimizerKind { Adam, Lbfgs };

struct TrainOptions {
  std::vector<int> layer_dims = {3, 20, 20, 20, 20, 1};
  Activation activation = Activation::Tanh;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double lr0 = 0.0015;
  bool rectified = true;
  int epochs = 50000;
  int n_interior = 2500;
  int n_anchor = 500;
  double fraction = 0.0;
  int resample_every = 100;
  uint64_t seed = 1;
  int checkpoint_every = 5000;
  std::string out_dir;  // empty: no logs or checkpoints written
};

struct EpochLog {
  double total = 0.0, pde = 0.0, ic = 0.0, lr = 0.0;
  double wall_ms = 0.0;
};

struct TrainReport {
  std::vector<EpochLog> history;  // loss at the start of each epoch
  std::vector<double> params;
  std::vector<int> layer_dims;
  Activation activation = Activation::Tanh;
  InputScaler scaler;
  Normalizers normalizers;
  double initial_total = 0.0;
  double final_total = 0.0;
  bool converged = false;
  bool diverged = false;
  std::string diverged_reason;
  double wall_ms = 0.0;
  uint64_t seed = 0;
};

InputScaler scaler_for(const GdeeProblem& problem);

TrainReport train(const GdeeProblem& problem, const TrainOptions& opts);

}  // namespace gdee
