#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "gdee/autodiff.hpp"
#include "gdee/problems.hpp"

namespace gdee {

using Interval = std::pair<double, double>;

/// Latin hypercube sample: per dimension exactly one point in each of the n
/// equal strata, strata paired by independent random permutations.
std::vector<std::vector<double>> lhs_sample(int n,
                                            const std::vector<Interval>& box,
                                            uint64_t seed);

/// Importance weight at a point: Euclidean norm of the network gradient over
/// the (t, x) components, in raw coordinates.
double gradient_weight(MlpEvaluator& eval, std::span<const double> params,
                       const std::array<double, 3>& point);

/// Draw pool_factor*n_out uniform candidates in the box and keep n_out of
/// them by systematic resampling proportional to gradient_weight. Falls back
/// to uniform selection when the total weight is negligible.
std::vector<std::array<double, 3>> importance_resample(
    MlpEvaluator& eval, std::span<const double> params,
    const std::array<Interval, 3>& box, int n_out, int pool_factor,
    uint64_t seed);

struct CollocationSet {
  std::vector<std::array<double, 3>> interior;  // (x, theta, t)
  std::vector<std::array<double, 2>> anchor;    // (x, theta) at t = t_min
  double fraction = 0.0;
  int epoch = 0;
  uint64_t seed = 0;
};

/// Interior = LHS((1-rho) n_interior) plus importance(rho n_interior);
/// anchors LHS over (x, theta) at t = t_min. (seed, epoch) fully determine
/// the set.
CollocationSet build_collocation(const GdeeProblem& problem,
                                 MlpEvaluator& eval,
                                 std::span<const double> params,
                                 int n_interior, int n_anchor, double fraction,
                                 uint64_t seed, int epoch,
                                 int pool_factor = 10);

}  // namespace gdee
