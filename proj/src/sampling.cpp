#include "gdee/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gdee/rng.hpp"

namespace gdee {

std::vector<std::vector<double>> lhs_sample(int n,
                                            const std::vector<Interval>& box,
                                            uint64_t seed) {
  if (n < 1) throw std::invalid_argument("lhs_sample: n must be >= 1");
  const int d = static_cast<int>(box.size());
  Rng rng(seed);

  std::vector<std::vector<double>> pts(n, std::vector<double>(d));
  std::vector<int> perm(n);
  for (int dim = 0; dim < d; ++dim) {
    std::iota(perm.begin(), perm.end(), 0);
    // Fisher-Yates with the deterministic stream.
    for (int i = n - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.below(static_cast<uint64_t>(i) + 1)]);
    const auto [lo, hi] = box[dim];
    for (int i = 0; i < n; ++i) {
      const double u = (perm[i] + rng.uniform()) / n;
      pts[i][dim] = lo + (hi - lo) * u;
    }
  }
  return pts;
}

double gradient_weight(MlpEvaluator& eval, std::span<const double> params,
                       const std::array<double, 3>& point) {
  const TangentBundle out = eval.forward(params, point);
  return std::sqrt(out.t[0] * out.t[0] + out.t[2] * out.t[2]);
}

std::vector<std::array<double, 3>> importance_resample(
    MlpEvaluator& eval, std::span<const double> params,
    const std::array<Interval, 3>& box, int n_out, int pool_factor,
    uint64_t seed) {
  if (n_out < 0) throw std::invalid_argument("n_out must be >= 0");
  if (n_out == 0) return {};
  if (pool_factor < 2) throw std::invalid_argument("pool_factor must be >= 2");

  Rng rng(seed);
  const int pool = pool_factor * n_out;
  std::vector<std::array<double, 3>> cand(pool);
  std::vector<double> w(pool);
  double total = 0.0;
  for (int i = 0; i < pool; ++i) {
    for (int d = 0; d < 3; ++d)
      cand[i][d] = rng.uniform(box[d].first, box[d].second);
    w[i] = gradient_weight(eval, params, cand[i]);
    total += w[i];
  }

  std::vector<std::array<double, 3>> out;
  out.reserve(n_out);
  if (total < 1e-12 * pool) {
    // Degenerate weight field: uniform selection.
    for (int i = 0; i < n_out; ++i) out.push_back(cand[i % pool]);
    return out;
  }

  // Systematic resampling over the normalized weights.
  const double step = total / n_out;
  double target = rng.uniform() * step;
  double cum = 0.0;
  int i = 0;
  for (int k = 0; k < n_out; ++k) {
    while (cum + w[i] < target && i + 1 < pool) {
      cum += w[i];
      ++i;
    }
    out.push_back(cand[i]);
    target += step;
  }
  return out;
}

CollocationSet build_collocation(const GdeeProblem& problem,
                                 MlpEvaluator& eval,
                                 std::span<const double> params,
                                 int n_interior, int n_anchor, double fraction,
                                 uint64_t seed, int epoch, int pool_factor) {
  if (fraction < 0.0 || fraction >= 1.0)
    throw std::invalid_argument("sampling fraction must be in [0, 1)");

  CollocationSet set;
  set.fraction = fraction;
  set.epoch = epoch;
  set.seed = seed;

  const uint64_t stream = mix_seed(seed, static_cast<uint64_t>(epoch));
  const int n_imp = static_cast<int>(std::lround(fraction * n_interior));
  const int n_lhs = n_interior - n_imp;

  const std::vector<Interval> box3 = {{problem.x_lo, problem.x_hi},
                                      {problem.theta_min, problem.theta_max},
                                      {problem.t_min, problem.t_max}};
  if (n_lhs > 0) {
    for (const auto& pt : lhs_sample(n_lhs, box3, mix_seed(stream, 1)))
      set.interior.push_back({pt[0], pt[1], pt[2]});
  }
  if (n_imp > 0) {
    const std::array<Interval, 3> box{box3[0], box3[1], box3[2]};
    for (const auto& pt : importance_resample(eval, params, box, n_imp,
                                              pool_factor, mix_seed(stream, 2)))
      set.interior.push_back(pt);
  }
  if (n_anchor > 0) {
    const std::vector<Interval> box2 = {box3[0], box3[1]};
    for (const auto& pt : lhs_sample(n_anchor, box2, mix_seed(stream, 3)))
      set.anchor.push_back({pt[0], pt[1]});
  }
  return set;
}

}  // namespace gdee
