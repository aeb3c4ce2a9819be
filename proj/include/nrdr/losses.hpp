#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "nrdr/matching.hpp"
#include "nrdr/rfs.hpp"
#include "nrdr/types.hpp"

namespace nrdr {

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Per-prediction decoder outputs in unconstrained form: existence as a logit,
// per-axis scale as a log. Final position is anchor + offset.
struct PredictionParams {
  std::vector<Vec3> anchors;
  std::vector<Vec3> offsets;
  std::vector<double> logit_r;
  std::vector<Vec3> log_scales;

  std::size_t size() const { return anchors.size(); }
  Vec3 position(std::size_t i) const { return anchors[i] + offsets[i]; }
  double existence(std::size_t i) const { return logistic(logit_r[i]); }
  void validate() const;
};

// Same shape as PredictionParams. Anchor and offset gradients are equal for
// the losses here (both act through the position), but both are carried so
// each consumer can pick what it propagates.
struct PredictionGradient {
  std::vector<Vec3> anchors;
  std::vector<Vec3> offsets;
  std::vector<double> logit_r;
  std::vector<Vec3> log_scales;

  static PredictionGradient zeros(std::size_t n);
};

struct LossReport {
  double total = 0.0;
  double matched_term = 0.0;    // over assigned (prediction, truth) pairs
  double unmatched_term = 0.0;  // existence penalty of unassigned predictions
  PredictionGradient gradient;
  Assignment assignment;
};

// Matching-based regression loss:
//   sum_matched (||y_hat - y|| - log r) - sum_unmatched log(1 - r)
// Gradients hold the matching fixed; the norm uses subgradient 0 at
// coincidence. Requires more predictions than truth points.
LossReport deterministic_loss(const PredictionParams& params,
                              const PointCloud& truth);

// Negative log-likelihood of the matched Multi-Bernoulli term:
//   -sum_unmatched log(1 - r) - sum_matched (log r + sum_axis log p(y_axis))
// with per-axis Laplace or Gaussian densities located at anchor + offset.
LossReport probabilistic_loss(const PredictionParams& params,
                              const PointCloud& truth, DensityFamily family);

using LossFn =
    std::function<LossReport(const PredictionParams&, const PointCloud&)>;

struct FiniteDiffResult {
  double max_rel_error = 0.0;
  // False if any perturbed evaluation changed the matching; callers should
  // resample such instances rather than trust the comparison.
  bool matching_stable = true;
};

// Central finite differences over every coordinate of params vs the analytic
// gradient.
FiniteDiffResult finite_difference_check(const LossFn& loss_fn,
                                         const PredictionParams& params,
                                         const PointCloud& truth,
                                         double h = 1e-5);

}  // namespace nrdr
