#include "nrdr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nrdr/errors.hpp"

namespace nrdr {

void PredictionParams::validate() const {
  const std::size_t n = anchors.size();
  if (offsets.size() != n || logit_r.size() != n || log_scales.size() != n)
    throw DataError("prediction params: field lengths disagree");
  if (n == 0) throw DataError("prediction params: empty");
  for (std::size_t i = 0; i < n; ++i) {
    if (!anchors[i].allFinite() || !offsets[i].allFinite() ||
        !std::isfinite(logit_r[i]) || !log_scales[i].allFinite())
      throw NumericError("prediction params: non-finite value at index " +
                         std::to_string(i));
  }
}

PredictionGradient PredictionGradient::zeros(std::size_t n) {
  PredictionGradient g;
  g.anchors.assign(n, Vec3::Zero());
  g.offsets.assign(n, Vec3::Zero());
  g.logit_r.assign(n, 0.0);
  g.log_scales.assign(n, Vec3::Zero());
  return g;
}

namespace {

Assignment match(const PredictionParams& params, const PointCloud& truth) {
  std::vector<PredictedPoint> preds(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    preds[i] = {params.position(i), params.existence(i)};
  return solve_assignment(build_cost_matrix(preds, truth));
}

double sign_or_zero(double v) {
  if (v > 0.0) return 1.0;
  if (v < 0.0) return -1.0;
  return 0.0;
}

}  // namespace

LossReport deterministic_loss(const PredictionParams& params,
                              const PointCloud& truth) {
  params.validate();
  LossReport report;
  report.assignment = match(params, truth);
  report.gradient = PredictionGradient::zeros(params.size());

  std::vector<char> matched(params.size(), 0);
  for (auto [i, j] : report.assignment.pairs) {
    matched[i] = 1;
    const Vec3 diff = params.position(i) - truth.points[j];
    const double dist = diff.norm();
    const double r = params.existence(i);
    report.matched_term += dist + softplus(-params.logit_r[i]);

    const Vec3 dir = dist > 0.0 ? Vec3(diff / dist) : Vec3::Zero();
    report.gradient.anchors[i] += dir;
    report.gradient.offsets[i] += dir;
    report.gradient.logit_r[i] += r - 1.0;  // d(-log r)/d logit
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (matched[i]) continue;
    report.unmatched_term += softplus(params.logit_r[i]);
    report.gradient.logit_r[i] += params.existence(i);  // d(-log(1-r))/d logit
  }
  report.total = report.matched_term + report.unmatched_term;
  return report;
}

LossReport probabilistic_loss(const PredictionParams& params,
                              const PointCloud& truth, DensityFamily family) {
  params.validate();
  LossReport report;
  report.assignment = match(params, truth);
  report.gradient = PredictionGradient::zeros(params.size());

  std::vector<char> matched(params.size(), 0);
  for (auto [i, j] : report.assignment.pairs) {
    matched[i] = 1;
    const Vec3 mu = params.position(i);
    const double r = params.existence(i);
    double term = softplus(-params.logit_r[i]);  // -log r
    Vec3 dmu = Vec3::Zero(), dlog_scale = Vec3::Zero();

    for (int axis = 0; axis < 3; ++axis) {
      const double y = truth.points[j][axis];
      const double scale = std::exp(params.log_scales[i][axis]);
      const double delta = y - mu[axis];
      if (family == DensityFamily::Laplace) {
        term += std::log(2.0 * scale) + std::abs(delta) / scale;
        dmu[axis] = -sign_or_zero(delta) / scale;
        dlog_scale[axis] = 1.0 - std::abs(delta) / scale;
      } else {
        const double z = delta / scale;
        term += std::log(scale) + 0.5 * std::log(2.0 * std::numbers::pi) + 0.5 * z * z;
        dmu[axis] = -z / scale;
        dlog_scale[axis] = 1.0 - z * z;
      }
    }
    report.matched_term += term;
    report.gradient.anchors[i] += dmu;
    report.gradient.offsets[i] += dmu;
    report.gradient.log_scales[i] += dlog_scale;
    report.gradient.logit_r[i] += r - 1.0;
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (matched[i]) continue;
    report.unmatched_term += softplus(params.logit_r[i]);
    report.gradient.logit_r[i] += params.existence(i);
  }
  report.total = report.matched_term + report.unmatched_term;
  return report;
}

FiniteDiffResult finite_difference_check(const LossFn& loss_fn,
                                         const PredictionParams& params,
                                         const PointCloud& truth, double h) {
  const LossReport base = loss_fn(params, truth);
  FiniteDiffResult result;
  PredictionParams p = params;

  auto probe = [&](double* slot, double analytic) {
    const double original = *slot;
    *slot = original + h;
    const LossReport hi = loss_fn(p, truth);
    *slot = original - h;
    const LossReport lo = loss_fn(p, truth);
    *slot = original;
    if (hi.assignment.pairs != base.assignment.pairs ||
        lo.assignment.pairs != base.assignment.pairs)
      result.matching_stable = false;
    const double fd = (hi.total - lo.total) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-6});
    result.max_rel_error =
        std::max(result.max_rel_error, std::abs(fd - analytic) / denom);
  };

  for (std::size_t i = 0; i < params.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      probe(&p.anchors[i][a], base.gradient.anchors[i][a]);
      probe(&p.offsets[i][a], base.gradient.offsets[i][a]);
      probe(&p.log_scales[i][a], base.gradient.log_scales[i][a]);
    }
    probe(&p.logit_r[i], base.gradient.logit_r[i]);
  }
  return result;
}

}  // namespace nrdr
