#pragma once

#include "nrdr/rfs.hpp"
#include "nrdr/types.hpp"

namespace nrdr {

// Symmetric mean of nearest-neighbor distances (non-squared):
//   CD = (1/2|X|) sum_x min_y ||x-y|| + (1/2|Y|) sum_y min_x ||x-y||
// Both sets must be nonempty.
double chamfer(const PointCloud& x, const PointCloud& y);

// Exact optimal-transport cost between the uniform distributions over X and
// Y (mass 1/|X| and 1/|Y| per point, Euclidean ground cost), via integral
// min-cost flow with masses scaled by lcm(|X|, |Y|). Equal-size inputs reduce
// to an assignment problem. Both sets must be nonempty.
double emd(const PointCloud& x, const PointCloud& y);

struct GospaParams {
  double c = 1.0;      // cut-off distance
  double alpha = 2.0;  // cardinality penalty split; 2 gives the miss/false decomposition
  double p = 1.0;

  void validate() const;
};

struct GospaResult {
  double total = 0.0;
  double localization = 0.0;  // sum of d^p over pairs matched below cut-off
  double missed_cost = 0.0;   // truth side
  double false_cost = 0.0;    // prediction side
  int missed_count = 0;
  int false_count = 0;
};

// GOSPA between predictions X and truth Y, computed by optimal matching on
// min(d, c)^p entries plus the cardinality term. With alpha = 2, pairs
// matched at the cut-off are reported as one miss plus one false detection,
// and total^p = localization + missed_cost + false_cost.
GospaResult gospa(const PointCloud& x, const PointCloud& y,
                  const GospaParams& params = {});

// Points with sensor-frame range <= max_range; attribute columns follow.
PointCloud gate_by_range(const PointCloud& cloud, double max_range);

}  // namespace nrdr
