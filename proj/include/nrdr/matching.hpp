#pragma once

#include <utility>
#include <vector>

#include "nrdr/rfs.hpp"
#include "nrdr/types.hpp"

namespace nrdr {

// Assignment cost matrix: rows are predictions, columns are truth points.
// Every truth point must be matched, so rows >= columns is required.
struct CostMatrix {
  MatX entries;

  int rows() const { return static_cast<int>(entries.rows()); }
  int cols() const { return static_cast<int>(entries.cols()); }
  void validate() const;
};

struct Assignment {
  // (prediction index, truth index), one pair per truth, sorted by truth.
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> unmatched_predictions;  // ascending
  double total_cost = 0.0;  // matched entries summed in truth order
};

struct PredictedPoint {
  Vec3 position = Vec3::Zero();
  double r = 0.0;  // existence probability
};

// C_ij = ||pred_i - truth_j|| - log(r_i), with r clamped to
// [1e-7, 1 - 1e-7] so entries stay finite. Requires more predictions than
// truth points.
CostMatrix build_cost_matrix(const std::vector<PredictedPoint>& preds,
                             const PointCloud& truth);

// Globally optimal assignment of every column to a distinct row
// (shortest-augmenting-path Hungarian, O(cols * rows^2)). Deterministic;
// among equal-cost alternatives the scan order prefers low row indices.
Assignment solve_assignment(const CostMatrix& c);

}  // namespace nrdr
