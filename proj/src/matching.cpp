#include "nrdr/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nrdr/errors.hpp"

namespace nrdr {

void CostMatrix::validate() const {
  if (entries.rows() < entries.cols())
    throw DataError("cost matrix: needs at least as many predictions (rows) "
                    "as truth points (columns)");
  if (entries.size() > 0 && !entries.allFinite())
    throw DataError("cost matrix: entries must be finite");
}

CostMatrix build_cost_matrix(const std::vector<PredictedPoint>& preds,
                             const PointCloud& truth) {
  truth.validate();
  if (preds.size() <= truth.size())
    throw DataError("cost matrix: need strictly more predictions than truth points");

  constexpr double kEps = 1e-7;
  CostMatrix c;
  c.entries.resize(static_cast<Eigen::Index>(preds.size()),
                   static_cast<Eigen::Index>(truth.size()));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!preds[i].position.allFinite() || !std::isfinite(preds[i].r))
      throw DataError("cost matrix: non-finite prediction");
    const double r = std::clamp(preds[i].r, kEps, 1.0 - kEps);
    const double neg_log_r = -std::log(r);
    for (std::size_t j = 0; j < truth.size(); ++j)
      c.entries(i, j) =
          (preds[i].position - truth.points[j]).norm() + neg_log_r;
  }
  return c;
}

Assignment solve_assignment(const CostMatrix& c) {
  c.validate();
  const int rows = c.rows();
  const int cols = c.cols();

  Assignment out;
  if (cols == 0) {
    out.unmatched_predictions.resize(rows);
    for (int i = 0; i < rows; ++i) out.unmatched_predictions[i] = i;
    return out;
  }

  // Shortest augmenting path with potentials (Jonker-Volgenant flavor),
  // augmenting once per column. 1-indexed internally; row 0 is a virtual
  // "unassigned" slot.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(cols + 1, 0.0), v(rows + 1, 0.0);
  std::vector<int> owner(rows + 1, 0);  // owner[row] = column, 0 = free
  std::vector<int> way(rows + 1, 0);

  for (int j = 1; j <= cols; ++j) {
    owner[0] = j;
    int r0 = 0;
    std::vector<double> min_reduced(rows + 1, kInf);
    std::vector<char> used(rows + 1, 0);
    do {
      used[r0] = 1;
      const int j0 = owner[r0];
      double delta = kInf;
      int r1 = -1;
      for (int r = 1; r <= rows; ++r) {
        if (used[r]) continue;
        const double cur = c.entries(r - 1, j0 - 1) - u[j0] - v[r];
        if (cur < min_reduced[r]) {
          min_reduced[r] = cur;
          way[r] = r0;
        }
        if (min_reduced[r] < delta) {
          delta = min_reduced[r];
          r1 = r;
        }
      }
      for (int r = 0; r <= rows; ++r) {
        if (used[r]) {
          u[owner[r]] += delta;
          v[r] -= delta;
        } else {
          min_reduced[r] -= delta;
        }
      }
      r0 = r1;
    } while (owner[r0] != 0);
    do {
      const int r1 = way[r0];
      owner[r0] = owner[r1];
      r0 = r1;
    } while (r0);
  }

  std::vector<char> row_matched(rows, 0);
  for (int r = 1; r <= rows; ++r) {
    if (owner[r] == 0) continue;
    out.pairs.emplace_back(r - 1, owner[r] - 1);
    row_matched[r - 1] = 1;
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  // Accumulate in truth order so the total is a function of the assignment
  // alone, not of the order the search happened to visit rows.
  for (const auto& [r, j] : out.pairs) out.total_cost += c.entries(r, j);
  for (int r = 0; r < rows; ++r)
    if (!row_matched[r]) out.unmatched_predictions.push_back(r);
  return out;
}

}  // namespace nrdr
