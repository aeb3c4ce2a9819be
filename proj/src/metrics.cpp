#include "nrdr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "nrdr/errors.hpp"
#include "nrdr/matching.hpp"

namespace nrdr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_nonempty(const PointCloud& x, const PointCloud& y,
                      const char* metric) {
  x.validate();
  y.validate();
  if (x.empty() || y.empty())
    throw DataError(std::string(metric) + ": point sets must be nonempty");
}

MatX distance_matrix(const PointCloud& x, const PointCloud& y) {
  MatX d(x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      d(i, j) = (x.points[i] - y.points[j]).norm();
  return d;
}

// Min-cost max-flow with nonnegative costs: successive shortest paths using
// Dijkstra over reduced costs.
class MinCostFlow {
 public:
  explicit MinCostFlow(int n) : head_(n, -1), potential_(n, 0.0) {}

  void add_edge(int from, int to, long long cap, double cost) {
    edges_.push_back({to, head_[from], cap, cost});
    head_[from] = static_cast<int>(edges_.size()) - 1;
    edges_.push_back({from, head_[to], 0, -cost});
    head_[to] = static_cast<int>(edges_.size()) - 1;
  }

  // Returns total cost of pushing `amount` units from s to t; throws if the
  // graph cannot carry that much flow.
  double solve(int s, int t, long long amount) {
    double total_cost = 0.0;
    const int n = static_cast<int>(head_.size());
    while (amount > 0) {
      std::vector<double> dist(n, kInf);
      std::vector<int> pred_edge(n, -1);
      std::vector<char> done(n, 0);
      dist[s] = 0.0;
      for (;;) {
        int u = -1;
        double best = kInf;
        for (int i = 0; i < n; ++i)
          if (!done[i] && dist[i] < best) {
            best = dist[i];
            u = i;
          }
        if (u < 0) break;
        done[u] = 1;
        for (int e = head_[u]; e >= 0; e = edges_[e].next) {
          if (edges_[e].cap <= 0) continue;
          const int v = edges_[e].to;
          const double reduced =
              std::max(0.0, edges_[e].cost + potential_[u] - potential_[v]);
          if (dist[u] + reduced < dist[v]) {
            dist[v] = dist[u] + reduced;
            pred_edge[v] = e;
          }
        }
      }
      if (dist[t] == kInf)
        throw NumericError("min-cost flow: demand exceeds capacity");
      for (int i = 0; i < n; ++i)
        if (dist[i] < kInf) potential_[i] += dist[i];

      long long push = amount;
      for (int v = t; v != s;) {
        const int e = pred_edge[v];
        push = std::min(push, edges_[e].cap);
        v = edges_[e ^ 1].to;
      }
      for (int v = t; v != s;) {
        const int e = pred_edge[v];
        edges_[e].cap -= push;
        edges_[e ^ 1].cap += push;
        total_cost += push * edges_[e].cost;
        v = edges_[e ^ 1].to;
      }
      amount -= push;
    }
    return total_cost;
  }

 private:
  struct Edge {
    int to;
    int next;
    long long cap;
    double cost;
  };
  std::vector<Edge> edges_;
  std::vector<int> head_;
  std::vector<double> potential_;
};

// Minimum-cost perfect matching of the smaller side of a rectangular matrix.
Assignment min_cost_matching(const MatX& costs) {
  CostMatrix c;
  if (costs.rows() >= costs.cols()) {
    c.entries = costs;
    return solve_assignment(c);
  }
  c.entries = costs.transpose();
  Assignment t = solve_assignment(c);
  Assignment out;
  out.total_cost = t.total_cost;
  for (auto [i, j] : t.pairs) out.pairs.emplace_back(j, i);
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  return out;
}

}  // namespace

double chamfer(const PointCloud& x, const PointCloud& y) {
  require_nonempty(x, y, "chamfer");
  const MatX d = distance_matrix(x, y);
  const double to_y = d.rowwise().minCoeff().sum() / (2.0 * x.size());
  const double to_x = d.colwise().minCoeff().sum() / (2.0 * y.size());
  return to_y + to_x;
}

double emd(const PointCloud& x, const PointCloud& y) {
  require_nonempty(x, y, "emd");
  const long long nx = static_cast<long long>(x.size());
  const long long ny = static_cast<long long>(y.size());
  const MatX d = distance_matrix(x, y);

  if (nx == ny) {
    return min_cost_matching(d).total_cost / static_cast<double>(nx);
  }

  const long long scale = std::lcm(nx, ny);
  const int source = 0;
  const int sink = static_cast<int>(nx + ny) + 1;
  MinCostFlow flow(static_cast<int>(nx + ny) + 2);
  for (long long i = 0; i < nx; ++i)
    flow.add_edge(source, static_cast<int>(1 + i), scale / nx, 0.0);
  for (long long j = 0; j < ny; ++j)
    flow.add_edge(static_cast<int>(1 + nx + j), sink, scale / ny, 0.0);
  for (long long i = 0; i < nx; ++i)
    for (long long j = 0; j < ny; ++j)
      flow.add_edge(static_cast<int>(1 + i), static_cast<int>(1 + nx + j),
                    scale, d(i, j));
  return flow.solve(source, sink, scale) / static_cast<double>(scale);
}

void GospaParams::validate() const {
  if (!(c > 0.0)) throw ConfigError("gospa: cut-off c must be positive");
  if (!(alpha > 0.0 && alpha <= 2.0))
    throw ConfigError("gospa: alpha must be in (0, 2]");
  if (!(p >= 1.0)) throw ConfigError("gospa: p must be >= 1");
}

GospaResult gospa(const PointCloud& x, const PointCloud& y,
                  const GospaParams& params) {
  params.validate();
  x.validate();
  y.validate();

  const double cp = std::pow(params.c, params.p);
  const double unmatched_unit = cp / params.alpha;

  GospaResult res;
  const std::size_t k = std::min(x.size(), y.size());
  double total_p = 0.0;

  // Leaving a pair unmatched costs 2 * unmatched_unit, so matching is capped
  // there; with alpha = 2 the cap is the classic min(d, c)^p cut-off.
  const double pair_cap = 2.0 * unmatched_unit;
  if (k > 0) {
    MatX cut = distance_matrix(x, y);
    for (Eigen::Index i = 0; i < cut.rows(); ++i)
      for (Eigen::Index j = 0; j < cut.cols(); ++j)
        cut(i, j) = std::min(std::pow(cut(i, j), params.p), pair_cap);
    const Assignment a = min_cost_matching(cut);
    for (auto [i, j] : a.pairs) {
      const double dp = std::pow((x.points[i] - y.points[j]).norm(), params.p);
      if (dp < pair_cap) {
        res.localization += dp;
      } else {
        // Matched at the cap: equivalent to one miss plus one false.
        res.missed_count += 1;
        res.false_count += 1;
      }
    }
    total_p += a.total_cost;
  }

  res.false_count += static_cast<int>(x.size() - k);
  res.missed_count += static_cast<int>(y.size() - k);
  total_p += unmatched_unit * static_cast<double>((x.size() - k) + (y.size() - k));

  res.missed_cost = unmatched_unit * res.missed_count;
  res.false_cost = unmatched_unit * res.false_count;
  res.total = std::pow(total_p, 1.0 / params.p);
  return res;
}

PointCloud gate_by_range(const PointCloud& cloud, double max_range) {
  cloud.validate();
  if (!(max_range > 0.0) && !std::isinf(max_range))
    throw ConfigError("gate_by_range: max_range must be positive");
  PointCloud out;
  for (auto& [name, column] : cloud.attributes) {
    (void)column;
    out.attributes[name] = {};
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.points[i].norm() > max_range) continue;
    out.points.push_back(cloud.points[i]);
    for (auto& [name, column] : out.attributes)
      column.push_back(cloud.attributes.at(name)[i]);
  }
  return out;
}

}  // namespace nrdr
