#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <stdexcept>
#include <vector>

#include "guis/error.hpp"

namespace guis {

inline constexpr int kNoise = -1;

namespace detail {

inline double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace detail

/// Density-based clustering with Euclidean distance.
///
/// A point's eps-neighbourhood includes the point itself, so min_pts == 1
/// makes every point a core point. Clusters are numbered 0, 1, ... in the
/// order their first core point appears in the input; a border point reachable
/// from several clusters joins the one expanded first (the lowest id).
/// Returns one label per point, kNoise for unclustered points.
inline std::vector<int> dbscan(const std::vector<std::vector<double>>& points, double eps,
                               std::size_t min_pts) {
  if (!(eps > 0.0)) throw std::invalid_argument("dbscan: eps must be positive");
  if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");
  const std::size_t n = points.size();
  if (n == 0) return {};
  const std::size_t dim = points.front().size();
  for (const auto& p : points)
    if (p.size() != dim) throw DimensionMismatch(dim, p.size());

  std::vector<std::vector<std::size_t>> neighbours(n);
  for (std::size_t i = 0; i < n; ++i) {
    neighbours[i].push_back(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (detail::euclidean(points[i], points[j]) <= eps) {
        neighbours[i].push_back(j);
        neighbours[j].push_back(i);
      }
    }
  }

  constexpr int kUnvisited = -2;
  std::vector<int> labels(n, kUnvisited);
  int next_cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != kUnvisited) continue;
    if (neighbours[i].size() < min_pts) {
      labels[i] = kNoise;  // may still be claimed later as a border point
      continue;
    }
    const int cluster = next_cluster++;
    labels[i] = cluster;
    std::deque<std::size_t> frontier(neighbours[i].begin(), neighbours[i].end());
    while (!frontier.empty()) {
      const std::size_t q = frontier.front();
      frontier.pop_front();
      if (labels[q] == kNoise) labels[q] = cluster;
      if (labels[q] != kUnvisited) continue;
      labels[q] = cluster;
      if (neighbours[q].size() >= min_pts)
        frontier.insert(frontier.end(), neighbours[q].begin(), neighbours[q].end());
    }
  }
  return labels;
}

}  // namespace guis
