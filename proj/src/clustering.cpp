#include "treescan/clustering.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "treescan/parallel.hpp"

namespace treescan {

namespace {

BoundingBox bbox_of(const PointCloud& cloud, const std::vector<int>& ids) {
  BoundingBox box;
  constexpr double inf = std::numeric_limits<double>::infinity();
  box.min = {inf, inf, inf};
  box.max = {-inf, -inf, -inf};
  for (int id : ids) {
    const Point3& p = cloud.pts[id];
    box.min.x = std::min(box.min.x, p.x);
    box.min.y = std::min(box.min.y, p.y);
    box.min.z = std::min(box.min.z, p.z);
    box.max.x = std::max(box.max.x, p.x);
    box.max.y = std::max(box.max.y, p.y);
    box.max.z = std::max(box.max.z, p.z);
  }
  return box;
}

}  // namespace

std::vector<Cluster> euclidean_cluster(const PointCloud& cloud, const SpatialIndex& index,
                                       double tolerance, std::size_t min_size,
                                       std::size_t max_size) {
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (min_size == 0) throw std::invalid_argument("min_size must be positive");
  if (max_size != 0 && max_size < min_size) {
    throw std::invalid_argument("max_size must be >= min_size");
  }
  if (index.size() != cloud.size()) {
    throw std::invalid_argument("index does not match cloud");
  }

  const int n = static_cast<int>(cloud.size());
  std::vector<Cluster> clusters;
  if (n == 0) return clusters;

  std::vector<char> visited(n, 0);
  std::vector<int> frontier;
  std::vector<std::vector<int>> neighbor_lists;

  for (int seed = 0; seed < n; ++seed) {
    if (visited[seed]) continue;
    std::vector<int> component{seed};
    visited[seed] = 1;
    frontier.assign(1, seed);

    while (!frontier.empty()) {
      const std::int64_t m = static_cast<std::int64_t>(frontier.size());
      neighbor_lists.assign(m, {});
#pragma omp parallel for schedule(dynamic, 8) if (parallel_enabled() && m > 1)
      for (std::int64_t i = 0; i < m; ++i) {
        neighbor_lists[i] = index.radius_search(cloud.pts[frontier[i]], tolerance);
      }
      // Merge in frontier order so component contents and ordering are
      // independent of the thread count.
      std::vector<int> next;
      for (const auto& list : neighbor_lists) {
        for (int id : list) {
          if (!visited[id]) {
            visited[id] = 1;
            component.push_back(id);
            next.push_back(id);
          }
        }
      }
      frontier = std::move(next);
    }

    const std::size_t size = component.size();
    if (size < min_size || (max_size != 0 && size > max_size)) continue;
    std::sort(component.begin(), component.end());
    Cluster c;
    c.ids = std::move(component);
    c.bbox = bbox_of(cloud, c.ids);
    clusters.push_back(std::move(c));
  }
  // Seeds are scanned in ascending order, so clusters are already ordered by
  // their smallest member id.
  return clusters;
}

std::vector<Cluster> euclidean_cluster(const PointCloud& cloud, double tolerance,
                                       std::size_t min_size, std::size_t max_size) {
  const SpatialIndex index(cloud);
  return euclidean_cluster(cloud, index, tolerance, min_size, max_size);
}

}  // namespace treescan
