#pragma once

#include <cstddef>
#include <vector>

#include "treescan/geometry.hpp"
#include "treescan/kdtree.hpp"

namespace treescan {

struct BoundingBox {
  Vec3 min;
  Vec3 max;
};

struct Cluster {
  std::vector<int> ids;  // sorted ascending, indices into the source cloud
  BoundingBox bbox;
};

/// Connected components of the graph where points are adjacent iff their
/// distance is <= tolerance; components with size outside [min_size, max_size]
/// are discarded. max_size == 0 disables the upper bound. Clusters are ordered
/// by smallest member id. Growth is breadth-first over an explicit visited
/// set; the per-frontier radius queries are the parallel kernel.
std::vector<Cluster> euclidean_cluster(const PointCloud& cloud, double tolerance,
                                       std::size_t min_size, std::size_t max_size = 0);

/// Same extraction against a prebuilt index (must index the same cloud).
std::vector<Cluster> euclidean_cluster(const PointCloud& cloud, const SpatialIndex& index,
                                       double tolerance, std::size_t min_size,
                                       std::size_t max_size = 0);

}  // namespace treescan
