#pragma once

#include <vector>

#include "treescan/clustering.hpp"
#include "treescan/elevation.hpp"
#include "treescan/geometry.hpp"

namespace treescan::ref {

/// Serial brute-force implementations kept alongside the OpenMP kernels.
/// They share no code with the main path and serve as oracles in the test
/// suites and as baselines in the benchmark target.

/// Hash-map voxel grouping by floor(coord / voxel), centroid per occupied cell.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size);

/// Exhaustive O(n) scan, ids sorted ascending.
std::vector<int> radius_search(const PointCloud& cloud, const Point3& query, double radius);

/// Exhaustive k-nearest, sorted by (distance, id).
std::vector<int> nearest(const PointCloud& cloud, const Point3& query, int k);

/// O(n^2) union-find over the <= tolerance adjacency relation, size-filtered.
/// Clusters carry sorted ids and are ordered by smallest member id.
std::vector<Cluster> euclidean_cluster(const PointCloud& cloud, double tolerance,
                                       std::size_t min_size, std::size_t max_size);

/// Explicit nested-loop grayscale closing: one dilation pass then one erosion
/// pass, holes skipped in both window scans.
ElevationGrid morphological_close(const ElevationGrid& grid, int kernel);

/// Explicit nested-loop slope filter over 8-neighborhoods.
ElevationGrid slope_filter(const ElevationGrid& grid, double max_slope);

/// Single untrimmed least-squares line fit (x = a z + c, y = b z + d),
/// direction canonicalized upward. The baseline the robust fit must beat.
Vec3 untrimmed_axis(const PointCloud& points);

}  // namespace treescan::ref
