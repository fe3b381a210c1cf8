#pragma once

#include <vector>

#include "treescan/geometry.hpp"

namespace treescan {

/// Build-once / query-many k-d tree over a point cloud snapshot. Queries are
/// const and safe to run concurrently from multiple threads.
class SpatialIndex {
 public:
  SpatialIndex() = default;
  explicit SpatialIndex(const PointCloud& cloud);

  /// Ids (indices into the source cloud) of all points with distance <= radius,
  /// sorted ascending. Throws if radius <= 0.
  std::vector<int> radius_search(const Point3& query, double radius) const;

  /// Ids of the k nearest points, sorted by (distance, id).
  std::vector<int> nearest(const Point3& query, int k) const;

  std::size_t size() const { return pts_.size(); }
  bool empty() const { return pts_.empty(); }
  const Point3& point(int id) const { return pts_[id]; }

 private:
  static constexpr int kLeafSize = 16;

  struct Node {
    double split = 0.0;
    int axis = -1;       // -1 marks a leaf
    int left = -1;
    int right = -1;
    int begin = 0;       // leaf range into order_
    int end = 0;
  };

  int build(int begin, int end, int depth);

  std::vector<Point3> pts_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace treescan
