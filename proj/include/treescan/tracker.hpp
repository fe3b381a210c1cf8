#pragma once

#include <map>
#include <optional>
#include <vector>

#include "treescan/clustering.hpp"
#include "treescan/geometry.hpp"
#include "treescan/kdtree.hpp"

namespace treescan {

/// Trunk major axis. Direction is unit length and canonically points up
/// (direction.z >= 0).
struct Line3 {
  Point3 point;
  Vec3 direction;

  /// x/y of the line evaluated at height z. Requires direction.z != 0.
  Vec2 at_height(double z) const {
    const double t = (z - point.z) / direction.z;
    return {point.x + t * direction.x, point.y + t * direction.y};
  }
};

struct TrackerParams {
  double theta_threshold = 30.0 * 3.14159265358979323846 / 180.0;  // radians from vertical
  double h_threshold = 2.0;                                        // min height extent, m
  double match_distance = 0.4;                                     // axis convergence, m
  std::vector<double> trim_schedule{3.0, 2.5, 2.0};                // std-dev multipliers
  double central_height_fraction = 0.9;
};

struct TreeDescriptor {
  int id = -1;
  Line3 incline;
  std::optional<double> dbh;
  std::optional<Point3> base;
  double min_z = 0.0;
  double max_z = 0.0;
  std::size_t point_count = 0;
};

/// Ground points are searched within this radius of the tree's lowest point
/// when localizing the base.
inline constexpr double kBaseSearchRadius = 2.0;

struct AxisFitDiagnostics {
  std::vector<double> residual_sigma;  // one entry per fit, first is untrimmed
  std::size_t survivors = 0;
};

/// Iterative trimmed line regression (x = a z + c, y = b z + d). Each pass
/// drops points farther than k*sigma from the current line or outside the
/// central height fraction, then refits with the next (smaller) k from the
/// trim schedule. Returns nullopt when the fit degenerates (no z spread, or
/// fewer than 3 survivors). Throws if given fewer than 10 points.
std::optional<Line3> fit_major_axis(const PointCloud& points, const TrackerParams& params,
                                    AxisFitDiagnostics* diagnostics = nullptr);

/// Evaluates a cluster as a tree candidate: fits the major axis and accepts
/// iff the axis is within theta_threshold of vertical and the height extent
/// exceeds h_threshold. The returned descriptor has no id assigned.
std::optional<TreeDescriptor> classify_cluster(const PointCloud& cluster,
                                               const TrackerParams& params);

/// True iff the two incline lines pass within match_distance horizontally at
/// the test height: the base of the higher cluster when the height ranges are
/// disjoint, otherwise the midpoint of their overlap.
bool match_trees(const TreeDescriptor& a, const TreeDescriptor& b, const TrackerParams& params);

/// Among ground points within kBaseSearchRadius of the tree's lowest point,
/// the one closest to the incline line. nullopt when no ground is in range.
std::optional<Point3> segment_base(const TreeDescriptor& tree, const PointCloud& tree_points,
                                   const SpatialIndex& ground_index);

class TreeInventory {
 public:
  struct Entry {
    TreeDescriptor desc;
    PointCloud points{Frame::World};
  };

  const std::map<int, Entry>& trees() const { return trees_; }
  std::map<int, Entry>& trees() { return trees_; }
  std::size_t size() const { return trees_.size(); }
  bool empty() const { return trees_.empty(); }

  Entry* find(int id);
  const Entry* find(int id) const;

  /// Assigns a fresh id (never reused) and inserts.
  int insert(TreeDescriptor desc, PointCloud points);
  void erase(int id) { trees_.erase(id); }

 private:
  std::map<int, Entry> trees_;
  int next_id_ = 0;
};

/// One tracking step over the clusters of a processed scan. Classification is
/// evaluated per cluster (in parallel); accepted clusters are merged into the
/// first matching tree, then matching inventory trees are cascade-merged until
/// a fixed point, otherwise inserted as new trees. Merged trees adopt the
/// lower id. Returns the ids of trees inserted or updated this scan.
std::vector<int> track(TreeInventory& inventory, const std::vector<Cluster>& clusters,
                       const PointCloud& cloud, const TrackerParams& params);

}  // namespace treescan
