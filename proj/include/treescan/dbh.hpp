#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "treescan/geometry.hpp"
#include "treescan/tracker.hpp"

namespace treescan {

struct Circle2 {
  Vec2 center;
  double radius = 0.0;
};

struct CircleFit {
  Vec2 center;
  double radius = 0.0;
  int inlier_count = 0;
  double inlier_ratio = 0.0;
};

struct SliceParams {
  double breast_height = 1.4;      // m above the base
  double slice_thickness = 0.10;   // m, full band width
  int ransac_iterations = 500;
  double inlier_tolerance = 0.02;  // m
  double min_inlier_ratio = 0.5;
};

enum class FitStatus {
  Ok,
  InsufficientSlice,  // fewer than 10 points at breast height
  Degenerate,         // no non-collinear sample found
  LowConfidence,      // best consensus below min_inlier_ratio
};

/// Circle through three points; nullopt when collinear.
std::optional<Circle2> circumcircle(const Vec2& p0, const Vec2& p1, const Vec2& p2);

/// Pratt algebraic least-squares circle fit. nullopt when degenerate
/// (fewer than 3 points or collinear input).
std::optional<Circle2> pratt_fit(const std::vector<Vec2>& points);

/// Points of P within slice_thickness/2 of base.z + breast_height.
PointCloud slice_at_breast_height(const PointCloud& tree_points, const Point3& base,
                                  const SliceParams& params);

/// Coordinates of each point in an orthonormal basis of the plane through
/// origin with the given unit normal. The first basis vector is the projection
/// of world x onto the plane (world y when the normal is along x).
std::vector<Vec2> project_to_plane(const PointCloud& points, const Vec3& normal,
                                   const Point3& origin);

struct RansacCircleResult {
  FitStatus status = FitStatus::Degenerate;
  CircleFit fit;
};

/// RANSAC over 3-point circumcircle hypotheses, refined by the Pratt fit on
/// the consensus inliers. The refined model is kept only when it retains at
/// least as many inliers as the raw hypothesis. Deterministic given the seed;
/// iterations are seeded independently so the loop can run in parallel.
/// Throws if given fewer than 3 points.
RansacCircleResult ransac_circle(const std::vector<Vec2>& points, const SliceParams& params,
                                 std::uint64_t seed);

struct DbhEstimate {
  FitStatus status = FitStatus::InsufficientSlice;
  double dbh = 0.0;
  CircleFit fit;
};

/// Slice at breast height, project along the incline, fit a circle;
/// DBH = 2 * radius. Throws if the descriptor has no base.
DbhEstimate estimate_dbh(const TreeDescriptor& tree, const PointCloud& tree_points,
                         const SliceParams& params, std::uint64_t seed);

}  // namespace treescan
