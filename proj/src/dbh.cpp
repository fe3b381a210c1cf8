#include "treescan/dbh.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "treescan/parallel.hpp"
#include "treescan/rng.hpp"

namespace treescan {

std::optional<Circle2> circumcircle(const Vec2& p0, const Vec2& p1, const Vec2& p2) {
  const double d = 2.0 * (p0.x * (p1.y - p2.y) + p1.x * (p2.y - p0.y) + p2.x * (p0.y - p1.y));
  if (std::abs(d) < 1e-12) return std::nullopt;
  const double s0 = p0.x * p0.x + p0.y * p0.y;
  const double s1 = p1.x * p1.x + p1.y * p1.y;
  const double s2 = p2.x * p2.x + p2.y * p2.y;
  Circle2 c;
  c.center.x = (s0 * (p1.y - p2.y) + s1 * (p2.y - p0.y) + s2 * (p0.y - p1.y)) / d;
  c.center.y = (s0 * (p2.x - p1.x) + s1 * (p0.x - p2.x) + s2 * (p1.x - p0.x)) / d;
  c.radius = (p0 - c.center).norm();
  return c;
}

std::optional<Circle2> pratt_fit(const std::vector<Vec2>& points) {
  const std::size_t n = points.size();
  if (n < 3) return std::nullopt;

  double mean_x = 0, mean_y = 0;
  for (const Vec2& p : points) {
    mean_x += p.x;
    mean_y += p.y;
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);

  double mxx = 0, myy = 0, mxy = 0, mxz = 0, myz = 0, mzz = 0;
  for (const Vec2& p : points) {
    const double u = p.x - mean_x;
    const double v = p.y - mean_y;
    const double z = u * u + v * v;
    mxx += u * u;
    myy += v * v;
    mxy += u * v;
    mxz += u * z;
    myz += v * z;
    mzz += z * z;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  mxx *= inv_n;
  myy *= inv_n;
  mxy *= inv_n;
  mxz *= inv_n;
  myz *= inv_n;
  mzz *= inv_n;

  const double mz = mxx + myy;
  const double cov_xy = mxx * myy - mxy * mxy;
  const double var_z = mzz - mz * mz;

  const double a2 = 4.0 * cov_xy - 3.0 * mz * mz - mzz;
  const double a1 = var_z * mz + 4.0 * cov_xy * mz - mxz * mxz - myz * myz;
  const double a0 =
      mxz * (mxz * myy - myz * mxy) + myz * (myz * mxx - mxz * mxy) - var_z * cov_xy;
  const double a22 = a2 + a2;

  // Newton iteration on the Pratt characteristic polynomial, starting at 0.
  double x = 0.0;
  double y = a0;
  for (int iter = 0; iter < 64; ++iter) {
    const double dy = a1 + x * (a22 + 16.0 * x * x);
    const double x_new = x - y / dy;
    if (!std::isfinite(x_new) || x_new == x) break;
    const double y_new = a0 + x_new * (a1 + x_new * (a2 + 4.0 * x_new * x_new));
    if (std::abs(y_new) >= std::abs(y)) break;
    x = x_new;
    y = y_new;
  }

  const double det = x * x - x * mz + cov_xy;
  if (std::abs(det) < 1e-15) return std::nullopt;

  const double cx = (mxz * (myy - x) - myz * mxy) / det / 2.0;
  const double cy = (myz * (mxx - x) - mxz * mxy) / det / 2.0;
  const double r2 = cx * cx + cy * cy + mz + 2.0 * x;
  if (!(r2 > 0.0)) return std::nullopt;

  Circle2 c;
  c.center = {cx + mean_x, cy + mean_y};
  c.radius = std::sqrt(r2);
  return c;
}

PointCloud slice_at_breast_height(const PointCloud& tree_points, const Point3& base,
                                  const SliceParams& params) {
  PointCloud slice(tree_points.frame);
  const double target = base.z + params.breast_height;
  const double half = 0.5 * params.slice_thickness;
  for (const Point3& p : tree_points.pts) {
    if (std::abs(p.z - target) <= half) slice.pts.push_back(p);
  }
  return slice;
}

std::vector<Vec2> project_to_plane(const PointCloud& points, const Vec3& normal,
                                   const Point3& origin) {
  if (std::abs(normal.norm() - 1.0) > 1e-6) {
    throw std::invalid_argument("plane normal must be unit length");
  }
  Vec3 u{1.0 - normal.x * normal.x, -normal.x * normal.y, -normal.x * normal.z};
  if (u.norm() < 1e-6) {
    u = {-normal.y * normal.x, 1.0 - normal.y * normal.y, -normal.y * normal.z};
  }
  u = u.normalized();
  const Vec3 v = normal.cross(u);

  std::vector<Vec2> out;
  out.reserve(points.size());
  for (const Point3& p : points.pts) {
    const Vec3 d = p - origin;
    out.push_back({d.dot(u), d.dot(v)});
  }
  return out;
}

namespace {

int count_inliers(const std::vector<Vec2>& points, const Circle2& circle, double tolerance) {
  int count = 0;
  for (const Vec2& p : points) {
    if (std::abs((p - circle.center).norm() - circle.radius) <= tolerance) ++count;
  }
  return count;
}

std::vector<Vec2> collect_inliers(const std::vector<Vec2>& points, const Circle2& circle,
                                  double tolerance) {
  std::vector<Vec2> inliers;
  for (const Vec2& p : points) {
    if (std::abs((p - circle.center).norm() - circle.radius) <= tolerance) inliers.push_back(p);
  }
  return inliers;
}

}  // namespace

RansacCircleResult ransac_circle(const std::vector<Vec2>& points, const SliceParams& params,
                                 std::uint64_t seed) {
  const int n = static_cast<int>(points.size());
  if (n < 3) throw std::invalid_argument("ransac_circle needs at least 3 points");

  struct Hypothesis {
    Circle2 circle;
    int inliers = -1;
  };
  const int iterations = std::max(1, params.ransac_iterations);
  std::vector<Hypothesis> hypotheses(iterations);

#pragma omp parallel for schedule(static) if (parallel_enabled())
  for (int iter = 0; iter < iterations; ++iter) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(iter)));
    std::uniform_int_distribution<int> pick(0, n - 1);
    int a = pick(rng);
    int b = pick(rng);
    int c = pick(rng);
    if (a == b || b == c || a == c) continue;
    const auto circle = circumcircle(points[a], points[b], points[c]);
    if (!circle) continue;
    hypotheses[iter].circle = *circle;
    hypotheses[iter].inliers = count_inliers(points, *circle, params.inlier_tolerance);
  }

  // Deterministic winner: best count, lowest iteration index on ties.
  int best = -1;
  for (int iter = 0; iter < iterations; ++iter) {
    if (hypotheses[iter].inliers < 0) continue;
    if (best < 0 || hypotheses[iter].inliers > hypotheses[best].inliers) best = iter;
  }

  RansacCircleResult result;
  if (best < 0) {
    result.status = FitStatus::Degenerate;
    return result;
  }
  const Hypothesis& winner = hypotheses[best];
  if (static_cast<double>(winner.inliers) / n < params.min_inlier_ratio) {
    result.status = FitStatus::LowConfidence;
    return result;
  }

  Circle2 model = winner.circle;
  int model_inliers = winner.inliers;
  const auto refined = pratt_fit(collect_inliers(points, model, params.inlier_tolerance));
  if (refined) {
    const int refined_inliers = count_inliers(points, *refined, params.inlier_tolerance);
    if (refined_inliers >= model_inliers) {
      model = *refined;
      model_inliers = refined_inliers;
    }
  }

  result.status = FitStatus::Ok;
  result.fit.center = model.center;
  result.fit.radius = model.radius;
  result.fit.inlier_count = model_inliers;
  result.fit.inlier_ratio = static_cast<double>(model_inliers) / n;
  return result;
}

DbhEstimate estimate_dbh(const TreeDescriptor& tree, const PointCloud& tree_points,
                         const SliceParams& params, std::uint64_t seed) {
  if (!tree.base) throw std::logic_error("estimate_dbh requires a segmented base");

  DbhEstimate result;
  const PointCloud slice = slice_at_breast_height(tree_points, *tree.base, params);
  if (slice.size() < 10) {
    result.status = FitStatus::InsufficientSlice;
    return result;
  }

  // Project along the trunk axis through the axis point at slice height.
  const double z_slice = tree.base->z + params.breast_height;
  Point3 origin = *tree.base;
  if (std::abs(tree.incline.direction.z) > 1e-9) {
    const Vec2 xy = tree.incline.at_height(z_slice);
    origin = {xy.x, xy.y, z_slice};
  }
  const std::vector<Vec2> projected = project_to_plane(slice, tree.incline.direction, origin);

  const RansacCircleResult circle = ransac_circle(projected, params, seed);
  result.status = circle.status;
  if (circle.status == FitStatus::Ok) {
    result.fit = circle.fit;
    result.dbh = 2.0 * circle.fit.radius;
  }
  return result;
}

}  // namespace treescan
