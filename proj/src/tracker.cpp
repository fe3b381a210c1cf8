#include "treescan/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <stdexcept>

#include "treescan/parallel.hpp"

namespace treescan {

namespace {

constexpr double kDegenerateZVariance = 1e-12;

struct LineFit {
  Line3 line;
  bool ok = false;
};

/// Least squares of x and y against z over a subset of points.
LineFit fit_line_subset(const PointCloud& points, const std::vector<int>& subset) {
  LineFit result;
  const double n = static_cast<double>(subset.size());
  double mx = 0, my = 0, mz = 0;
  for (int i : subset) {
    mx += points.pts[i].x;
    my += points.pts[i].y;
    mz += points.pts[i].z;
  }
  mx /= n;
  my /= n;
  mz /= n;

  double szz = 0, szx = 0, szy = 0;
  for (int i : subset) {
    const double dz = points.pts[i].z - mz;
    szz += dz * dz;
    szx += dz * (points.pts[i].x - mx);
    szy += dz * (points.pts[i].y - my);
  }
  if (szz / n < kDegenerateZVariance) return result;

  const double a = szx / szz;
  const double b = szy / szz;
  result.line.point = {mx, my, mz};
  result.line.direction = Vec3{a, b, 1.0}.normalized();
  result.ok = true;
  return result;
}

struct ResidualStats {
  double mean = 0.0;
  double sigma = 0.0;
};

ResidualStats residual_stats(const PointCloud& points, const std::vector<int>& subset,
                             const Line3& line, std::vector<double>& dists) {
  dists.resize(subset.size());
  double sum = 0;
  for (std::size_t k = 0; k < subset.size(); ++k) {
    dists[k] = point_line_distance(points.pts[subset[k]], line.point, line.direction);
    sum += dists[k];
  }
  ResidualStats stats;
  stats.mean = sum / static_cast<double>(subset.size());
  double var = 0;
  for (double d : dists) var += (d - stats.mean) * (d - stats.mean);
  stats.sigma = std::sqrt(var / static_cast<double>(subset.size()));
  return stats;
}

void height_extent(const PointCloud& points, double& min_z, double& max_z) {
  min_z = std::numeric_limits<double>::infinity();
  max_z = -std::numeric_limits<double>::infinity();
  for (const Point3& p : points.pts) {
    min_z = std::min(min_z, p.z);
    max_z = std::max(max_z, p.z);
  }
}

}  // namespace

std::optional<Line3> fit_major_axis(const PointCloud& points, const TrackerParams& params,
                                    AxisFitDiagnostics* diagnostics) {
  if (points.size() < 10) throw std::invalid_argument("fit_major_axis needs at least 10 points");

  double min_z, max_z;
  height_extent(points, min_z, max_z);
  const double margin = 0.5 * (1.0 - params.central_height_fraction) * (max_z - min_z);
  const double z_lo = min_z + margin;
  const double z_hi = max_z - margin;

  std::vector<int> active(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) active[i] = static_cast<int>(i);

  LineFit fit = fit_line_subset(points, active);
  if (!fit.ok) return std::nullopt;

  std::vector<double> dists;
  if (diagnostics) {
    diagnostics->residual_sigma.clear();
    diagnostics->residual_sigma.push_back(residual_stats(points, active, fit.line, dists).sigma);
  }

  for (double k : params.trim_schedule) {
    // Trunk points sit near the shell radius, so the cut is on the deviation
    // from the mean distance; a plain distance cut would drop the whole shell.
    const ResidualStats stats = residual_stats(points, active, fit.line, dists);
    std::vector<int> kept;
    kept.reserve(active.size());
    for (std::size_t i = 0; i < active.size(); ++i) {
      const double z = points.pts[active[i]].z;
      if (std::abs(dists[i] - stats.mean) <= k * stats.sigma && z >= z_lo && z <= z_hi) {
        kept.push_back(active[i]);
      }
    }
    if (kept.size() < 3) return std::nullopt;
    active = std::move(kept);
    fit = fit_line_subset(points, active);
    if (!fit.ok) return std::nullopt;
    if (diagnostics) {
      diagnostics->residual_sigma.push_back(residual_stats(points, active, fit.line, dists).sigma);
    }
  }
  if (diagnostics) diagnostics->survivors = active.size();
  return fit.line;
}

std::optional<TreeDescriptor> classify_cluster(const PointCloud& cluster,
                                               const TrackerParams& params) {
  if (cluster.size() < 10) return std::nullopt;
  auto axis = fit_major_axis(cluster, params);
  if (!axis) return std::nullopt;

  const double angle_from_vertical = std::acos(std::clamp(axis->direction.z, -1.0, 1.0));
  double min_z, max_z;
  height_extent(cluster, min_z, max_z);
  if (angle_from_vertical >= params.theta_threshold) return std::nullopt;
  if (!(max_z - min_z > params.h_threshold)) return std::nullopt;

  TreeDescriptor desc;
  desc.incline = *axis;
  desc.min_z = min_z;
  desc.max_z = max_z;
  desc.point_count = cluster.size();
  return desc;
}

bool match_trees(const TreeDescriptor& a, const TreeDescriptor& b, const TrackerParams& params) {
  if (std::abs(a.incline.direction.z) < 1e-9 || std::abs(b.incline.direction.z) < 1e-9) {
    return false;
  }
  double z_test;
  if (a.max_z < b.min_z || b.max_z < a.min_z) {
    // Vertically disjoint: test at the base of the higher cluster.
    z_test = std::max(a.min_z, b.min_z);
  } else {
    z_test = 0.5 * (std::max(a.min_z, b.min_z) + std::min(a.max_z, b.max_z));
  }
  const Vec2 pa = a.incline.at_height(z_test);
  const Vec2 pb = b.incline.at_height(z_test);
  return (pa - pb).norm() < params.match_distance;
}

std::optional<Point3> segment_base(const TreeDescriptor& tree, const PointCloud& tree_points,
                                   const SpatialIndex& ground_index) {
  if (tree_points.empty() || ground_index.empty()) return std::nullopt;

  std::size_t lowest = 0;
  for (std::size_t i = 1; i < tree_points.size(); ++i) {
    if (tree_points.pts[i].z < tree_points.pts[lowest].z) lowest = i;
  }
  const std::vector<int> nearby =
      ground_index.radius_search(tree_points.pts[lowest], kBaseSearchRadius);
  if (nearby.empty()) return std::nullopt;

  int best = nearby.front();
  double best_dist = std::numeric_limits<double>::infinity();
  for (int id : nearby) {
    const double d =
        point_line_distance(ground_index.point(id), tree.incline.point, tree.incline.direction);
    if (d < best_dist) {
      best_dist = d;
      best = id;
    }
  }
  return ground_index.point(best);
}

TreeInventory::Entry* TreeInventory::find(int id) {
  auto it = trees_.find(id);
  return it == trees_.end() ? nullptr : &it->second;
}

const TreeInventory::Entry* TreeInventory::find(int id) const {
  auto it = trees_.find(id);
  return it == trees_.end() ? nullptr : &it->second;
}

int TreeInventory::insert(TreeDescriptor desc, PointCloud points) {
  const int id = next_id_++;
  desc.id = id;
  trees_[id] = Entry{std::move(desc), std::move(points)};
  return id;
}

namespace {

/// Recomputes descriptor fields from the accumulated points (t = f(P)).
/// Base and DBH are owned by their own stages and left untouched.
void reevaluate(TreeInventory::Entry& entry, const TrackerParams& params) {
  height_extent(entry.points, entry.desc.min_z, entry.desc.max_z);
  entry.desc.point_count = entry.points.size();
  auto axis = fit_major_axis(entry.points, params);
  if (axis) entry.desc.incline = *axis;
}

int first_match(const TreeInventory& inventory, const TreeDescriptor& desc,
                const TrackerParams& params, int skip_id) {
  for (const auto& [id, entry] : inventory.trees()) {
    if (id == skip_id) continue;
    if (match_trees(entry.desc, desc, params)) return id;
  }
  return -1;
}

}  // namespace

std::vector<int> track(TreeInventory& inventory, const std::vector<Cluster>& clusters,
                       const PointCloud& cloud, const TrackerParams& params) {
  const std::int64_t n = static_cast<std::int64_t>(clusters.size());
  std::vector<PointCloud> cluster_clouds(n);
  std::vector<std::optional<TreeDescriptor>> candidates(n);

#pragma omp parallel for schedule(dynamic, 1) if (parallel_enabled())
  for (std::int64_t i = 0; i < n; ++i) {
    PointCloud c(cloud.frame);
    c.pts.reserve(clusters[i].ids.size());
    for (int id : clusters[i].ids) c.pts.push_back(cloud.pts[id]);
    candidates[i] = classify_cluster(c, params);
    cluster_clouds[i] = std::move(c);
  }

  std::set<int> updated;
  for (std::int64_t i = 0; i < n; ++i) {
    if (!candidates[i]) continue;
    const TreeDescriptor& candidate = *candidates[i];

    const int match_id = first_match(inventory, candidate, params, -1);
    if (match_id < 0) {
      updated.insert(inventory.insert(candidate, std::move(cluster_clouds[i])));
      continue;
    }

    int current = match_id;
    {
      auto* entry = inventory.find(current);
      entry->points.pts.insert(entry->points.pts.end(), cluster_clouds[i].pts.begin(),
                               cluster_clouds[i].pts.end());
      reevaluate(*entry, params);
    }

    // Cascade: keep merging while the updated tree matches another inventory
    // entry. The surviving tree adopts the lower (older) id.
    while (true) {
      auto* entry = inventory.find(current);
      const int other = first_match(inventory, entry->desc, params, current);
      if (other < 0) break;

      const int keep = std::min(current, other);
      const int absorb = std::max(current, other);
      auto* keep_entry = inventory.find(keep);
      auto* absorb_entry = inventory.find(absorb);
      keep_entry->points.pts.insert(keep_entry->points.pts.end(),
                                    absorb_entry->points.pts.begin(),
                                    absorb_entry->points.pts.end());
      inventory.erase(absorb);
      reevaluate(*keep_entry, params);
      updated.erase(absorb);
      current = keep;
    }
    updated.insert(current);
  }

  return {updated.begin(), updated.end()};
}

}  // namespace treescan
