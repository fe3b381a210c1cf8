#include "treescan/reference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace treescan::ref {

namespace {

struct VoxelCoord {
  std::int64_t x, y, z;
  bool operator==(const VoxelCoord& o) const { return x == o.x && y == o.y && z == o.z; }
};

struct VoxelCoordHash {
  std::size_t operator()(const VoxelCoord& c) const {
    std::size_t h = std::hash<std::int64_t>{}(c.x);
    h = h * 1000003u ^ std::hash<std::int64_t>{}(c.y);
    h = h * 1000003u ^ std::hash<std::int64_t>{}(c.z);
    return h;
  }
};

int find_root(std::vector<int>& parent, int i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size) {
  if (!(voxel_size > 0.0)) throw std::invalid_argument("voxel_size must be positive");
  std::unordered_map<VoxelCoord, std::vector<int>, VoxelCoordHash> groups;
  for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
    const Point3& p = cloud.pts[i];
    VoxelCoord c{static_cast<std::int64_t>(std::floor(p.x / voxel_size)),
                 static_cast<std::int64_t>(std::floor(p.y / voxel_size)),
                 static_cast<std::int64_t>(std::floor(p.z / voxel_size))};
    groups[c].push_back(i);
  }
  PointCloud out(cloud.frame);
  out.pts.reserve(groups.size());
  for (const auto& [coord, members] : groups) {
    Vec3 sum;
    for (int id : members) sum += cloud.pts[id];
    out.pts.push_back(sum * (1.0 / static_cast<double>(members.size())));
  }
  return out;
}

std::vector<int> radius_search(const PointCloud& cloud, const Point3& query, double radius) {
  std::vector<int> out;
  const double r2 = radius * radius;
  for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
    if (squared_distance(cloud.pts[i], query) <= r2) out.push_back(i);
  }
  return out;
}

std::vector<int> nearest(const PointCloud& cloud, const Point3& query, int k) {
  std::vector<int> ids(cloud.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    const double da = squared_distance(cloud.pts[a], query);
    const double db = squared_distance(cloud.pts[b], query);
    return da != db ? da < db : a < b;
  });
  if (static_cast<int>(ids.size()) > k) ids.resize(k);
  return ids;
}

std::vector<Cluster> euclidean_cluster(const PointCloud& cloud, double tolerance,
                                       std::size_t min_size, std::size_t max_size) {
  const int n = static_cast<int>(cloud.size());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const double t2 = tolerance * tolerance;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (squared_distance(cloud.pts[i], cloud.pts[j]) <= t2) {
        parent[find_root(parent, i)] = find_root(parent, j);
      }
    }
  }
  std::unordered_map<int, std::vector<int>> components;
  for (int i = 0; i < n; ++i) components[find_root(parent, i)].push_back(i);

  std::vector<Cluster> clusters;
  for (auto& [root, ids] : components) {
    if (ids.size() < min_size || (max_size != 0 && ids.size() > max_size)) continue;
    std::sort(ids.begin(), ids.end());
    Cluster c;
    c.ids = std::move(ids);
    constexpr double inf = std::numeric_limits<double>::infinity();
    c.bbox.min = {inf, inf, inf};
    c.bbox.max = {-inf, -inf, -inf};
    for (int id : c.ids) {
      const Point3& p = cloud.pts[id];
      c.bbox.min.x = std::min(c.bbox.min.x, p.x);
      c.bbox.min.y = std::min(c.bbox.min.y, p.y);
      c.bbox.min.z = std::min(c.bbox.min.z, p.z);
      c.bbox.max.x = std::max(c.bbox.max.x, p.x);
      c.bbox.max.y = std::max(c.bbox.max.y, p.y);
      c.bbox.max.z = std::max(c.bbox.max.z, p.z);
    }
    clusters.push_back(std::move(c));
  }
  std::sort(clusters.begin(), clusters.end(),
            [](const Cluster& a, const Cluster& b) { return a.ids.front() < b.ids.front(); });
  return clusters;
}

ElevationGrid morphological_close(const ElevationGrid& grid, int kernel) {
  if (kernel < 3 || kernel % 2 == 0) throw std::invalid_argument("kernel must be odd and >= 3");
  const int w = grid.width();
  const int h = grid.height();
  const int r = kernel / 2;

  ElevationGrid dilated = grid;
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      double best = -std::numeric_limits<double>::infinity();
      bool any = false;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int nx = ix + dx;
          const int ny = iy + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          if (!grid.hole(nx, ny)) {
            best = std::max(best, grid.cell(nx, ny));
            any = true;
          }
        }
      }
      dilated.cell(ix, iy) = any ? best : ElevationGrid::kHole;
    }
  }

  ElevationGrid eroded = grid;
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      double best = std::numeric_limits<double>::infinity();
      bool any = false;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int nx = ix + dx;
          const int ny = iy + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          if (!dilated.hole(nx, ny)) {
            best = std::min(best, dilated.cell(nx, ny));
            any = true;
          }
        }
      }
      eroded.cell(ix, iy) = any ? best : ElevationGrid::kHole;
    }
  }
  return eroded;
}

ElevationGrid slope_filter(const ElevationGrid& grid, double max_slope) {
  if (!(max_slope > 0.0)) throw std::invalid_argument("max_slope must be positive");
  ElevationGrid out = grid;
  const int w = grid.width();
  const int h = grid.height();
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      if (grid.hole(ix, iy)) continue;
      double slope = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = ix + dx;
          const int ny = iy + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          if (grid.hole(nx, ny)) continue;
          const double dist =
              grid.resolution() * std::sqrt(static_cast<double>(dx * dx + dy * dy));
          slope = std::max(slope, std::abs(grid.cell(nx, ny) - grid.cell(ix, iy)) / dist);
        }
      }
      if (slope > max_slope) out.cell(ix, iy) = ElevationGrid::kHole;
    }
  }
  return out;
}

Vec3 untrimmed_axis(const PointCloud& points) {
  const double n = static_cast<double>(points.size());
  double sz = 0, sx = 0, sy = 0, szz = 0, szx = 0, szy = 0;
  for (const Point3& p : points.pts) {
    sz += p.z;
    sx += p.x;
    sy += p.y;
    szz += p.z * p.z;
    szx += p.z * p.x;
    szy += p.z * p.y;
  }
  const double var_z = szz - sz * sz / n;
  if (!(var_z > 0.0)) throw std::invalid_argument("degenerate: no z spread");
  const double a = (szx - sz * sx / n) / var_z;
  const double b = (szy - sz * sy / n) / var_z;
  return Vec3{a, b, 1.0}.normalized();
}

}  // namespace treescan::ref
