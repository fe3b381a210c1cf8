#include "treescan/geometry.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>

#include "treescan/parallel.hpp"

namespace treescan {

void validate_finite(const PointCloud& cloud) {
  for (const auto& p : cloud.pts) {
    if (!p.finite()) throw std::invalid_argument("point cloud contains non-finite coordinates");
  }
}

PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose) {
  if (cloud.frame != Frame::Sensor) {
    throw std::invalid_argument("transform_cloud expects a sensor-frame cloud");
  }
  if (!pose.valid()) throw std::invalid_argument("invalid pose");
  validate_finite(cloud);

  PointCloud out(Frame::World);
  out.pts.resize(cloud.size());
  const std::int64_t n = static_cast<std::int64_t>(cloud.size());
#pragma omp parallel for schedule(static) if (parallel_enabled())
  for (std::int64_t i = 0; i < n; ++i) {
    out.pts[i] = pose.apply(cloud.pts[i]);
  }
  return out;
}

namespace {

// Packed voxel key; valid for cell indices within +/-2^20 (84 km at 8 cm cells).
std::uint64_t voxel_key(const Point3& p, double inv_size) {
  const auto ix = static_cast<std::int64_t>(std::floor(p.x * inv_size));
  const auto iy = static_cast<std::int64_t>(std::floor(p.y * inv_size));
  const auto iz = static_cast<std::int64_t>(std::floor(p.z * inv_size));
  const std::uint64_t ux = static_cast<std::uint64_t>(ix + (1 << 20)) & 0x1FFFFF;
  const std::uint64_t uy = static_cast<std::uint64_t>(iy + (1 << 20)) & 0x1FFFFF;
  const std::uint64_t uz = static_cast<std::uint64_t>(iz + (1 << 20)) & 0x1FFFFF;
  return (ux << 42) | (uy << 21) | uz;
}

}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size) {
  if (!(voxel_size > 0.0)) throw std::invalid_argument("voxel_size must be positive");

  const std::int64_t n = static_cast<std::int64_t>(cloud.size());
  PointCloud out(cloud.frame);
  if (n == 0) return out;

  std::vector<std::uint64_t> keys(n);
  const double inv = 1.0 / voxel_size;
#pragma omp parallel for schedule(static) if (parallel_enabled())
  for (std::int64_t i = 0; i < n; ++i) {
    keys[i] = voxel_key(cloud.pts[i], inv);
  }

  // Sort indices by (key, index): groups voxel members contiguously and fixes
  // the accumulation order so results do not depend on the thread count.
  std::vector<std::int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    return keys[a] != keys[b] ? keys[a] < keys[b] : a < b;
  });

  std::vector<std::int64_t> run_starts;
  for (std::int64_t i = 0; i < n; ++i) {
    if (i == 0 || keys[order[i]] != keys[order[i - 1]]) run_starts.push_back(i);
  }
  run_starts.push_back(n);

  const std::int64_t runs = static_cast<std::int64_t>(run_starts.size()) - 1;
  out.pts.resize(runs);
#pragma omp parallel for schedule(static) if (parallel_enabled())
  for (std::int64_t r = 0; r < runs; ++r) {
    Vec3 sum;
    for (std::int64_t i = run_starts[r]; i < run_starts[r + 1]; ++i) {
      sum += cloud.pts[order[i]];
    }
    const double count = static_cast<double>(run_starts[r + 1] - run_starts[r]);
    out.pts[r] = sum * (1.0 / count);
  }
  return out;
}

double point_line_distance(const Point3& p, const Point3& on_line, const Vec3& direction) {
  const Vec3 d = p - on_line;
  return d.cross(direction).norm();
}

}  // namespace treescan
