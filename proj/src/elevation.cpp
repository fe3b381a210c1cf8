#include "treescan/elevation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "treescan/parallel.hpp"

namespace treescan {

ElevationGrid::ElevationGrid(double resolution, double side_length, const Vec3& center) {
  if (!(resolution > 0.0) || !(side_length > 0.0)) {
    throw std::invalid_argument("resolution and side length must be positive");
  }
  resolution_ = resolution;
  width_ = static_cast<int>(std::lround(side_length / resolution));
  if (width_ < 1) width_ = 1;
  height_ = width_;
  const double half = 0.5 * width_ * resolution_;
  origin_x_ = std::floor((center.x - half) / resolution_) * resolution_;
  origin_y_ = std::floor((center.y - half) / resolution_) * resolution_;
  cells_.assign(static_cast<std::size_t>(width_) * height_, kHole);
}

Vec3 ElevationGrid::center() const {
  const double half = 0.5 * width_ * resolution_;
  return {origin_x_ + half, origin_y_ + half, 0.0};
}

Vec2 ElevationGrid::cell_center(int ix, int iy) const {
  return {origin_x_ + (ix + 0.5) * resolution_, origin_y_ + (iy + 0.5) * resolution_};
}

bool ElevationGrid::locate(double x, double y, int& ix, int& iy) const {
  const int cx = static_cast<int>(std::floor((x - origin_x_) / resolution_));
  const int cy = static_cast<int>(std::floor((y - origin_y_) / resolution_));
  if (cx < 0 || cy < 0 || cx >= width_ || cy >= height_) return false;
  ix = cx;
  iy = cy;
  return true;
}

void ElevationGrid::integrate(const PointCloud& cloud) {
  if (cloud.frame != Frame::World) {
    throw std::invalid_argument("integrate expects a world-frame cloud");
  }
  const std::int64_t n = static_cast<std::int64_t>(cloud.size());
  std::vector<std::int32_t> cell_of(n);
#pragma omp parallel for schedule(static) if (parallel_enabled())
  for (std::int64_t i = 0; i < n; ++i) {
    int ix, iy;
    cell_of[i] = locate(cloud.pts[i].x, cloud.pts[i].y, ix, iy)
                     ? iy * width_ + ix
                     : -1;
  }
  // Min application is exact and order independent; a serial pass keeps it simple.
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int32_t c = cell_of[i];
    if (c < 0) continue;
    const double z = cloud.pts[i].z;
    if (std::isnan(cells_[c]) || z < cells_[c]) cells_[c] = z;
  }
}

void ElevationGrid::recenter(const Vec3& new_center) {
  const double half = 0.5 * width_ * resolution_;
  const double target_x = std::floor((new_center.x - half) / resolution_) * resolution_;
  const double target_y = std::floor((new_center.y - half) / resolution_) * resolution_;
  const int shift_x = static_cast<int>(std::lround((target_x - origin_x_) / resolution_));
  const int shift_y = static_cast<int>(std::lround((target_y - origin_y_) / resolution_));
  if (shift_x == 0 && shift_y == 0) return;

  std::vector<double> next(cells_.size(), kHole);
  for (int iy = 0; iy < height_; ++iy) {
    const int src_y = iy + shift_y;
    if (src_y < 0 || src_y >= height_) continue;
    for (int ix = 0; ix < width_; ++ix) {
      const int src_x = ix + shift_x;
      if (src_x < 0 || src_x >= width_) continue;
      next[iy * width_ + ix] = cells_[src_y * width_ + src_x];
    }
  }
  cells_ = std::move(next);
  origin_x_ += shift_x * resolution_;
  origin_y_ += shift_y * resolution_;
}

std::size_t ElevationGrid::finite_cell_count() const {
  std::size_t n = 0;
  for (double v : cells_) {
    if (!std::isnan(v)) ++n;
  }
  return n;
}

void ElevationGrid::dump(std::ostream& os) const {
  for (int iy = 0; iy < height_; ++iy) {
    for (int ix = 0; ix < width_; ++ix) {
      if (ix) os << ' ';
      const double v = cell(ix, iy);
      if (std::isnan(v)) {
        os << "nan";
      } else {
        os << v;
      }
    }
    os << '\n';
  }
}

ElevationGrid slope_filter(const ElevationGrid& grid, double max_slope) {
  if (!(max_slope > 0.0)) throw std::invalid_argument("max_slope must be positive");
  ElevationGrid out = grid;
  const int w = grid.width();
  const int h = grid.height();
  const double res = grid.resolution();
#pragma omp parallel for schedule(static) if (parallel_enabled())
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      if (grid.hole(ix, iy)) continue;
      const double v = grid.cell(ix, iy);
      double slope = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = ix + dx;
          const int ny = iy + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          if (grid.hole(nx, ny)) continue;
          const double dist = res * std::sqrt(static_cast<double>(dx * dx + dy * dy));
          slope = std::max(slope, std::abs(grid.cell(nx, ny) - v) / dist);
        }
      }
      if (slope > max_slope) out.cell(ix, iy) = ElevationGrid::kHole;
    }
  }
  return out;
}

ElevationGrid morphological_close(const ElevationGrid& grid, int kernel) {
  if (kernel < 3 || kernel % 2 == 0) throw std::invalid_argument("kernel must be odd and >= 3");
  const int w = grid.width();
  const int h = grid.height();
  const int r = kernel / 2;

  ElevationGrid dilated = grid;
#pragma omp parallel for schedule(static) if (parallel_enabled())
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      double best = -std::numeric_limits<double>::infinity();
      bool any = false;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int nx = ix + dx;
          const int ny = iy + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          if (grid.hole(nx, ny)) continue;
          best = std::max(best, grid.cell(nx, ny));
          any = true;
        }
      }
      dilated.cell(ix, iy) = any ? best : ElevationGrid::kHole;
    }
  }

  ElevationGrid out = grid;
#pragma omp parallel for schedule(static) if (parallel_enabled())
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      double best = std::numeric_limits<double>::infinity();
      bool any = false;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int nx = ix + dx;
          const int ny = iy + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          if (dilated.hole(nx, ny)) continue;
          best = std::min(best, dilated.cell(nx, ny));
          any = true;
        }
      }
      out.cell(ix, iy) = any ? best : ElevationGrid::kHole;
    }
  }
  return out;
}

PointCloud ground_points(const ElevationGrid& current, const ElevationGrid& previous) {
  PointCloud cloud(Frame::World);
  for (const ElevationGrid* grid : {&current, &previous}) {
    for (int iy = 0; iy < grid->height(); ++iy) {
      for (int ix = 0; ix < grid->width(); ++ix) {
        if (grid->hole(ix, iy)) continue;
        const Vec2 c = grid->cell_center(ix, iy);
        cloud.pts.push_back({c.x, c.y, grid->cell(ix, iy)});
      }
    }
  }
  return cloud;
}

}  // namespace treescan
