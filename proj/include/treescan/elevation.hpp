#pragma once

#include <iosfwd>
#include <vector>

#include "treescan/geometry.hpp"

namespace treescan {

/// Rolling sensor-centric 2D height raster. Cells hold the minimum observed
/// world z or are holes. The grid is axis-aligned in world x/y; its origin is
/// snapped to whole-cell offsets so recentering keeps cell footprints stable.
class ElevationGrid {
 public:
  ElevationGrid() = default;
  ElevationGrid(double resolution, double side_length, const Vec3& center = {});

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  double side_length() const { return width_ * resolution_; }
  Vec3 center() const;

  bool hole(int ix, int iy) const { return std::isnan(cell(ix, iy)); }
  double cell(int ix, int iy) const { return cells_[iy * width_ + ix]; }
  double& cell(int ix, int iy) { return cells_[iy * width_ + ix]; }

  /// World x/y of the cell center.
  Vec2 cell_center(int ix, int iy) const;

  /// False when (x, y) falls outside the grid footprint.
  bool locate(double x, double y, int& ix, int& iy) const;

  /// Min-fusion of a world-frame cloud: a cell receiving points keeps the
  /// minimum of its previous height and the lowest incoming z.
  void integrate(const PointCloud& cloud);

  /// Moves the window; surviving cells keep their values, newly exposed cells
  /// become holes. The offset is snapped to whole cells.
  void recenter(const Vec3& new_center);

  std::size_t finite_cell_count() const;

  /// Row-major ASCII dump, `nan` for holes, one row per line.
  void dump(std::ostream& os) const;

  static constexpr double kHole = std::numeric_limits<double>::quiet_NaN();

 private:
  double resolution_ = 0.0;
  int width_ = 0;
  int height_ = 0;
  double origin_x_ = 0.0;  // world coordinate of cell (0,0) lower corner
  double origin_y_ = 0.0;
  std::vector<double> cells_;
};

/// Cell slope = max over 8-neighbors of |dh| / center distance, holes skipped;
/// cells steeper than max_slope become holes. Never creates finite values.
ElevationGrid slope_filter(const ElevationGrid& grid, double max_slope);

/// Grayscale closing: neighborhood max (dilation, holes ignored) then
/// neighborhood min (erosion, holes ignored). Kernel must be odd and >= 3.
/// Never lowers or deletes finite cells; fills holes within reach of data.
ElevationGrid morphological_close(const ElevationGrid& grid, int kernel);

/// One point per non-hole cell (center x/y, height z) from both grids.
PointCloud ground_points(const ElevationGrid& current, const ElevationGrid& previous);

}  // namespace treescan
