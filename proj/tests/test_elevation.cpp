#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "treescan/elevation.hpp"
#include "treescan/reference.hpp"

using namespace treescan;

namespace {

bool grids_identical(const ElevationGrid& a, const ElevationGrid& b) {
  if (a.width() != b.width() || a.height() != b.height()) return false;
  for (int iy = 0; iy < a.height(); ++iy) {
    for (int ix = 0; ix < a.width(); ++ix) {
      if (a.hole(ix, iy) != b.hole(ix, iy)) return false;
      if (!a.hole(ix, iy) && a.cell(ix, iy) != b.cell(ix, iy)) return false;
    }
  }
  return true;
}

ElevationGrid flat_grid(double value, double resolution = 0.16, double side = 3.2) {
  ElevationGrid grid(resolution, side);
  for (int iy = 0; iy < grid.height(); ++iy) {
    for (int ix = 0; ix < grid.width(); ++ix) grid.cell(ix, iy) = value;
  }
  return grid;
}

}  // namespace

TEST_CASE("integrating one point fills exactly one cell") {
  ElevationGrid grid(0.16, 32.0);
  PointCloud cloud(Frame::World);
  cloud.pts = {{1.0, 2.0, 3.5}};
  grid.integrate(cloud);
  CHECK(grid.finite_cell_count() == 1);
  int ix, iy;
  REQUIRE(grid.locate(1.0, 2.0, ix, iy));
  CHECK(grid.cell(ix, iy) == 3.5);
}

TEST_CASE("cells fuse with the minimum rule") {
  ElevationGrid grid(0.16, 32.0);
  PointCloud cloud(Frame::World);
  cloud.pts = {{0.01, 0.01, 2.0}, {0.02, 0.02, 0.5}, {0.03, 0.03, 7.0}};
  grid.integrate(cloud);
  int ix, iy;
  REQUIRE(grid.locate(0.02, 0.02, ix, iy));
  CHECK(grid.cell(ix, iy) == 0.5);
}

TEST_CASE("integration is monotone non-increasing and order independent per cell") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10, 10);
  std::uniform_real_distribution<double> uz(0, 5);
  PointCloud a(Frame::World), b(Frame::World);
  for (int i = 0; i < 500; ++i) a.pts.push_back({u(rng), u(rng), uz(rng)});
  for (int i = 0; i < 500; ++i) b.pts.push_back({u(rng), u(rng), uz(rng)});

  ElevationGrid ab(0.16, 32.0), ba(0.16, 32.0);
  ab.integrate(a);
  const ElevationGrid after_first = ab;
  ab.integrate(b);
  ba.integrate(b);
  ba.integrate(a);
  CHECK(grids_identical(ab, ba));
  for (int iy = 0; iy < ab.height(); ++iy) {
    for (int ix = 0; ix < ab.width(); ++ix) {
      if (!after_first.hole(ix, iy)) {
        CHECK(ab.cell(ix, iy) <= after_first.cell(ix, iy));
      }
    }
  }
}

TEST_CASE("a sampled flat plane integrates to plane height") {
  ElevationGrid grid(0.16, 32.0);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-15, 15);
  PointCloud cloud(Frame::World);
  for (int i = 0; i < 10000; ++i) cloud.pts.push_back({u(rng), u(rng), 0.0});
  grid.integrate(cloud);
  CHECK(grid.finite_cell_count() > 1000);
  for (int iy = 0; iy < grid.height(); ++iy) {
    for (int ix = 0; ix < grid.width(); ++ix) {
      if (!grid.hole(ix, iy)) CHECK(std::abs(grid.cell(ix, iy)) < 1e-12);
    }
  }
}

TEST_CASE("points outside the footprint are ignored") {
  ElevationGrid grid(0.16, 32.0);
  PointCloud cloud(Frame::World);
  cloud.pts = {{100.0, 0.0, 1.0}};
  grid.integrate(cloud);
  CHECK(grid.finite_cell_count() == 0);
}

TEST_CASE("recenter by zero offset keeps the grid") {
  ElevationGrid grid = flat_grid(1.25);
  const ElevationGrid before = grid;
  grid.recenter(grid.center());
  CHECK(grids_identical(before, grid));
}

TEST_CASE("recenter by a full side length clears everything") {
  ElevationGrid grid = flat_grid(1.0, 0.16, 3.2);
  grid.recenter(grid.center() + Vec3{3.2, 0, 0});
  CHECK(grid.finite_cell_count() == 0);
}

TEST_CASE("recenter by half a side keeps the surviving half cell-exact") {
  const double res = 0.16, side = 3.2;
  ElevationGrid grid(res, side);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uz(0, 3);
  for (int iy = 0; iy < grid.height(); ++iy) {
    for (int ix = 0; ix < grid.width(); ++ix) grid.cell(ix, iy) = uz(rng);
  }
  const ElevationGrid before = grid;
  grid.recenter(grid.center() + Vec3{side / 2.0, 0, 0});

  const int shift = grid.width() / 2;
  for (int iy = 0; iy < grid.height(); ++iy) {
    for (int ix = 0; ix < grid.width(); ++ix) {
      const int src = ix + shift;
      if (src < grid.width()) {
        CHECK(grid.cell(ix, iy) == before.cell(src, iy));
      } else {
        CHECK(grid.hole(ix, iy));
      }
    }
  }
  // Cell footprints stay aligned to the resolution lattice.
  CHECK(std::abs(grid.cell_center(0, 0).x - before.cell_center(shift, 0).x) < 1e-12);
}

TEST_CASE("slope filter leaves a flat grid unchanged") {
  const ElevationGrid grid = flat_grid(2.0);
  CHECK(grids_identical(grid, slope_filter(grid, 1.0)));
}

TEST_CASE("slope filter removes a spike") {
  ElevationGrid grid = flat_grid(0.0, 0.16, 3.2);
  grid.cell(10, 10) = 5.0;
  const ElevationGrid out = slope_filter(grid, 1.0);
  CHECK(out.hole(10, 10));
  // Neighbors see the spike too and go with it.
  CHECK(out.hole(9, 10));
  // Cells two away are untouched.
  CHECK(!out.hole(8, 10));
  CHECK(out.cell(8, 10) == 0.0);
}

TEST_CASE("a ramp below the threshold passes the slope filter") {
  const double res = 0.16;
  ElevationGrid grid(res, 3.2);
  for (int iy = 0; iy < grid.height(); ++iy) {
    for (int ix = 0; ix < grid.width(); ++ix) {
      grid.cell(ix, iy) = 0.5 * grid.cell_center(ix, iy).x;  // grade 0.5
    }
  }
  CHECK(grids_identical(grid, slope_filter(grid, 1.0)));
}

TEST_CASE("slope filter never creates finite values and matches the reference") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> uz(0, 4);
  std::uniform_real_distribution<double> u01(0, 1);
  ElevationGrid grid(0.16, 6.4);
  for (int iy = 0; iy < grid.height(); ++iy) {
    for (int ix = 0; ix < grid.width(); ++ix) {
      if (u01(rng) < 0.8) grid.cell(ix, iy) = uz(rng);
    }
  }
  const ElevationGrid out = slope_filter(grid, 1.0);
  CHECK(grids_identical(out, ref::slope_filter(grid, 1.0)));
  for (int iy = 0; iy < grid.height(); ++iy) {
    for (int ix = 0; ix < grid.width(); ++ix) {
      if (grid.hole(ix, iy)) CHECK(out.hole(ix, iy));
      if (!out.hole(ix, iy)) CHECK(out.cell(ix, iy) == grid.cell(ix, iy));
    }
  }
}

TEST_CASE("closing a flat grid without holes changes nothing") {
  const ElevationGrid grid = flat_grid(1.5);
  CHECK(grids_identical(grid, morphological_close(grid, 3)));
}

TEST_CASE("closing fills a single interior hole on a flat grid") {
  ElevationGrid grid = flat_grid(0.0, 0.16, 3.2);
  grid.cell(7, 7) = ElevationGrid::kHole;
  const ElevationGrid out = morphological_close(grid, 3);
  CHECK(!out.hole(7, 7));
  CHECK(out.cell(7, 7) == 0.0);
}

TEST_CASE("closing rejects bad kernels") {
  const ElevationGrid grid = flat_grid(0.0);
  CHECK_THROWS_AS(morphological_close(grid, 2), std::invalid_argument);
  CHECK_THROWS_AS(morphological_close(grid, 1), std::invalid_argument);
}

TEST_CASE("closing on smooth terrain with scattered holes matches the reference") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u01(0, 1);
  ElevationGrid grid(0.16, 9.6);
  for (int iy = 0; iy < grid.height(); ++iy) {
    for (int ix = 0; ix < grid.width(); ++ix) {
      const Vec2 c = grid.cell_center(ix, iy);
      grid.cell(ix, iy) = 0.4 * std::sin(0.3 * c.x) + 0.3 * std::cos(0.25 * c.y);
    }
  }
  int holes = 0;
  for (int iy = 0; iy < grid.height(); ++iy) {
    for (int ix = 0; ix < grid.width(); ++ix) {
      if (u01(rng) < 0.05) {
        grid.cell(ix, iy) = ElevationGrid::kHole;
        ++holes;
      }
    }
  }
  REQUIRE(holes > 0);
  const ElevationGrid out = morphological_close(grid, 3);
  CHECK(grids_identical(out, ref::morphological_close(grid, 3)));

  int remaining_single = 0;
  for (int iy = 1; iy + 1 < out.height(); ++iy) {
    for (int ix = 1; ix + 1 < out.width(); ++ix) {
      if (!out.hole(ix, iy)) continue;
      bool isolated = true;
      for (int dy = -1; dy <= 1 && isolated; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx || dy) && out.hole(ix + dx, iy + dy)) {
            isolated = false;
            break;
          }
        }
      }
      if (isolated) ++remaining_single;
    }
  }
  CHECK(remaining_single == 0);

  // Closing never deletes or lowers finite cells, and fills stay within the
  // height range of the doubled kernel window.
  for (int iy = 0; iy < grid.height(); ++iy) {
    for (int ix = 0; ix < grid.width(); ++ix) {
      if (!grid.hole(ix, iy)) {
        CHECK(!out.hole(ix, iy));
        CHECK(out.cell(ix, iy) >= grid.cell(ix, iy));
      } else if (!out.hole(ix, iy)) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (int dy = -2; dy <= 2; ++dy) {
          for (int dx = -2; dx <= 2; ++dx) {
            const int nx = ix + dx, ny = iy + dy;
            if (nx < 0 || ny < 0 || nx >= grid.width() || ny >= grid.height()) continue;
            if (grid.hole(nx, ny)) continue;
            lo = std::min(lo, grid.cell(nx, ny));
            hi = std::max(hi, grid.cell(nx, ny));
          }
        }
        CHECK(out.cell(ix, iy) >= lo);
        CHECK(out.cell(ix, iy) <= hi);
      }
    }
  }
}

TEST_CASE("closing on an exact plane leaves interior values unchanged") {
  ElevationGrid grid(0.16, 6.4);
  for (int iy = 0; iy < grid.height(); ++iy) {
    for (int ix = 0; ix < grid.width(); ++ix) {
      const Vec2 c = grid.cell_center(ix, iy);
      grid.cell(ix, iy) = 0.2 * c.x - 0.1 * c.y + 1.0;
    }
  }
  const ElevationGrid out = morphological_close(grid, 3);
  // Windows clip at the raster border, so only cells a full closing reach
  // away from it see the exact max-then-min cancellation.
  for (int iy = 2; iy + 2 < grid.height(); ++iy) {
    for (int ix = 2; ix + 2 < grid.width(); ++ix) {
      CHECK(std::abs(out.cell(ix, iy) - grid.cell(ix, iy)) < 1e-12);
    }
  }
}

TEST_CASE("ground points from all-hole grids is empty") {
  const ElevationGrid a(0.16, 3.2), b(0.16, 3.2);
  CHECK(ground_points(a, b).empty());
}

TEST_CASE("ground points exports cell centers with heights") {
  ElevationGrid a(0.16, 3.2), b(0.16, 3.2);
  a.cell(3, 4) = 1.5;
  const PointCloud cloud = ground_points(a, b);
  REQUIRE(cloud.size() == 1);
  CHECK(cloud.pts[0].z == 1.5);
  CHECK(cloud.pts[0].x == a.cell_center(3, 4).x);
  CHECK(cloud.pts[0].y == a.cell_center(3, 4).y);
}

TEST_CASE("ground points of two plane grids stay on the plane") {
  ElevationGrid a(0.16, 3.2), b(0.16, 3.2, {0.8, 0, 0});
  auto fill = [](ElevationGrid& g) {
    for (int iy = 0; iy < g.height(); ++iy) {
      for (int ix = 0; ix < g.width(); ++ix) {
        const Vec2 c = g.cell_center(ix, iy);
        g.cell(ix, iy) = 0.1 * c.x + 0.05 * c.y;
      }
    }
  };
  fill(a);
  fill(b);
  const PointCloud cloud = ground_points(a, b);
  CHECK(cloud.size() == static_cast<std::size_t>(2 * a.width() * a.height()));
  for (const Point3& p : cloud.pts) {
    CHECK(std::abs(p.z - (0.1 * p.x + 0.05 * p.y)) < 1e-12);
  }
}

TEST_CASE("ascii dump writes rows with nan holes") {
  ElevationGrid grid(1.0, 2.0);
  grid.cell(0, 0) = 1.5;
  grid.cell(1, 1) = -2.0;
  std::ostringstream os;
  grid.dump(os);
  CHECK(os.str() == "1.5 nan\nnan -2\n");
}
