#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "treescan/reference.hpp"
#include "treescan/tracker.hpp"

using namespace treescan;

namespace {

constexpr double kDeg = M_PI / 180.0;

double angle_between(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(std::abs(a.normalized().dot(b.normalized())), 0.0, 1.0));
}

/// Points on the surface of a (possibly leaning) cylinder section.
PointCloud cylinder_points(std::mt19937_64& rng, const Point3& base, const Vec3& axis,
                           double radius, double s_min, double s_max, int n, double sigma) {
  const Vec3 a = axis.normalized();
  Vec3 u = std::abs(a.z) < 0.9 ? Vec3{0, 0, 1}.cross(a) : Vec3{1, 0, 0}.cross(a);
  u = u.normalized();
  const Vec3 v = a.cross(u);

  std::uniform_real_distribution<double> us(s_min, s_max);
  std::uniform_real_distribution<double> ut(0, 2 * M_PI);
  std::normal_distribution<double> noise(0.0, sigma);

  PointCloud cloud(Frame::World);
  cloud.pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double s = us(rng);
    const double t = ut(rng);
    const double r = radius + (sigma > 0 ? noise(rng) : 0.0);
    cloud.pts.push_back(base + a * s + u * (r * std::cos(t)) + v * (r * std::sin(t)));
  }
  return cloud;
}

Cluster whole_cloud_cluster(const PointCloud& cloud) {
  Cluster c;
  c.ids.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) c.ids[i] = static_cast<int>(i);
  return c;
}

}  // namespace

TEST_CASE("an exact vertical line fits with zero residual") {
  PointCloud cloud(Frame::World);
  for (int i = 0; i < 50; ++i) cloud.pts.push_back({2.0, 3.0, 0.1 * i});
  AxisFitDiagnostics diag;
  const auto line = fit_major_axis(cloud, TrackerParams{}, &diag);
  REQUIRE(line.has_value());
  CHECK(std::abs(line->direction.x) < 1e-12);
  CHECK(std::abs(line->direction.y) < 1e-12);
  CHECK(line->direction.z == doctest::Approx(1.0));
  for (double sigma : diag.residual_sigma) CHECK(sigma < 1e-12);
}

TEST_CASE("an exact diagonal line is recovered to 1e-9") {
  const Vec3 truth = Vec3{1, 1, 1}.normalized();
  PointCloud cloud(Frame::World);
  for (int i = 0; i < 40; ++i) cloud.pts.push_back(Point3{5, 5, 0} + truth * (0.25 * i));
  const auto line = fit_major_axis(cloud, TrackerParams{});
  REQUIRE(line.has_value());
  CHECK(angle_between(line->direction, truth) < 1e-9);
}

TEST_CASE("fit requires at least 10 points") {
  PointCloud cloud(Frame::World);
  for (int i = 0; i < 9; ++i) cloud.pts.push_back({0, 0, 0.1 * i});
  CHECK_THROWS_AS(fit_major_axis(cloud, TrackerParams{}), std::invalid_argument);
}

TEST_CASE("a flat disc degenerates") {
  PointCloud cloud(Frame::World);
  for (int i = 0; i < 30; ++i) {
    cloud.pts.push_back({std::cos(0.21 * i), std::sin(0.21 * i), 1.0});
  }
  CHECK(!fit_major_axis(cloud, TrackerParams{}).has_value());
}

TEST_CASE("trimmed fit beats the untrimmed fit under branch contamination") {
  std::mt19937_64 rng(2025);
  const Vec3 truth{0, 0, 1};
  PointCloud cloud = cylinder_points(rng, {0, 0, 0}, truth, 0.2, 0.0, 10.0, 5000, 0.01);
  // A branch leaving the trunk at 6 m, 45 degrees off vertical: 20% of points.
  const Vec3 branch_axis = Vec3{1, 0, 1}.normalized();
  const PointCloud branch =
      cylinder_points(rng, {0, 0, 6.0}, branch_axis, 0.05, 0.0, 3.0, 1250, 0.01);
  cloud.pts.insert(cloud.pts.end(), branch.pts.begin(), branch.pts.end());

  AxisFitDiagnostics diag;
  const auto line = fit_major_axis(cloud, TrackerParams{}, &diag);
  REQUIRE(line.has_value());
  const double trimmed_error = angle_between(line->direction, truth);
  const double untrimmed_error = angle_between(ref::untrimmed_axis(cloud), truth);

  CHECK(trimmed_error <= 2.0 * kDeg);
  CHECK(trimmed_error < untrimmed_error);

  // Residual spread must not grow across trim iterations.
  for (std::size_t i = 1; i < diag.residual_sigma.size(); ++i) {
    CHECK(diag.residual_sigma[i] <= diag.residual_sigma[i - 1] + 1e-12);
  }
}

TEST_CASE("classify accepts a vertical trunk") {
  std::mt19937_64 rng(7);
  const PointCloud trunk = cylinder_points(rng, {1, 2, 0}, {0, 0, 1}, 0.15, 0.0, 8.0, 400, 0.01);
  const auto desc = classify_cluster(trunk, TrackerParams{});
  REQUIRE(desc.has_value());
  CHECK(desc->point_count == 400);
  CHECK(desc->max_z - desc->min_z > 2.0);
  CHECK(!desc->base.has_value());
  CHECK(!desc->dbh.has_value());
}

TEST_CASE("classify rejects a horizontal log") {
  std::mt19937_64 rng(8);
  const PointCloud log = cylinder_points(rng, {0, 0, 1}, {1, 0, 0}, 0.2, 0.0, 6.0, 400, 0.01);
  CHECK(!classify_cluster(log, TrackerParams{}).has_value());
}

TEST_CASE("classify rejects a tilted log by verticality despite tall extent") {
  std::mt19937_64 rng(9);
  // 70 degrees from vertical, long enough to clear the height gate.
  const Vec3 axis{std::sin(70 * kDeg), 0.0, std::cos(70 * kDeg)};
  const PointCloud log = cylinder_points(rng, {0, 0, 0}, axis, 0.2, 0.0, 9.0, 500, 0.01);
  double min_z = 1e9, max_z = -1e9;
  for (const auto& p : log.pts) {
    min_z = std::min(min_z, p.z);
    max_z = std::max(max_z, p.z);
  }
  REQUIRE(max_z - min_z > TrackerParams{}.h_threshold);  // height alone would pass
  CHECK(!classify_cluster(log, TrackerParams{}).has_value());
}

TEST_CASE("classify rejects a small shrub by height") {
  std::mt19937_64 rng(10);
  const PointCloud shrub = cylinder_points(rng, {0, 0, 0}, {0, 0, 1}, 0.3, 0.0, 0.5, 200, 0.02);
  CHECK(!classify_cluster(shrub, TrackerParams{}).has_value());
}

TEST_CASE("collinear split halves of a trunk match") {
  TreeDescriptor lower, upper;
  lower.incline = {{0, 0, 0}, {0, 0, 1}};
  lower.min_z = 0;
  lower.max_z = 4;
  upper.incline = {{0, 0, 8}, {0, 0, 1}};
  upper.min_z = 5;
  upper.max_z = 9;
  CHECK(match_trees(lower, upper, TrackerParams{}));
}

TEST_CASE("trunks three meters apart do not match") {
  TreeDescriptor a, b;
  a.incline = {{0, 0, 0}, {0, 0, 1}};
  a.min_z = 0;
  a.max_z = 6;
  b.incline = {{3, 0, 0}, {0, 0, 1}};
  b.min_z = 0;
  b.max_z = 6;
  CHECK(!match_trees(a, b, TrackerParams{}));
}

TEST_CASE("stacked segments of a leaning trunk match through extrapolation") {
  std::mt19937_64 rng(11);
  const Vec3 axis{std::sin(5 * kDeg), 0.0, std::cos(5 * kDeg)};
  const PointCloud lower = cylinder_points(rng, {0, 0, 0}, axis, 0.2, 0.0, 4.0, 800, 0.01);
  const PointCloud upper = cylinder_points(rng, {0, 0, 0}, axis, 0.2, 5.0, 9.0, 800, 0.01);
  const auto a = classify_cluster(lower, TrackerParams{});
  const auto b = classify_cluster(upper, TrackerParams{});
  REQUIRE(a.has_value());
  REQUIRE(b.has_value());
  CHECK(match_trees(*a, *b, TrackerParams{}));
}

TEST_CASE("track inserts an accepted cluster into an empty inventory") {
  std::mt19937_64 rng(12);
  const PointCloud trunk = cylinder_points(rng, {0, 0, 0}, {0, 0, 1}, 0.2, 0.0, 8.0, 400, 0.01);
  TreeInventory inventory;
  const auto updated = track(inventory, {whole_cloud_cluster(trunk)}, trunk, TrackerParams{});
  CHECK(inventory.size() == 1);
  REQUIRE(updated.size() == 1);
  CHECK(inventory.find(updated[0]) != nullptr);
}

TEST_CASE("track merges an upward extension into the existing tree") {
  std::mt19937_64 rng(13);
  const PointCloud lower = cylinder_points(rng, {0, 0, 0}, {0, 0, 1}, 0.2, 0.0, 5.0, 500, 0.01);
  const PointCloud upper = cylinder_points(rng, {0, 0, 0}, {0, 0, 1}, 0.2, 4.0, 9.0, 500, 0.01);

  TreeInventory inventory;
  track(inventory, {whole_cloud_cluster(lower)}, lower, TrackerParams{});
  REQUIRE(inventory.size() == 1);
  const int id = inventory.trees().begin()->first;
  const double max_z_before = inventory.find(id)->desc.max_z;
  const std::size_t count_before = inventory.find(id)->desc.point_count;

  const auto updated = track(inventory, {whole_cloud_cluster(upper)}, upper, TrackerParams{});
  CHECK(inventory.size() == 1);
  REQUIRE(updated == std::vector<int>{id});
  CHECK(inventory.find(id)->desc.max_z > max_z_before);
  CHECK(inventory.find(id)->desc.point_count > count_before);
}

TEST_CASE("a bridging cluster cascade-merges two pending segments into one tree") {
  std::mt19937_64 rng(14);
  // One trunk split into three disjoint vertical segments. The lower and
  // upper arrive first and are far enough apart not to match each other
  // directly; the middle bridges them.
  TrackerParams params;
  params.match_distance = 0.1;
  const Vec3 axis = Vec3{0.08, 0.0, 1.0}.normalized();  // slight lean
  const PointCloud lower = cylinder_points(rng, {0, 0, 0}, axis, 0.2, 0.0, 3.0, 600, 0.015);
  const PointCloud upper = cylinder_points(rng, {0, 0, 0}, axis, 0.2, 9.0, 12.0, 600, 0.015);
  const PointCloud middle = cylinder_points(rng, {0, 0, 0}, axis, 0.2, 3.5, 8.5, 600, 0.015);

  TreeInventory inventory;
  track(inventory, {whole_cloud_cluster(lower)}, lower, params);
  track(inventory, {whole_cloud_cluster(upper)}, upper, params);
  REQUIRE(inventory.size() == 2);  // not yet bridged

  track(inventory, {whole_cloud_cluster(middle)}, middle, params);
  CHECK(inventory.size() == 1);
  // Survivor keeps the oldest id.
  CHECK(inventory.trees().begin()->first == 0);
}

TEST_CASE("descriptors equal recomputation from accumulated points after track") {
  std::mt19937_64 rng(15);
  TrackerParams params;
  TreeInventory inventory;
  for (int scan = 0; scan < 3; ++scan) {
    const PointCloud part = cylinder_points(rng, {1, 1, 0}, {0, 0, 1}, 0.18, 2.0 * scan,
                                            2.0 * scan + 3.0, 400, 0.01);
    track(inventory, {whole_cloud_cluster(part)}, part, params);
  }
  REQUIRE(inventory.size() == 1);
  const auto& entry = inventory.trees().begin()->second;

  const auto axis = fit_major_axis(entry.points, params);
  REQUIRE(axis.has_value());
  CHECK(axis->direction.x == entry.desc.incline.direction.x);
  CHECK(axis->direction.y == entry.desc.incline.direction.y);
  CHECK(axis->direction.z == entry.desc.incline.direction.z);
  double min_z = 1e9, max_z = -1e9;
  for (const auto& p : entry.points.pts) {
    min_z = std::min(min_z, p.z);
    max_z = std::max(max_z, p.z);
  }
  CHECK(entry.desc.min_z == min_z);
  CHECK(entry.desc.max_z == max_z);
  CHECK(entry.desc.point_count == entry.points.size());
}

TEST_CASE("inventory trees are pairwise non-matching after track") {
  std::mt19937_64 rng(16);
  TrackerParams params;
  TreeInventory inventory;
  std::vector<PointCloud> trunks;
  for (int i = 0; i < 4; ++i) {
    trunks.push_back(cylinder_points(rng, {4.0 * i, 0, 0}, {0, 0, 1}, 0.2, 0, 8.0, 400, 0.01));
  }
  for (const auto& t : trunks) track(inventory, {whole_cloud_cluster(t)}, t, params);
  REQUIRE(inventory.size() == 4);
  for (auto a = inventory.trees().begin(); a != inventory.trees().end(); ++a) {
    for (auto b = std::next(a); b != inventory.trees().end(); ++b) {
      CHECK(!match_trees(a->second.desc, b->second.desc, params));
    }
  }
}

TEST_CASE("re-tracking the same scan duplicates points but not trees") {
  std::mt19937_64 rng(17);
  const PointCloud trunk = cylinder_points(rng, {0, 0, 0}, {0, 0, 1}, 0.2, 0, 8.0, 400, 0.01);
  TreeInventory inventory;
  track(inventory, {whole_cloud_cluster(trunk)}, trunk, TrackerParams{});
  const int id = inventory.trees().begin()->first;
  track(inventory, {whole_cloud_cluster(trunk)}, trunk, TrackerParams{});
  CHECK(inventory.size() == 1);
  CHECK(inventory.trees().begin()->first == id);  // id stable across scans
  CHECK(inventory.find(id)->desc.point_count == 800);
}

TEST_CASE("base lands on flat ground under the tree") {
  std::mt19937_64 rng(18);
  const PointCloud trunk = cylinder_points(rng, {5, 5, 0}, {0, 0, 1}, 0.2, 0.2, 8.0, 400, 0.01);
  const auto desc = classify_cluster(trunk, TrackerParams{});
  REQUIRE(desc.has_value());

  PointCloud ground(Frame::World);
  for (double x = 0; x <= 10.0; x += 0.16) {
    for (double y = 0; y <= 10.0; y += 0.16) ground.pts.push_back({x, y, 0.0});
  }
  const SpatialIndex index(ground);
  const auto base = segment_base(*desc, trunk, index);
  REQUIRE(base.has_value());
  CHECK(std::abs(base->x - 5.0) <= 0.16);
  CHECK(std::abs(base->y - 5.0) <= 0.16);
  CHECK(std::abs(base->z) <= 1e-12);
}

TEST_CASE("base is unavailable without nearby ground") {
  std::mt19937_64 rng(19);
  const PointCloud trunk = cylinder_points(rng, {5, 5, 0}, {0, 0, 1}, 0.2, 0.2, 8.0, 400, 0.01);
  const auto desc = classify_cluster(trunk, TrackerParams{});
  REQUIRE(desc.has_value());
  PointCloud ground(Frame::World);
  ground.pts = {{50.0, 50.0, 0.0}};
  const SpatialIndex index(ground);
  CHECK(!segment_base(*desc, trunk, index).has_value());
}

TEST_CASE("base height follows sloped terrain") {
  std::mt19937_64 rng(20);
  const double grade = std::tan(10 * kDeg);
  const double res = 0.16;
  const Point3 planted{4.0, 6.0, grade * 4.0};
  const PointCloud trunk = cylinder_points(rng, planted, {0, 0, 1}, 0.2, 0.2, 8.0, 400, 0.01);
  const auto desc = classify_cluster(trunk, TrackerParams{});
  REQUIRE(desc.has_value());

  PointCloud ground(Frame::World);
  for (double x = 0; x <= 10.0; x += res) {
    for (double y = 0; y <= 10.0; y += res) ground.pts.push_back({x, y, grade * x});
  }
  const SpatialIndex index(ground);
  const auto base = segment_base(*desc, trunk, index);
  REQUIRE(base.has_value());
  CHECK(std::abs(base->z - planted.z) <= 2.0 * res);
}
