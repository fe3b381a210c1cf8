#pragma once

#include <cstdint>
#include <vector>

#include "treescan/frame.hpp"
#include "treescan/geometry.hpp"

namespace treescan::sim {

struct SinusoidTerm {
  double amplitude = 0.0;
  double kx = 0.0;  // rad/m
  double ky = 0.0;
  double phase = 0.0;
};

/// Smooth heightfield: base height plus a sum of low-frequency sinusoids.
/// Disabled terrain neither reflects rays nor contributes ground truth
/// (height() still anchors poses at base_height).
struct Terrain {
  bool enabled = true;
  double base_height = 0.0;
  std::vector<SinusoidTerm> terms;

  double height(double x, double y) const;
  /// Upper bound on |grad h|; drives the ray-marching step size.
  double gradient_bound() const;
  double max_height() const;
};

struct TreeSpec {
  double x = 0.0, y = 0.0;  // base position; z comes from the terrain
  double dbh = 0.3;         // diameter at base + 1.4 m, ground truth
  double height = 12.0;     // trunk length along the axis
  Vec3 lean{0, 0, 1};       // axis direction, within 15 deg of vertical
  double taper = 0.2;       // linear radius loss fraction over the full height
};

struct ShrubSpec {
  double x = 0.0, y = 0.0;
  double radius = 0.5;
  double height = 0.8;
};

struct CanopySpec {
  double x = 0.0, y = 0.0;
  double z_above_ground = 10.0;
  double radius = 2.5;
};

struct SceneSpec {
  Terrain terrain;
  std::vector<TreeSpec> trees;
  std::vector<ShrubSpec> shrubs;
  std::vector<CanopySpec> canopies;
  double canopy_density = 0.35;  // per-ray hit probability on a canopy sphere
  std::uint64_t seed = 0;
};

struct ScannerSpec {
  double vertical_fov_deg = 90.0;
  int beams = 128;
  int horizontal_steps = 512;
  double max_range = 20.0;
  double range_noise = 0.01;     // sigma, m, along the ray
  double sweep_trigger = 2.0;    // m of travel between sweeps
  double sensor_height = 1.8;    // m above terrain
};

struct GroundTruthTree {
  int id = 0;
  Point3 base;
  double dbh = 0.0;
  Vec3 axis{0, 0, 1};
};

/// Trunk as a cone frustum: radius r0 - r0 * taper * s / height at axial
/// distance s, sized so that the diameter at world z = base.z + 1.4 m equals
/// the requested DBH.
struct TrunkModel {
  Point3 base;
  Vec3 axis;
  double height = 0.0;
  double r0 = 0.0;
  double radius_slope = 0.0;  // dr/ds

  double radius_at(double s) const { return r0 - radius_slope * s; }
};

struct Scene {
  SceneSpec spec;
  std::vector<TrunkModel> trunks;
  std::vector<GroundTruthTree> truth;
};

/// Validates the spec, roots trunks on the terrain and derives the ground
/// truth table. Throws on overlapping trunks or out-of-range parameters.
Scene generate_scene(const SceneSpec& spec);

/// Ray-cast sweep from one pose: nearest hit among terrain, trunks, shrub
/// spheres and (per-ray sparse) canopy spheres, range-noise applied along the
/// ray, misses omitted. Points are in the sensor frame, in ray order.
PointCloud simulate_scan(const Scene& scene, const Pose& pose, const ScannerSpec& scanner,
                         std::uint64_t scan_seed);

/// Pose for a given station: position on the terrain at sensor height, yaw
/// along the path tangent.
Pose pose_at(const Scene& scene, const ScannerSpec& scanner, const std::vector<Vec2>& path,
             double arc_distance);

/// Sweeps every sweep_trigger meters along the polyline (inclusive endpoints
/// when the length divides evenly). Frame timestamps assume 1 m/s walking
/// speed; per-frame seeds derive from the scene seed.
std::vector<ScanFrame> simulate_trajectory(const Scene& scene, const std::vector<Vec2>& path,
                                           const ScannerSpec& scanner);

/// True when the canopy sphere scatters this ray (deterministic sparse hash).
bool canopy_opaque(const SceneSpec& spec, int sphere_index, std::uint64_t ray_key);

struct RandomForestParams {
  int tree_count = 30;
  double x_min = 5.0, x_max = 145.0;
  double y_min = -10.0, y_max = 10.0;
  double dbh_min = 0.10, dbh_max = 0.80;
  double min_spacing = 4.0;
  double max_lean_deg = 8.0;
  int shrub_count = 12;
  bool auto_canopy = true;
};

/// Random forest corridor (trees, shrubs, per-tree canopy) over gently rolling
/// terrain; deterministic for a fixed seed.
SceneSpec random_forest(const RandomForestParams& params, std::uint64_t seed);

}  // namespace treescan::sim
