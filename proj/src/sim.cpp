#include "treescan/sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "treescan/parallel.hpp"
#include "treescan/rng.hpp"

namespace treescan::sim {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kMaxLeanDeg = 15.0;
}  // namespace

double Terrain::height(double x, double y) const {
  double h = base_height;
  for (const SinusoidTerm& t : terms) {
    h += t.amplitude * std::sin(t.kx * x + t.ky * y + t.phase);
  }
  return h;
}

double Terrain::gradient_bound() const {
  double l = 0.0;
  for (const SinusoidTerm& t : terms) {
    l += std::abs(t.amplitude) * std::hypot(t.kx, t.ky);
  }
  return l;
}

double Terrain::max_height() const {
  double h = base_height;
  for (const SinusoidTerm& t : terms) h += std::abs(t.amplitude);
  return h;
}

Scene generate_scene(const SceneSpec& spec) {
  Scene scene;
  scene.spec = spec;

  const double cos_max_lean = std::cos(kMaxLeanDeg * kPi / 180.0);
  int id = 0;
  for (const TreeSpec& t : spec.trees) {
    if (!(t.dbh > 0.0) || t.dbh >= 2.0) throw std::invalid_argument("tree dbh out of (0, 2)");
    if (!(t.height > 2.0)) throw std::invalid_argument("tree height too small");
    const Vec3 axis = t.lean.normalized();
    if (axis.z < cos_max_lean) throw std::invalid_argument("tree lean exceeds 15 degrees");

    TrunkModel trunk;
    trunk.base = {t.x, t.y, spec.terrain.height(t.x, t.y)};
    trunk.axis = axis;
    trunk.height = t.height;
    // Size the frustum so the radius at world z = base.z + 1.4 is dbh / 2.
    const double s_breast = 1.4 / axis.z;
    trunk.r0 = (t.dbh / 2.0) / (1.0 - t.taper * s_breast / t.height);
    trunk.radius_slope = trunk.r0 * t.taper / t.height;

    GroundTruthTree truth;
    truth.id = id++;
    truth.base = trunk.base;
    truth.dbh = t.dbh;
    truth.axis = axis;

    scene.trunks.push_back(trunk);
    scene.truth.push_back(truth);
  }

  for (std::size_t i = 0; i < scene.trunks.size(); ++i) {
    for (std::size_t j = i + 1; j < scene.trunks.size(); ++j) {
      const double d = std::hypot(scene.trunks[i].base.x - scene.trunks[j].base.x,
                                  scene.trunks[i].base.y - scene.trunks[j].base.y);
      if (d < scene.trunks[i].r0 + scene.trunks[j].r0) {
        throw std::invalid_argument("overlapping trunks in scene spec");
      }
    }
  }
  return scene;
}

namespace {

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  bool valid() const { return std::isfinite(t); }
};

/// Sphere tracing against the analytic heightfield using the Lipschitz bound
/// on the vertical clearance, bisection-refined at the crossing.
Hit intersect_terrain(const Terrain& terrain, const Point3& origin, const Vec3& dir,
                      double t_max, double grad_bound) {
  Hit hit;
  const double dir_xy = std::hypot(dir.x, dir.y);
  const double rate = grad_bound * dir_xy + std::abs(dir.z);
  const double h_max = terrain.max_height();

  double t = 0.0;
  double clearance = origin.z - terrain.height(origin.x, origin.y);
  if (clearance <= 0.0) {  // started at/under ground, return immediately
    hit.t = 0.0;
    return hit;
  }
  while (t < t_max) {
    if (dir.z >= 0.0 && origin.z + t * dir.z > h_max) return hit;  // climbing above all terrain
    const double step = std::max(1e-3, clearance / std::max(rate, 1e-9));
    const double t_next = t + step;
    const Point3 p{origin.x + t_next * dir.x, origin.y + t_next * dir.y,
                   origin.z + t_next * dir.z};
    const double c_next = p.z - terrain.height(p.x, p.y);
    if (c_next <= 0.0) {
      // Bracketed; bisect to the surface.
      double lo = t, hi = t_next;
      for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double cz = origin.z + mid * dir.z -
                          terrain.height(origin.x + mid * dir.x, origin.y + mid * dir.y);
        (cz > 0.0 ? lo : hi) = mid;
      }
      hit.t = 0.5 * (lo + hi);
      return hit;
    }
    t = t_next;
    clearance = c_next;
  }
  return hit;
}

Hit intersect_trunk(const TrunkModel& trunk, const Point3& origin, const Vec3& dir) {
  Hit hit;
  const Vec3 o = origin - trunk.base;
  const double s0 = o.dot(trunk.axis);
  const double sd = dir.dot(trunk.axis);
  const Vec3 o_perp = o - trunk.axis * s0;
  const Vec3 d_perp = dir - trunk.axis * sd;

  const double rho0 = trunk.r0 - trunk.radius_slope * s0;
  const double rho_d = -trunk.radius_slope * sd;

  const double a = d_perp.dot(d_perp) - rho_d * rho_d;
  const double b = 2.0 * (o_perp.dot(d_perp) - rho0 * rho_d);
  const double c = o_perp.dot(o_perp) - rho0 * rho0;

  auto accept = [&](double t) {
    if (!(t > 1e-9)) return false;
    const double s = s0 + t * sd;
    return s >= 0.0 && s <= trunk.height && trunk.radius_at(s) > 0.0;
  };

  if (std::abs(a) < 1e-14) {
    if (std::abs(b) > 1e-14) {
      const double t = -c / b;
      if (accept(t)) hit.t = t;
    }
    return hit;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return hit;
  const double sq = std::sqrt(disc);
  const double t1 = (-b - sq) / (2.0 * a);
  const double t2 = (-b + sq) / (2.0 * a);
  for (double t : {std::min(t1, t2), std::max(t1, t2)}) {
    if (accept(t)) {
      hit.t = t;
      return hit;
    }
  }
  return hit;
}

Hit intersect_sphere(const Point3& center, double radius, const Point3& origin, const Vec3& dir) {
  Hit hit;
  const Vec3 o = origin - center;
  const double b = 2.0 * o.dot(dir);
  const double c = o.dot(o) - radius * radius;
  const double disc = b * b - 4.0 * c;
  if (disc < 0.0) return hit;
  const double sq = std::sqrt(disc);
  const double t1 = (-b - sq) / 2.0;
  if (t1 > 1e-9) {
    hit.t = t1;
  } else {
    const double t2 = (-b + sq) / 2.0;
    if (t2 > 1e-9) hit.t = t2;
  }
  return hit;
}

Point3 shrub_center(const Terrain& terrain, const ShrubSpec& s) {
  return {s.x, s.y, terrain.height(s.x, s.y) + 0.5 * s.height};
}

Point3 canopy_center(const Terrain& terrain, const CanopySpec& c) {
  return {c.x, c.y, terrain.height(c.x, c.y) + c.z_above_ground};
}

}  // namespace

bool canopy_opaque(const SceneSpec& spec, int sphere_index, std::uint64_t ray_key) {
  const std::uint64_t h =
      mix_seed(spec.seed ^ 0xC0FFEEull, static_cast<std::uint64_t>(sphere_index), ray_key);
  return (h >> 11) * 0x1.0p-53 < spec.canopy_density;
}

PointCloud simulate_scan(const Scene& scene, const Pose& pose, const ScannerSpec& scanner,
                         std::uint64_t scan_seed) {
  const int beams = scanner.beams;
  const int steps = scanner.horizontal_steps;
  const std::int64_t ray_count = static_cast<std::int64_t>(beams) * steps;
  const double fov = scanner.vertical_fov_deg * kPi / 180.0;
  const double grad_bound = scene.spec.terrain.gradient_bound();

  // Cull scene objects outside the sweep's reach.
  std::vector<int> trunk_ids, shrub_ids, canopy_ids;
  for (std::size_t i = 0; i < scene.trunks.size(); ++i) {
    const TrunkModel& t = scene.trunks[i];
    const double d = std::hypot(t.base.x - pose.position.x, t.base.y - pose.position.y);
    if (d < scanner.max_range + t.height + t.r0) trunk_ids.push_back(static_cast<int>(i));
  }
  for (std::size_t i = 0; i < scene.spec.shrubs.size(); ++i) {
    const ShrubSpec& s = scene.spec.shrubs[i];
    const double d = std::hypot(s.x - pose.position.x, s.y - pose.position.y);
    if (d < scanner.max_range + s.radius) shrub_ids.push_back(static_cast<int>(i));
  }
  for (std::size_t i = 0; i < scene.spec.canopies.size(); ++i) {
    const CanopySpec& c = scene.spec.canopies[i];
    const double d = std::hypot(c.x - pose.position.x, c.y - pose.position.y);
    if (d < scanner.max_range + c.radius) canopy_ids.push_back(static_cast<int>(i));
  }

  std::vector<double> ranges(ray_count, -1.0);
  std::vector<Vec3> dirs_sensor(ray_count);

#pragma omp parallel for schedule(dynamic, 64) if (parallel_enabled())
  for (std::int64_t ray = 0; ray < ray_count; ++ray) {
    const int beam = static_cast<int>(ray / steps);
    const int step = static_cast<int>(ray % steps);
    const double elev = beams > 1 ? -fov / 2.0 + fov * beam / (beams - 1) : 0.0;
    const double azim = 2.0 * kPi * step / steps;
    const Vec3 dir_sensor{std::cos(elev) * std::cos(azim), std::cos(elev) * std::sin(azim),
                          std::sin(elev)};
    dirs_sensor[ray] = dir_sensor;
    const Vec3 dir = pose.rotate(dir_sensor);

    double best = scanner.max_range;
    bool found = false;

    if (scene.spec.terrain.enabled) {
      const Hit ground =
          intersect_terrain(scene.spec.terrain, pose.position, dir, best, grad_bound);
      if (ground.valid() && ground.t < best) {
        best = ground.t;
        found = true;
      }
    }
    for (int i : trunk_ids) {
      const Hit h = intersect_trunk(scene.trunks[i], pose.position, dir);
      if (h.valid() && h.t < best) {
        best = h.t;
        found = true;
      }
    }
    for (int i : shrub_ids) {
      const ShrubSpec& s = scene.spec.shrubs[i];
      const Hit h =
          intersect_sphere(shrub_center(scene.spec.terrain, s), s.radius, pose.position, dir);
      if (h.valid() && h.t < best) {
        best = h.t;
        found = true;
      }
    }
    const std::uint64_t ray_key = mix_seed(scan_seed, static_cast<std::uint64_t>(ray));
    for (int i : canopy_ids) {
      if (!canopy_opaque(scene.spec, i, ray_key)) continue;
      const CanopySpec& c = scene.spec.canopies[i];
      const Hit h =
          intersect_sphere(canopy_center(scene.spec.terrain, c), c.radius, pose.position, dir);
      if (h.valid() && h.t < best) {
        best = h.t;
        found = true;
      }
    }

    if (found) {
      double range = best;
      if (scanner.range_noise > 0.0) {
        std::mt19937_64 rng(mix_seed(scan_seed ^ 0x5EEDull, static_cast<std::uint64_t>(ray)));
        std::normal_distribution<double> noise(0.0, scanner.range_noise);
        range += noise(rng);
      }
      ranges[ray] = range;
    }
  }

  PointCloud cloud(Frame::Sensor);
  for (std::int64_t ray = 0; ray < ray_count; ++ray) {
    if (ranges[ray] > 0.0) cloud.pts.push_back(dirs_sensor[ray] * ranges[ray]);
  }
  return cloud;
}

Pose pose_at(const Scene& scene, const ScannerSpec& scanner, const std::vector<Vec2>& path,
             double arc_distance) {
  if (path.empty()) throw std::invalid_argument("empty path");

  Vec2 position = path.front();
  Vec2 tangent{1.0, 0.0};
  double remaining = arc_distance;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Vec2 seg = path[i + 1] - path[i];
    const double len = seg.norm();
    if (len < 1e-12) continue;
    tangent = seg * (1.0 / len);
    if (remaining <= len) {
      position = path[i] + tangent * remaining;
      remaining = 0.0;
      break;
    }
    remaining -= len;
    position = path[i + 1];
  }

  const double z = scene.spec.terrain.height(position.x, position.y) + scanner.sensor_height;
  return Pose::from_yaw({position.x, position.y, z}, std::atan2(tangent.y, tangent.x));
}

std::vector<ScanFrame> simulate_trajectory(const Scene& scene, const std::vector<Vec2>& path,
                                           const ScannerSpec& scanner) {
  if (path.empty()) throw std::invalid_argument("empty path");
  double length = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) length += (path[i + 1] - path[i]).norm();

  std::vector<ScanFrame> frames;
  const double trigger = scanner.sweep_trigger;
  const int count = static_cast<int>(std::floor(length / trigger + 1e-9)) + 1;
  frames.reserve(count);
  for (int k = 0; k < count; ++k) {
    const double dist = k * trigger;
    ScanFrame frame;
    frame.id = k;
    frame.timestamp = dist;  // 1 m/s walking speed
    frame.pose = pose_at(scene, scanner, path, dist);
    frame.points = simulate_scan(scene, frame.pose, scanner,
                                 mix_seed(scene.spec.seed, static_cast<std::uint64_t>(k)));
    frames.push_back(std::move(frame));
  }
  return frames;
}

SceneSpec random_forest(const RandomForestParams& params, std::uint64_t seed) {
  SceneSpec spec;
  spec.seed = seed;
  std::mt19937_64 rng(splitmix64(seed));

  // Gently rolling terrain, a couple of decimetres over tens of metres.
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  spec.terrain.base_height = 0.0;
  spec.terrain.terms = {
      {0.6, 2.0 * kPi / 55.0, 2.0 * kPi / 70.0, phase(rng)},
      {0.4, 2.0 * kPi / 90.0, -2.0 * kPi / 40.0, phase(rng)},
      {0.2, -2.0 * kPi / 30.0, 2.0 * kPi / 45.0, phase(rng)},
  };

  std::uniform_real_distribution<double> ux(params.x_min, params.x_max);
  std::uniform_real_distribution<double> uy(params.y_min, params.y_max);
  std::uniform_real_distribution<double> udbh(params.dbh_min, params.dbh_max);
  std::uniform_real_distribution<double> ulean(0.0, params.max_lean_deg * kPi / 180.0);
  std::uniform_real_distribution<double> utaper(0.10, 0.30);
  std::uniform_real_distribution<double> ujit(-1.0, 1.0);

  int attempts = 0;
  while (static_cast<int>(spec.trees.size()) < params.tree_count && attempts < 100000) {
    ++attempts;
    TreeSpec t;
    t.x = ux(rng);
    t.y = uy(rng);
    bool clear = true;
    for (const TreeSpec& other : spec.trees) {
      if (std::hypot(t.x - other.x, t.y - other.y) < params.min_spacing) {
        clear = false;
        break;
      }
    }
    if (!clear) continue;
    t.dbh = udbh(rng);
    t.height = 7.0 + 14.0 * t.dbh + 1.5 * ujit(rng);
    const double lean = ulean(rng);
    const double lean_dir = phase(rng);
    t.lean = Vec3{std::sin(lean) * std::cos(lean_dir), std::sin(lean) * std::sin(lean_dir),
                  std::cos(lean)};
    t.taper = utaper(rng);
    spec.trees.push_back(t);

    if (params.auto_canopy) {
      CanopySpec c;
      c.x = t.x + 0.4 * ujit(rng);
      c.y = t.y + 0.4 * ujit(rng);
      c.z_above_ground = 0.8 * t.height;
      c.radius = 1.5 + 2.0 * t.dbh;
      spec.canopies.push_back(c);
    }
  }
  if (static_cast<int>(spec.trees.size()) < params.tree_count) {
    throw std::invalid_argument("could not place requested tree count with given spacing");
  }

  for (int i = 0; i < params.shrub_count; ++i) {
    ShrubSpec s;
    s.x = ux(rng);
    s.y = uy(rng);
    s.radius = 0.3 + 0.3 * (ujit(rng) + 1.0) / 2.0;
    s.height = 0.5 + 0.4 * (ujit(rng) + 1.0) / 2.0;
    bool clear = true;
    for (const TreeSpec& t : spec.trees) {
      if (std::hypot(s.x - t.x, s.y - t.y) < 1.5) {
        clear = false;
        break;
      }
    }
    if (clear) spec.shrubs.push_back(s);
  }
  return spec;
}

}  // namespace treescan::sim
