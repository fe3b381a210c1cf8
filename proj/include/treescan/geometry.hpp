#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace treescan {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::sqrt(x * x + y * y); }
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double squared_norm() const { return x * x + y * y + z * z; }
  double norm() const { return std::sqrt(squared_norm()); }
  Vec3 normalized() const {
    const double n = norm();
    if (n == 0.0) throw std::invalid_argument("cannot normalize zero vector");
    return {x / n, y / n, z / n};
  }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

using Point3 = Vec3;

inline double distance(const Point3& a, const Point3& b) { return (a - b).norm(); }
inline double squared_distance(const Point3& a, const Point3& b) {
  return (a - b).squared_norm();
}

/// Rigid transform sensor -> world. World z points up (gravity aligned).
struct Pose {
  Vec3 position;
  double qw = 1.0, qx = 0.0, qy = 0.0, qz = 0.0;

  static Pose from_yaw(const Vec3& position, double yaw) {
    Pose p;
    p.position = position;
    p.qw = std::cos(yaw * 0.5);
    p.qz = std::sin(yaw * 0.5);
    return p;
  }

  double quat_norm() const {
    return std::sqrt(qw * qw + qx * qx + qy * qy + qz * qz);
  }

  bool valid() const {
    return position.finite() && std::isfinite(qw) && std::isfinite(qx) &&
           std::isfinite(qy) && std::isfinite(qz) &&
           std::abs(quat_norm() - 1.0) <= 1e-9;
  }

  Pose normalized() const {
    const double n = quat_norm();
    if (n == 0.0) throw std::invalid_argument("zero quaternion");
    Pose p = *this;
    p.qw /= n;
    p.qx /= n;
    p.qy /= n;
    p.qz /= n;
    return p;
  }

  Vec3 rotate(const Vec3& v) const {
    // v' = v + 2 q_v x (q_v x v + w v)
    const Vec3 qv{qx, qy, qz};
    const Vec3 t = qv.cross(v) * 2.0;
    return v + t * qw + qv.cross(t);
  }

  Vec3 rotate_inverse(const Vec3& v) const {
    const Vec3 qv{-qx, -qy, -qz};
    const Vec3 t = qv.cross(v) * 2.0;
    return v + t * qw + qv.cross(t);
  }

  Vec3 apply(const Vec3& v) const { return rotate(v) + position; }

  Pose inverse() const {
    Pose p;
    p.qw = qw;
    p.qx = -qx;
    p.qy = -qy;
    p.qz = -qz;
    p.position = -p.rotate(position);
    return p;
  }
};

enum class Frame { Sensor, World };

struct PointCloud {
  std::vector<Point3> pts;
  Frame frame = Frame::Sensor;

  PointCloud() = default;
  explicit PointCloud(Frame f) : frame(f) {}

  std::size_t size() const { return pts.size(); }
  bool empty() const { return pts.empty(); }
  const Point3& operator[](std::size_t i) const { return pts[i]; }
  Point3& operator[](std::size_t i) { return pts[i]; }
};

/// Throws if any point has a non-finite coordinate. Used at every ingestion
/// boundary so downstream code can assume clean clouds.
void validate_finite(const PointCloud& cloud);

/// Rotates then translates each point; result is tagged world frame.
PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose);

/// One point per occupied voxel, the centroid of its members. Cells are
/// half-open [i*s, (i+1)*s) anchored at the world origin. Output order is
/// by voxel key, deterministic for a given input.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size);

/// 3D point-to-line distance, direction must be unit length.
double point_line_distance(const Point3& p, const Point3& on_line, const Vec3& direction);

}  // namespace treescan
