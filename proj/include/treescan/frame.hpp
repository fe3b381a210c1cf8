#pragma once

#include <cstdint>

#include "treescan/geometry.hpp"

namespace treescan {

/// One pose-stamped LiDAR sweep, points in the sensor frame.
struct ScanFrame {
  std::int64_t id = 0;
  double timestamp = 0.0;
  Pose pose;
  PointCloud points{Frame::Sensor};
};

}  // namespace treescan
