#pragma once

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "treescan/frame.hpp"
#include "treescan/sim.hpp"
#include "treescan/tracker.hpp"

namespace treescan {

class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scan-log directory: `trajectory.csv` (header frame,t,x,y,z,qw,qx,qy,qz) and
/// one `frame_<id %06d>.xyz` file per frame with one `x y z` triple per line.
void write_scan_log(const std::string& dir, const std::vector<ScanFrame>& frames);

/// Streams frames from a scan-log directory in trajectory order. Malformed
/// lines are reported with file and line number; timestamps must be strictly
/// increasing.
class ScanLogReader {
 public:
  explicit ScanLogReader(const std::string& dir);
  std::optional<ScanFrame> next();

 private:
  std::string dir_;
  std::ifstream trajectory_;
  int line_ = 1;
  bool have_last_ = false;
  double last_timestamp_ = 0.0;
  std::int64_t last_id_ = 0;
};

std::vector<ScanFrame> read_scan_log(const std::string& dir);

void write_ground_truth_csv(const std::string& path,
                            const std::vector<sim::GroundTruthTree>& truth);
std::vector<sim::GroundTruthTree> read_ground_truth_csv(const std::string& path);

/// `id,base_x,base_y,base_z,dbh_m,incline_x,incline_y,incline_z,min_z,max_z,n_points`;
/// unset base/DBH fields are written as nan.
void write_inventory_csv(const std::string& path, const TreeInventory& inventory);

/// Reads an inventory csv back into descriptors (accumulated clouds are not
/// part of the format); nan fields map to unset.
std::vector<TreeDescriptor> read_inventory_csv(const std::string& path);

}  // namespace treescan
