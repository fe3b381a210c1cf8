#include "treescan/scan_io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <memory>
#include <sstream>

namespace treescan {

namespace {

namespace fs = std::filesystem;

std::string frame_filename(std::int64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06" PRId64 ".xyz", id);
  return buf;
}

void write_double(std::FILE* f, double v) { std::fprintf(f, "%.17g", v); }

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_for_write(const fs::path& path) {
  FilePtr f(std::fopen(path.c_str(), "w"));
  if (!f) throw IngestError("cannot open for writing: " + path.string());
  return f;
}

[[noreturn]] void malformed(const std::string& file, int line, const std::string& what) {
  std::ostringstream os;
  os << file << ":" << line << ": " << what;
  throw IngestError(os.str());
}

bool parse_doubles(const std::string& text, std::vector<double>& out, std::size_t expected,
                   char sep) {
  out.clear();
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(sep, pos);
    if (end == std::string::npos) end = text.size();
    const std::string token = text.substr(pos, end - pos);
    if (!token.empty() || sep != ' ') {
      char* parse_end = nullptr;
      const double v = std::strtod(token.c_str(), &parse_end);
      if (parse_end == token.c_str() || *parse_end != '\0') return false;
      out.push_back(v);
    }
    if (end == text.size()) break;
    pos = end + 1;
  }
  return out.size() == expected;
}

}  // namespace

void write_scan_log(const std::string& dir, const std::vector<ScanFrame>& frames) {
  fs::create_directories(dir);
  FilePtr traj = open_for_write(fs::path(dir) / "trajectory.csv");
  std::fprintf(traj.get(), "frame,t,x,y,z,qw,qx,qy,qz\n");
  for (const ScanFrame& frame : frames) {
    std::fprintf(traj.get(), "%" PRId64 ",", frame.id);
    const double fields[] = {frame.timestamp,     frame.pose.position.x, frame.pose.position.y,
                             frame.pose.position.z, frame.pose.qw,        frame.pose.qx,
                             frame.pose.qy,       frame.pose.qz};
    for (std::size_t i = 0; i < 8; ++i) {
      if (i) std::fputc(',', traj.get());
      write_double(traj.get(), fields[i]);
    }
    std::fputc('\n', traj.get());

    FilePtr xyz = open_for_write(fs::path(dir) / frame_filename(frame.id));
    for (const Point3& p : frame.points.pts) {
      write_double(xyz.get(), p.x);
      std::fputc(' ', xyz.get());
      write_double(xyz.get(), p.y);
      std::fputc(' ', xyz.get());
      write_double(xyz.get(), p.z);
      std::fputc('\n', xyz.get());
    }
  }
}

ScanLogReader::ScanLogReader(const std::string& dir) : dir_(dir) {
  const fs::path traj = fs::path(dir) / "trajectory.csv";
  trajectory_.open(traj);
  if (!trajectory_) throw IngestError("missing trajectory file: " + traj.string());
  std::string header;
  if (!std::getline(trajectory_, header)) {
    throw IngestError(traj.string() + ":1: empty trajectory file (missing header)");
  }
  if (header != "frame,t,x,y,z,qw,qx,qy,qz") {
    malformed(traj.string(), 1, "unexpected header '" + header + "'");
  }
}

std::optional<ScanFrame> ScanLogReader::next() {
  const std::string traj_name = (fs::path(dir_) / "trajectory.csv").string();
  std::string line;
  if (!std::getline(trajectory_, line)) return std::nullopt;
  ++line_;
  if (line.empty()) return next();

  std::vector<double> fields;
  if (!parse_doubles(line, fields, 9, ',')) {
    malformed(traj_name, line_, "expected 9 comma-separated values");
  }

  ScanFrame frame;
  frame.id = static_cast<std::int64_t>(fields[0]);
  frame.timestamp = fields[1];
  frame.pose.position = {fields[2], fields[3], fields[4]};
  frame.pose.qw = fields[5];
  frame.pose.qx = fields[6];
  frame.pose.qy = fields[7];
  frame.pose.qz = fields[8];

  if (have_last_) {
    if (frame.timestamp <= last_timestamp_) {
      malformed(traj_name, line_, "non-monotone timestamp");
    }
    if (frame.id <= last_id_) malformed(traj_name, line_, "non-monotone frame id");
  }
  const double qn = frame.pose.quat_norm();
  if (!std::isfinite(qn) || std::abs(qn - 1.0) > 1e-6) {
    malformed(traj_name, line_, "quaternion is not unit length");
  }
  frame.pose = frame.pose.normalized();
  have_last_ = true;
  last_timestamp_ = frame.timestamp;
  last_id_ = frame.id;

  const fs::path xyz_path = fs::path(dir_) / frame_filename(frame.id);
  std::ifstream xyz(xyz_path);
  if (!xyz) throw IngestError("missing frame file: " + xyz_path.string());
  std::string point_line;
  int point_line_no = 0;
  std::vector<double> coords;
  frame.points = PointCloud(Frame::Sensor);
  while (std::getline(xyz, point_line)) {
    ++point_line_no;
    if (point_line.empty()) continue;
    if (!parse_doubles(point_line, coords, 3, ' ')) {
      malformed(xyz_path.string(), point_line_no, "expected 3 coordinates");
    }
    const Point3 p{coords[0], coords[1], coords[2]};
    if (!p.finite()) malformed(xyz_path.string(), point_line_no, "non-finite coordinate");
    frame.points.pts.push_back(p);
  }
  return frame;
}

std::vector<ScanFrame> read_scan_log(const std::string& dir) {
  ScanLogReader reader(dir);
  std::vector<ScanFrame> frames;
  while (auto frame = reader.next()) frames.push_back(std::move(*frame));
  return frames;
}

void write_ground_truth_csv(const std::string& path,
                            const std::vector<sim::GroundTruthTree>& truth) {
  FilePtr f = open_for_write(path);
  std::fprintf(f.get(), "id,base_x,base_y,base_z,dbh_m,axis_x,axis_y,axis_z\n");
  for (const auto& t : truth) {
    std::fprintf(f.get(), "%d,", t.id);
    const double fields[] = {t.base.x, t.base.y, t.base.z, t.dbh,
                             t.axis.x, t.axis.y, t.axis.z};
    for (std::size_t i = 0; i < 7; ++i) {
      if (i) std::fputc(',', f.get());
      write_double(f.get(), fields[i]);
    }
    std::fputc('\n', f.get());
  }
}

std::vector<sim::GroundTruthTree> read_ground_truth_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("missing ground truth file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "id,base_x,base_y,base_z,dbh_m,axis_x,axis_y,axis_z") {
    malformed(path, 1, "unexpected ground truth header");
  }
  std::vector<sim::GroundTruthTree> truth;
  std::vector<double> fields;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!parse_doubles(line, fields, 8, ',')) malformed(path, line_no, "expected 8 values");
    sim::GroundTruthTree t;
    t.id = static_cast<int>(fields[0]);
    t.base = {fields[1], fields[2], fields[3]};
    t.dbh = fields[4];
    t.axis = {fields[5], fields[6], fields[7]};
    truth.push_back(t);
  }
  return truth;
}

void write_inventory_csv(const std::string& path, const TreeInventory& inventory) {
  FilePtr f = open_for_write(path);
  std::fprintf(f.get(),
               "id,base_x,base_y,base_z,dbh_m,incline_x,incline_y,incline_z,min_z,max_z,"
               "n_points\n");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& [id, entry] : inventory.trees()) {
    const TreeDescriptor& d = entry.desc;
    std::fprintf(f.get(), "%d,", id);
    const double fields[] = {d.base ? d.base->x : nan,
                             d.base ? d.base->y : nan,
                             d.base ? d.base->z : nan,
                             d.dbh ? *d.dbh : nan,
                             d.incline.direction.x,
                             d.incline.direction.y,
                             d.incline.direction.z,
                             d.min_z,
                             d.max_z};
    for (std::size_t i = 0; i < 9; ++i) {
      if (i) std::fputc(',', f.get());
      write_double(f.get(), fields[i]);
    }
    std::fprintf(f.get(), ",%zu\n", d.point_count);
  }
}

std::vector<TreeDescriptor> read_inventory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("missing inventory file: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "id,base_x,base_y,base_z,dbh_m,incline_x,incline_y,incline_z,min_z,max_z,n_points") {
    malformed(path, 1, "unexpected inventory header");
  }
  std::vector<TreeDescriptor> out;
  std::vector<double> fields;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!parse_doubles(line, fields, 11, ',')) malformed(path, line_no, "expected 11 values");
    TreeDescriptor d;
    d.id = static_cast<int>(fields[0]);
    if (!std::isnan(fields[1])) d.base = Point3{fields[1], fields[2], fields[3]};
    if (!std::isnan(fields[4])) d.dbh = fields[4];
    d.incline.direction = {fields[5], fields[6], fields[7]};
    d.min_z = fields[8];
    d.max_z = fields[9];
    d.incline.point = d.base ? *d.base : Point3{0, 0, d.min_z};
    d.point_count = static_cast<std::size_t>(fields[10]);
    out.push_back(d);
  }
  return out;
}

}  // namespace treescan
