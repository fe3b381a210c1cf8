#include "treescan/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "treescan/parallel.hpp"
#include "treescan/rng.hpp"
#include "treescan/scan_io.hpp"

namespace treescan {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

StageStats TimingReport::stats(const std::string& stage) const {
  StageStats s;
  auto it = samples_.find(stage);
  if (it == samples_.end() || it->second.empty()) return s;
  const auto& v = it->second;
  s.count = static_cast<int>(v.size());
  double sum = 0;
  for (double x : v) sum += x;
  s.mean_ms = sum / s.count;
  double var = 0;
  for (double x : v) var += (x - s.mean_ms) * (x - s.mean_ms);
  s.std_ms = std::sqrt(var / s.count);
  return s;
}

Pipeline::Pipeline(const PipelineConfig& config)
    : cfg_(config),
      raw_grid_(config.elevation.resolution, config.elevation.side_length) {
  set_parallel(!cfg_.serial);
}

Pipeline::~Pipeline() {
  if (filter_job_.valid()) filter_job_.wait();
}

const ElevationGrid* Pipeline::filtered_current() const {
  return snapshot_ ? &snapshot_->current : nullptr;
}

const ElevationGrid* Pipeline::filtered_previous() const {
  return snapshot_ ? &snapshot_->previous : nullptr;
}

std::shared_ptr<Pipeline::FilterSnapshot> Pipeline::make_snapshot(
    ElevationGrid raw, std::shared_ptr<const FilterSnapshot> prev,
    const ElevationParams& params) {
  const auto start = Clock::now();
  auto snap = std::make_shared<FilterSnapshot>();
  ElevationGrid filtered = slope_filter(raw, params.max_slope);
  for (int pass = 0; pass < params.close_passes; ++pass) {
    filtered = morphological_close(filtered, params.close_kernel);
  }
  snap->current = std::move(filtered);
  snap->previous = prev ? prev->current
                        : ElevationGrid(raw.resolution(), raw.side_length(), raw.center());
  snap->ground = ground_points(snap->current, snap->previous);
  snap->index = SpatialIndex(snap->ground);
  snap->filter_ms = ms_since(start);
  return snap;
}

void Pipeline::publish_pending() {
  if (pending_serial_) {
    snapshot_ = std::move(pending_serial_);
    pending_serial_.reset();
    timing_.add(kStageElevationFilter, snapshot_->filter_ms);
  } else if (filter_job_.valid()) {
    snapshot_ = filter_job_.get();
    timing_.add(kStageElevationFilter, snapshot_->filter_ms);
  }
}

void Pipeline::start_filter_job() {
  ++refilter_count_;
  ElevationGrid raw_copy = raw_grid_;
  std::shared_ptr<const FilterSnapshot> prev = snapshot_;
  if (cfg_.serial) {
    pending_serial_ = make_snapshot(std::move(raw_copy), std::move(prev), cfg_.elevation);
  } else {
    filter_job_ = std::async(
        std::launch::async,
        [raw = std::move(raw_copy), prev = std::move(prev), params = cfg_.elevation]() mutable {
          return make_snapshot(std::move(raw), std::move(prev), params);
        });
  }
}

void Pipeline::process_frame(const ScanFrame& frame) {
  const auto t_total = Clock::now();
  if (have_last_frame_ &&
      (frame.id <= last_frame_id_ || frame.timestamp <= last_timestamp_)) {
    std::ostringstream os;
    os << "out-of-order frame " << frame.id << " (t=" << frame.timestamp << ")";
    throw StreamError(os.str());
  }

  // Snapshots finished since the previous frame become visible now; this is
  // the deterministic hand-over point shared by serial and concurrent modes.
  publish_pending();

  auto t0 = Clock::now();
  const PointCloud world = transform_cloud(frame.points, frame.pose);
  raw_grid_.integrate(world);
  timing_.add(kStageTransformIntegrate, ms_since(t0));

  t0 = Clock::now();
  const PointCloud down = voxel_downsample(world, cfg_.voxel_size);
  timing_.add(kStageVoxel, ms_since(t0));

  t0 = Clock::now();
  const std::vector<Cluster> clusters =
      euclidean_cluster(down, cfg_.cluster_tolerance, cfg_.cluster_min_size,
                        cfg_.cluster_max_size);
  timing_.add(kStageClustering, ms_since(t0));

  t0 = Clock::now();
  const std::vector<int> updated = track(inventory_, clusters, down, cfg_.tracker);
  timing_.add(kStageTreeTracking, ms_since(t0));

  if (have_last_pos_) {
    travel_accum_ += std::hypot(frame.pose.position.x - last_pos_.x,
                                frame.pose.position.y - last_pos_.y);
  }
  last_pos_ = frame.pose.position;
  have_last_pos_ = true;
  if (travel_accum_ >= cfg_.elevation.refilter_distance) {
    start_filter_job();
    raw_grid_.recenter(frame.pose.position);
    travel_accum_ = 0.0;
  }

  if (snapshot_) {
    const std::int64_t m = static_cast<std::int64_t>(updated.size());

    t0 = Clock::now();
#pragma omp parallel for schedule(dynamic, 1) if (parallel_enabled())
    for (std::int64_t i = 0; i < m; ++i) {
      auto* entry = inventory_.find(updated[i]);
      const auto base = segment_base(entry->desc, entry->points, snapshot_->index);
      if (base) entry->desc.base = *base;
    }
    timing_.add(kStageBaseSegmentation, ms_since(t0));

    t0 = Clock::now();
#pragma omp parallel for schedule(dynamic, 1) if (parallel_enabled())
    for (std::int64_t i = 0; i < m; ++i) {
      auto* entry = inventory_.find(updated[i]);
      if (!entry->desc.base) continue;
      const std::uint64_t seed =
          mix_seed(cfg_.seed, static_cast<std::uint64_t>(updated[i]),
                   static_cast<std::uint64_t>(frame.id));
      const DbhEstimate est = estimate_dbh(entry->desc, entry->points, cfg_.slice, seed);
      if (est.status == FitStatus::Ok) entry->desc.dbh = est.dbh;
    }
    timing_.add(kStageCircleFitting, ms_since(t0));
  }

  have_last_frame_ = true;
  last_frame_id_ = frame.id;
  last_timestamp_ = frame.timestamp;
  timing_.add(kStageTotal, ms_since(t_total));
}

void Pipeline::finish() { publish_pending(); }

namespace {

double quantile(std::vector<double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

EvaluationReport evaluate_impl(const std::vector<TreeDescriptor>& descriptors,
                               const std::vector<sim::GroundTruthTree>& truth,
                               double match_radius) {
  EvaluationReport report;
  report.truth_count = static_cast<int>(truth.size());

  struct Candidate {
    double dist;
    int truth_idx;
    int desc_idx;
  };
  std::vector<Candidate> candidates;
  for (std::size_t d = 0; d < descriptors.size(); ++d) {
    if (!descriptors[d].base) continue;
    for (std::size_t t = 0; t < truth.size(); ++t) {
      const double dist = distance(*descriptors[d].base, truth[t].base);
      if (dist <= match_radius) {
        candidates.push_back({dist, static_cast<int>(t), static_cast<int>(d)});
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.truth_idx != b.truth_idx) return a.truth_idx < b.truth_idx;
    return a.desc_idx < b.desc_idx;
  });

  std::vector<char> truth_used(truth.size(), 0);
  std::vector<char> desc_used(descriptors.size(), 0);
  for (const Candidate& c : candidates) {
    if (truth_used[c.truth_idx] || desc_used[c.desc_idx]) continue;
    truth_used[c.truth_idx] = 1;
    desc_used[c.desc_idx] = 1;
    MatchedPair pair;
    pair.truth_id = truth[c.truth_idx].id;
    pair.tree_id = descriptors[c.desc_idx].id;
    pair.truth_dbh = truth[c.truth_idx].dbh;
    pair.base_distance = c.dist;
    if (descriptors[c.desc_idx].dbh) {
      pair.has_estimate = true;
      pair.est_dbh = *descriptors[c.desc_idx].dbh;
      pair.error = pair.est_dbh - pair.truth_dbh;
    }
    report.pairs.push_back(pair);
  }
  std::sort(report.pairs.begin(), report.pairs.end(),
            [](const MatchedPair& a, const MatchedPair& b) { return a.truth_id < b.truth_id; });

  report.detected = static_cast<int>(report.pairs.size());
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (!truth_used[t]) report.missed_truth_ids.push_back(truth[t].id);
  }

  std::vector<double> errors;
  for (const MatchedPair& p : report.pairs) {
    if (p.has_estimate) errors.push_back(p.error);
  }
  report.with_estimate = static_cast<int>(errors.size());
  if (errors.empty()) return report;

  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  const double q1 = quantile(sorted, 0.25);
  const double q3 = quantile(sorted, 0.75);
  const double iqr = q3 - q1;
  const double lo = q1 - 3.0 * iqr;
  const double hi = q3 + 3.0 * iqr;

  double sum_sq = 0.0, sum_sq_excl = 0.0;
  int n_excl = 0;
  for (MatchedPair& p : report.pairs) {
    if (!p.has_estimate) continue;
    sum_sq += p.error * p.error;
    if (p.error < lo || p.error > hi) {
      p.outlier = true;
      ++report.outlier_count;
    } else {
      sum_sq_excl += p.error * p.error;
      ++n_excl;
    }
  }
  report.rmse_defined = true;
  report.rmse = std::sqrt(sum_sq / static_cast<double>(errors.size()));
  report.rmse_excl = n_excl > 0 ? std::sqrt(sum_sq_excl / n_excl) : report.rmse;
  return report;
}

}  // namespace

EvaluationReport evaluate(const TreeInventory& inventory,
                          const std::vector<sim::GroundTruthTree>& truth, double match_radius) {
  std::vector<TreeDescriptor> descriptors;
  descriptors.reserve(inventory.size());
  for (const auto& [id, entry] : inventory.trees()) descriptors.push_back(entry.desc);
  return evaluate_impl(descriptors, truth, match_radius);
}

EvaluationReport evaluate(const std::vector<TreeDescriptor>& descriptors,
                          const std::vector<sim::GroundTruthTree>& truth, double match_radius) {
  return evaluate_impl(descriptors, truth, match_radius);
}

namespace {

std::vector<double> parse_double_list(const std::string& value) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= value.size()) {
    std::size_t end = value.find(',', pos);
    if (end == std::string::npos) end = value.size();
    const std::string token = value.substr(pos, end - pos);
    char* parse_end = nullptr;
    const double v = std::strtod(token.c_str(), &parse_end);
    if (parse_end == token.c_str() || *parse_end != '\0') {
      throw ConfigError("invalid number '" + token + "'");
    }
    out.push_back(v);
    if (end == value.size()) break;
    pos = end + 1;
  }
  return out;
}

double parse_double(const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0') throw ConfigError("invalid number '" + value + "'");
  return v;
}

bool parse_bool(const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw ConfigError("invalid boolean '" + value + "'");
}

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

}  // namespace

void apply_config_entry(PipelineConfig& config, const std::string& key,
                        const std::string& value) {
  if (key == "voxel_size") config.voxel_size = parse_double(value);
  else if (key == "cluster_tolerance") config.cluster_tolerance = parse_double(value);
  else if (key == "cluster_min_size") config.cluster_min_size = static_cast<std::size_t>(parse_double(value));
  else if (key == "cluster_max_size") config.cluster_max_size = static_cast<std::size_t>(parse_double(value));
  else if (key == "theta_threshold_deg") config.tracker.theta_threshold = parse_double(value) * kDegToRad;
  else if (key == "h_threshold") config.tracker.h_threshold = parse_double(value);
  else if (key == "match_distance") config.tracker.match_distance = parse_double(value);
  else if (key == "trim_schedule") config.tracker.trim_schedule = parse_double_list(value);
  else if (key == "central_height_fraction") config.tracker.central_height_fraction = parse_double(value);
  else if (key == "breast_height") config.slice.breast_height = parse_double(value);
  else if (key == "slice_thickness") config.slice.slice_thickness = parse_double(value);
  else if (key == "ransac_iterations") config.slice.ransac_iterations = static_cast<int>(parse_double(value));
  else if (key == "inlier_tolerance") config.slice.inlier_tolerance = parse_double(value);
  else if (key == "min_inlier_ratio") config.slice.min_inlier_ratio = parse_double(value);
  else if (key == "elev_resolution") config.elevation.resolution = parse_double(value);
  else if (key == "elev_side_length") config.elevation.side_length = parse_double(value);
  else if (key == "elev_max_slope") config.elevation.max_slope = parse_double(value);
  else if (key == "elev_close_kernel") config.elevation.close_kernel = static_cast<int>(parse_double(value));
  else if (key == "elev_close_passes") config.elevation.close_passes = static_cast<int>(parse_double(value));
  else if (key == "refilter_distance") config.elevation.refilter_distance = parse_double(value);
  else if (key == "match_radius") config.match_radius = parse_double(value);
  else if (key == "seed") config.seed = static_cast<std::uint64_t>(parse_double(value));
  else if (key == "serial") config.serial = parse_bool(value);
  else throw ConfigError("unknown config key '" + key + "'");
}

PipelineConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  PipelineConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = strip(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    try {
      apply_config_entry(config, strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

}  // namespace treescan
