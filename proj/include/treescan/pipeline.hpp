#pragma once

#include <future>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "treescan/clustering.hpp"
#include "treescan/dbh.hpp"
#include "treescan/elevation.hpp"
#include "treescan/frame.hpp"
#include "treescan/sim.hpp"
#include "treescan/tracker.hpp"

namespace treescan {

class StreamError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ElevationParams {
  double resolution = 0.16;
  double side_length = 32.0;
  double max_slope = 1.0;
  int close_kernel = 3;
  int close_passes = 2;
  double refilter_distance = 8.0;
};

struct PipelineConfig {
  double voxel_size = 0.08;
  double cluster_tolerance = 0.30;
  std::size_t cluster_min_size = 40;
  std::size_t cluster_max_size = 0;  // 0 disables the upper bound
  TrackerParams tracker;
  SliceParams slice;
  ElevationParams elevation;
  double match_radius = 1.0;  // evaluate(): base matching radius
  std::uint64_t seed = 0;
  bool serial = false;
};

/// Flat key=value config file covering every PipelineConfig field; '#' starts
/// a comment. Unknown keys raise ConfigError.
PipelineConfig parse_config_file(const std::string& path);
void apply_config_entry(PipelineConfig& config, const std::string& key, const std::string& value);

struct StageStats {
  double mean_ms = 0.0;
  double std_ms = 0.0;
  int count = 0;
};

class TimingReport {
 public:
  void add(const std::string& stage, double ms) { samples_[stage].push_back(ms); }
  StageStats stats(const std::string& stage) const;
  const std::map<std::string, std::vector<double>>& samples() const { return samples_; }

 private:
  std::map<std::string, std::vector<double>> samples_;
};

inline constexpr const char* kStageTreeTracking = "tree_tracking";
inline constexpr const char* kStageCircleFitting = "circle_fitting";
inline constexpr const char* kStageClustering = "euclidean_clustering";
inline constexpr const char* kStageBaseSegmentation = "base_segmentation";
inline constexpr const char* kStageTotal = "total";
inline constexpr const char* kStageTransformIntegrate = "transform_integrate";
inline constexpr const char* kStageVoxel = "voxel_downsample";
inline constexpr const char* kStageElevationFilter = "elevation_filter";

/// Online pipeline: ingest -> downsample -> cluster -> track -> elevation ->
/// base -> DBH per frame. The elevation filter chain runs off the frame path
/// in concurrent mode; a finished snapshot becomes visible at the next frame
/// boundary in both modes, which keeps concurrent and --serial runs identical.
class Pipeline {
 public:
  explicit Pipeline(const PipelineConfig& config);
  ~Pipeline();

  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  /// Frames must arrive with strictly increasing ids and timestamps.
  void process_frame(const ScanFrame& frame);

  /// Joins any pending filter job and publishes its snapshot.
  void finish();

  const TreeInventory& inventory() const { return inventory_; }
  TreeInventory& inventory() { return inventory_; }
  const TimingReport& timing() const { return timing_; }
  int refilter_count() const { return refilter_count_; }
  bool ground_available() const { return snapshot_ != nullptr; }
  const ElevationGrid& raw_grid() const { return raw_grid_; }
  const ElevationGrid* filtered_current() const;
  const ElevationGrid* filtered_previous() const;

 private:
  struct FilterSnapshot {
    ElevationGrid current;
    ElevationGrid previous;
    PointCloud ground{Frame::World};
    SpatialIndex index;
    double filter_ms = 0.0;
  };

  void publish_pending();
  void start_filter_job();
  static std::shared_ptr<FilterSnapshot> make_snapshot(ElevationGrid raw,
                                                       std::shared_ptr<const FilterSnapshot> prev,
                                                       const ElevationParams& params);

  PipelineConfig cfg_;
  TreeInventory inventory_;
  ElevationGrid raw_grid_;
  std::shared_ptr<FilterSnapshot> snapshot_;
  std::shared_ptr<FilterSnapshot> pending_serial_;
  std::future<std::shared_ptr<FilterSnapshot>> filter_job_;
  double travel_accum_ = 0.0;
  bool have_last_pos_ = false;
  Vec3 last_pos_;
  bool have_last_frame_ = false;
  std::int64_t last_frame_id_ = 0;
  double last_timestamp_ = 0.0;
  int refilter_count_ = 0;
  TimingReport timing_;
};

struct MatchedPair {
  int truth_id = -1;
  int tree_id = -1;
  double truth_dbh = 0.0;
  bool has_estimate = false;
  double est_dbh = 0.0;
  double error = 0.0;  // est - truth, defined when has_estimate
  bool outlier = false;
  double base_distance = 0.0;
};

struct EvaluationReport {
  int truth_count = 0;
  int detected = 0;       // one-to-one base matches within match_radius
  int with_estimate = 0;  // matched trees carrying a DBH
  std::vector<MatchedPair> pairs;
  std::vector<int> missed_truth_ids;
  bool rmse_defined = false;
  double rmse = 0.0;            // over all matched estimates
  double rmse_excl = 0.0;       // excluding IQR outliers
  int outlier_count = 0;
};

/// Greedy nearest-base one-to-one matching within match_radius; RMSE over the
/// matched DBH pairs, reported with and without |error| outliers beyond
/// 3*IQR of the quartiles.
EvaluationReport evaluate(const TreeInventory& inventory,
                          const std::vector<sim::GroundTruthTree>& truth, double match_radius);

/// Same evaluation over descriptors loaded from an inventory csv.
EvaluationReport evaluate(const std::vector<TreeDescriptor>& descriptors,
                          const std::vector<sim::GroundTruthTree>& truth, double match_radius);

}  // namespace treescan
