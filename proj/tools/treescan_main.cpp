#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "treescan/parallel.hpp"
#include "treescan/pipeline.hpp"
#include "treescan/scan_io.hpp"
#include "treescan/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

treescan::sim::SceneSpec load_scene(const std::string& path, treescan::sim::ScannerSpec& scanner,
                                    std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw treescan::ConfigError("cannot open scene file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw treescan::ConfigError("invalid scene json: " + std::string(e.what()));
  }

  treescan::sim::SceneSpec spec;
  spec.seed = j.value("seed", 0ull);
  if (seed_override) spec.seed = *seed_override;

  if (j.contains("random_forest")) {
    const json& r = j["random_forest"];
    treescan::sim::RandomForestParams params;
    params.tree_count = r.value("tree_count", params.tree_count);
    params.x_min = r.value("x_min", params.x_min);
    params.x_max = r.value("x_max", params.x_max);
    params.y_min = r.value("y_min", params.y_min);
    params.y_max = r.value("y_max", params.y_max);
    params.dbh_min = r.value("dbh_min", params.dbh_min);
    params.dbh_max = r.value("dbh_max", params.dbh_max);
    params.min_spacing = r.value("min_spacing", params.min_spacing);
    params.max_lean_deg = r.value("max_lean_deg", params.max_lean_deg);
    params.shrub_count = r.value("shrub_count", params.shrub_count);
    params.auto_canopy = r.value("auto_canopy", params.auto_canopy);
    spec = treescan::sim::random_forest(params, spec.seed);
  }

  if (j.contains("terrain")) {
    const json& t = j["terrain"];
    spec.terrain.base_height = t.value("base_height", 0.0);
    spec.terrain.terms.clear();
    for (const json& term : t.value("terms", json::array())) {
      spec.terrain.terms.push_back({term.value("amplitude", 0.0), term.value("kx", 0.0),
                                    term.value("ky", 0.0), term.value("phase", 0.0)});
    }
  }
  for (const json& t : j.value("trees", json::array())) {
    treescan::sim::TreeSpec tree;
    tree.x = t.at("x");
    tree.y = t.at("y");
    tree.dbh = t.at("dbh");
    tree.height = t.value("height", tree.height);
    if (t.contains("lean")) {
      tree.lean = {t["lean"][0], t["lean"][1], t["lean"][2]};
    }
    tree.taper = t.value("taper", tree.taper);
    spec.trees.push_back(tree);
  }
  for (const json& s : j.value("shrubs", json::array())) {
    spec.shrubs.push_back({s.at("x"), s.at("y"), s.value("radius", 0.5), s.value("height", 0.8)});
  }
  for (const json& c : j.value("canopies", json::array())) {
    spec.canopies.push_back(
        {c.at("x"), c.at("y"), c.value("z_above_ground", 10.0), c.value("radius", 2.5)});
  }
  spec.canopy_density = j.value("canopy_density", spec.canopy_density);

  if (j.contains("scanner")) {
    const json& s = j["scanner"];
    scanner.vertical_fov_deg = s.value("vertical_fov_deg", scanner.vertical_fov_deg);
    scanner.beams = s.value("beams", scanner.beams);
    scanner.horizontal_steps = s.value("horizontal_steps", scanner.horizontal_steps);
    scanner.max_range = s.value("max_range", scanner.max_range);
    scanner.range_noise = s.value("range_noise", scanner.range_noise);
    scanner.sweep_trigger = s.value("sweep_trigger", scanner.sweep_trigger);
    scanner.sensor_height = s.value("sensor_height", scanner.sensor_height);
  }
  return spec;
}

std::vector<treescan::Vec2> load_path(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw treescan::ConfigError("cannot open path file: " + path);
  std::vector<treescan::Vec2> points;
  double x, y;
  while (in >> x >> y) points.push_back({x, y});
  if (points.empty()) throw treescan::ConfigError("path file has no waypoints: " + path);
  return points;
}

json timing_to_json(const treescan::TimingReport& timing) {
  json stages = json::object();
  for (const auto& [name, samples] : timing.samples()) {
    const treescan::StageStats s = timing.stats(name);
    stages[name] = {{"mean_ms", s.mean_ms}, {"std_ms", s.std_ms}, {"count", s.count}};
  }
  return stages;
}

json report_to_json(const treescan::EvaluationReport& report) {
  json pairs = json::array();
  for (const auto& p : report.pairs) {
    json entry = {{"truth_id", p.truth_id},
                  {"tree_id", p.tree_id},
                  {"truth_dbh_m", p.truth_dbh},
                  {"base_distance_m", p.base_distance}};
    if (p.has_estimate) {
      entry["est_dbh_m"] = p.est_dbh;
      entry["error_m"] = p.error;
      entry["outlier"] = p.outlier;
    }
    pairs.push_back(entry);
  }
  json out = {{"truth_count", report.truth_count},
              {"detected", report.detected},
              {"with_estimate", report.with_estimate},
              {"missed_truth_ids", report.missed_truth_ids},
              {"outlier_count", report.outlier_count},
              {"pairs", pairs}};
  if (report.rmse_defined) {
    out["rmse_m"] = report.rmse;
    out["rmse_excluding_outliers_m"] = report.rmse_excl;
  } else {
    out["rmse_m"] = nullptr;
    out["rmse_excluding_outliers_m"] = nullptr;
  }
  return out;
}

int run_simulate(const std::string& scene_path, const std::string& path_path,
                 const std::string& out_dir, std::optional<std::uint64_t> seed) {
  treescan::sim::ScannerSpec scanner;
  const treescan::sim::SceneSpec spec = load_scene(scene_path, scanner, seed);
  const treescan::sim::Scene scene = treescan::sim::generate_scene(spec);
  const std::vector<treescan::Vec2> path = load_path(path_path);

  const auto frames = treescan::sim::simulate_trajectory(scene, path, scanner);
  treescan::write_scan_log(out_dir, frames);
  treescan::write_ground_truth_csv((fs::path(out_dir) / "ground_truth.csv").string(),
                                   scene.truth);

  std::size_t total_points = 0;
  for (const auto& f : frames) total_points += f.points.size();
  std::cout << "simulated " << frames.size() << " frames, " << total_points << " points, "
            << scene.truth.size() << " trees -> " << out_dir << "\n";
  return 0;
}

int run_pipeline(const std::string& log_dir, const std::string& config_path,
                 const std::string& out_dir, bool serial, const std::string& dump_dir) {
  treescan::PipelineConfig config;
  if (!config_path.empty()) config = treescan::parse_config_file(config_path);
  if (serial) config.serial = true;

  treescan::Pipeline pipeline(config);
  treescan::ScanLogReader reader(log_dir);
  std::size_t frames = 0;
  int dumped = 0;
  while (auto frame = reader.next()) {
    pipeline.process_frame(*frame);
    ++frames;
    if (!dump_dir.empty() && pipeline.refilter_count() > dumped) {
      pipeline.finish();  // make the snapshot visible for dumping
      dumped = pipeline.refilter_count();
      fs::create_directories(dump_dir);
      char name[64];
      std::snprintf(name, sizeof(name), "elevation_%03d.txt", dumped);
      std::ofstream os(fs::path(dump_dir) / name);
      pipeline.filtered_current()->dump(os);
    }
  }
  pipeline.finish();

  fs::create_directories(out_dir);
  treescan::write_inventory_csv((fs::path(out_dir) / "inventory.csv").string(),
                                pipeline.inventory());

  int with_dbh = 0, with_base = 0;
  for (const auto& [id, entry] : pipeline.inventory().trees()) {
    if (entry.desc.dbh) ++with_dbh;
    if (entry.desc.base) ++with_base;
  }
  json metrics = {{"frames", frames},
                  {"refilters", pipeline.refilter_count()},
                  {"mode", config.serial ? "serial" : "concurrent"},
                  {"inventory",
                   {{"trees", pipeline.inventory().size()},
                    {"with_base", with_base},
                    {"with_dbh", with_dbh}}},
                  {"timing", timing_to_json(pipeline.timing())}};
  std::ofstream metrics_file(fs::path(out_dir) / "metrics.json");
  metrics_file << metrics.dump(2) << "\n";

  std::cout << "processed " << frames << " frames: " << pipeline.inventory().size()
            << " trees tracked, " << with_dbh << " with DBH -> " << out_dir << "\n";
  return 0;
}

int run_evaluate(const std::string& inventory_path, const std::string& truth_path,
                 const std::string& out_path, double match_radius) {
  const auto descriptors = treescan::read_inventory_csv(inventory_path);
  const auto truth = treescan::read_ground_truth_csv(truth_path);
  const treescan::EvaluationReport report = treescan::evaluate(descriptors, truth, match_radius);

  json out = {{"evaluation", report_to_json(report)}};
  std::ofstream os(out_path);
  if (!os) throw treescan::IngestError("cannot open for writing: " + out_path);
  os << out.dump(2) << "\n";

  std::cout << "detections " << report.detected << "/" << report.truth_count;
  if (report.rmse_defined) {
    std::cout << ", rmse " << report.rmse << " m (" << report.rmse_excl
              << " m excluding outliers)";
  }
  std::cout << " -> " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online forest inventory from pose-stamped LiDAR scans"};
  app.require_subcommand(1);

  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic scan log + ground truth");
  std::string scene_file, path_file, sim_out;
  std::uint64_t seed_value = 0;
  bool seed_given = false;
  sim_cmd->add_option("--scene", scene_file, "Scene description (json)")->required();
  sim_cmd->add_option("--path", path_file, "Trajectory waypoints, one 'x y' per line")->required();
  sim_cmd->add_option("--out", sim_out, "Output scan-log directory")->required();
  sim_cmd->add_option("--seed", seed_value, "Override the scene seed")
      ->each([&](const std::string&) { seed_given = true; });

  auto* run_cmd = app.add_subcommand("run", "Run the tracking pipeline over a scan log");
  std::string log_dir, config_file, run_out, dump_dir;
  bool serial = false;
  run_cmd->add_option("--log", log_dir, "Scan-log directory")->required();
  run_cmd->add_option("--config", config_file, "key=value pipeline config");
  run_cmd->add_option("--out", run_out, "Output directory (inventory.csv, metrics.json)")
      ->required();
  run_cmd->add_flag("--serial", serial, "Single-threaded deterministic reference mode");
  run_cmd->add_option("--dump-elevation", dump_dir, "Write filtered elevation rasters here");

  auto* eval_cmd = app.add_subcommand("evaluate", "Compare an inventory against ground truth");
  std::string inv_file, truth_file, eval_out;
  double match_radius = 1.0;
  eval_cmd->add_option("--inventory", inv_file, "inventory.csv from a run")->required();
  eval_cmd->add_option("--truth", truth_file, "ground_truth.csv")->required();
  eval_cmd->add_option("--out", eval_out, "Output report (json)")->required();
  eval_cmd->add_option("--match-radius", match_radius, "Base matching radius, m");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim_cmd->parsed()) {
      return run_simulate(scene_file, path_file, sim_out,
                          seed_given ? std::optional<std::uint64_t>(seed_value) : std::nullopt);
    }
    if (run_cmd->parsed()) {
      return run_pipeline(log_dir, config_file, run_out, serial, dump_dir);
    }
    if (eval_cmd->parsed()) {
      return run_evaluate(inv_file, truth_file, eval_out, match_radius);
    }
  } catch (const treescan::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const treescan::IngestError& e) {
    std::cerr << "ingestion error: " << e.what() << "\n";
    return 2;
  } catch (const treescan::StreamError& e) {
    std::cerr << "stream error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
