#include "probemap/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "probemap/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace probemap::pipeline {

namespace {

bool wildcard_match(const std::string& pattern, const std::string& name) {
  size_t p = 0, n = 0, star = std::string::npos, mark = 0;
  while (n < name.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
      ++p;
      ++n;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = n;
    } else if (star != std::string::npos) {
      p = star + 1;
      n = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

std::string resolve_against(const std::string& base_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).string();
}

double mean_pairwise_distance(std::span<const std::pair<field::Pose, double>> samples) {
  double total = 0.0;
  int count = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    for (size_t j = i + 1; j < samples.size(); ++j) {
      total += std::hypot(samples[i].first.x - samples[j].first.x,
                          samples[i].first.y - samples[j].first.y);
      ++count;
    }
  }
  return count > 0 ? total / count : 0.0;
}

}  // namespace

std::vector<std::string> glob_paths(const std::string& pattern) {
  const fs::path p(pattern);
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  const std::string base = p.filename().string();
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (wildcard_match(base, entry.path().filename().string())) {
      out.push_back(entry.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json j;
  in >> j;

  PipelineConfig cfg;
  cfg.config_version = j.value("config_version", 1);
  cfg.seed = j.value("seed", uint64_t{0});
  cfg.out_dir = j.value("out_dir", std::string("out"));
  cfg.trace = j.value("trace", false);

  if (j.contains("masks")) {
    const auto& jm = j["masks"];
    cfg.mask_glob = jm.value("glob", std::string());
    cfg.scale_mm_per_px = jm.value("scale_mm_per_px", 0.2);
    cfg.sigma_px = jm.value("sigma_px", 3.0);
  }
  if (j.contains("loss")) {
    const auto& jl = j["loss"];
    cfg.weights.w_coverage = jl.value("w_coverage", 1.0);
    cfg.weights.w_angle = jl.value("w_angle", 1.0);
    cfg.weights.w_overlap = jl.value("w_overlap", 1.0);
    cfg.weights.sigmoid_steepness = jl.value("sigmoid_steepness", 10.0);
  }
  if (j.contains("optimizer")) {
    const auto& jo = j["optimizer"];
    cfg.optimizer.k = jo.value("k", 3);
    cfg.optimizer.restarts = jo.value("restarts", 8);
    cfg.optimizer.max_iters = jo.value("max_iters", 150);
    cfg.optimizer.step_size = jo.value("step_size", 5.0);
    cfg.optimizer.step_decay = jo.value("step_decay", 1.0);
    cfg.optimizer.tau = jo.value("tau", 0.5);
  }
  if (j.contains("planner")) {
    const auto& jp = j["planner"];
    cfg.planner_algorithm = jp.value("algorithm", std::string("noisy_dijkstra"));
    cfg.planner.alpha = jp.value("alpha", 0.02);
    cfg.planner.generations = jp.value("generations", 1000);
  }
  if (j.contains("ga")) {
    const auto& jg = j["ga"];
    cfg.ga.population = jg.value("population", 10);
    cfg.ga.generations = jg.value("generations", 1000);
    cfg.ga.mutation_rate = jg.value("mutation_rate", 0.8);
  }
  if (j.contains("probe")) {
    const auto& jp = j["probe"];
    cfg.probe.tip_count = jp.value("tip_count", 4);
    cfg.probe.tip_spacing_px = jp.value("tip_spacing_px", 10.0);
    cfg.probe.tip_radius_px = jp.value("tip_radius_px", 2.5);
    cfg.probe.arm_length_mm = jp.value("arm_length_mm", 0.0);
  }
  if (j.contains("gcode")) {
    const auto& jg = j["gcode"];
    cfg.gcode.safe_z_mm = jg.value("safe_z_mm", 10.0);
    cfg.gcode.plunge_z_mm = jg.value("plunge_z_mm", 0.0);
    cfg.gcode.travel_feed_mm_min = jg.value("travel_feed_mm_min", 3000.0);
    cfg.gcode.plunge_feed_mm_min = jg.value("plunge_feed_mm_min", 300.0);
    cfg.gcode.dwell_s = jg.value("dwell_s", 5.0);
    cfg.gcode.rotary_word = jg.value("rotary_word", std::string("A"));
    if (jg.contains("envelope")) {
      const auto& je = jg["envelope"];
      if (je.contains("x")) {
        cfg.gcode.env_x_min = je["x"][0].get<double>();
        cfg.gcode.env_x_max = je["x"][1].get<double>();
      }
      if (je.contains("y")) {
        cfg.gcode.env_y_min = je["y"][0].get<double>();
        cfg.gcode.env_y_max = je["y"][1].get<double>();
      }
      if (je.contains("z")) {
        cfg.gcode.env_z_min = je["z"][0].get<double>();
        cfg.gcode.env_z_max = je["z"][1].get<double>();
      }
    }
  }
  cfg.calibration_path = j.value("calibration", std::string());
  if (j.contains("home_mm")) {
    cfg.home_x_mm = j["home_mm"][0].get<double>();
    cfg.home_y_mm = j["home_mm"][1].get<double>();
  }
  if (j.contains("iv")) {
    cfg.iv_dir = j["iv"].value("dir", std::string());
    cfg.synth_iv = j["iv"].value("synth", false);
  }

  // Relative paths resolve against the config file's directory.
  const std::string base = fs::path(path).has_parent_path()
                               ? fs::path(path).parent_path().string()
                               : std::string(".");
  cfg.mask_glob = resolve_against(base, cfg.mask_glob);
  cfg.calibration_path = resolve_against(base, cfg.calibration_path);
  cfg.iv_dir = resolve_against(base, cfg.iv_dir);
  cfg.out_dir = resolve_against(base, cfg.out_dir);
  return cfg;
}

void save_config(const std::string& path, const PipelineConfig& cfg) {
  json j;
  j["config_version"] = cfg.config_version;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["trace"] = cfg.trace;
  j["masks"] = {{"glob", cfg.mask_glob},
                {"scale_mm_per_px", cfg.scale_mm_per_px},
                {"sigma_px", cfg.sigma_px}};
  j["loss"] = {{"w_coverage", cfg.weights.w_coverage},
               {"w_angle", cfg.weights.w_angle},
               {"w_overlap", cfg.weights.w_overlap},
               {"sigmoid_steepness", cfg.weights.sigmoid_steepness}};
  j["optimizer"] = {{"k", cfg.optimizer.k},           {"restarts", cfg.optimizer.restarts},
                    {"max_iters", cfg.optimizer.max_iters}, {"step_size", cfg.optimizer.step_size},
                    {"step_decay", cfg.optimizer.step_decay}, {"tau", cfg.optimizer.tau}};
  j["planner"] = {{"algorithm", cfg.planner_algorithm},
                  {"alpha", cfg.planner.alpha},
                  {"generations", cfg.planner.generations}};
  j["ga"] = {{"population", cfg.ga.population},
             {"generations", cfg.ga.generations},
             {"mutation_rate", cfg.ga.mutation_rate}};
  j["probe"] = {{"tip_count", cfg.probe.tip_count},
                {"tip_spacing_px", cfg.probe.tip_spacing_px},
                {"tip_radius_px", cfg.probe.tip_radius_px},
                {"arm_length_mm", cfg.probe.arm_length_mm}};
  j["gcode"] = {{"safe_z_mm", cfg.gcode.safe_z_mm},
                {"plunge_z_mm", cfg.gcode.plunge_z_mm},
                {"travel_feed_mm_min", cfg.gcode.travel_feed_mm_min},
                {"plunge_feed_mm_min", cfg.gcode.plunge_feed_mm_min},
                {"dwell_s", cfg.gcode.dwell_s},
                {"rotary_word", cfg.gcode.rotary_word},
                {"envelope",
                 {{"x", {cfg.gcode.env_x_min, cfg.gcode.env_x_max}},
                  {"y", {cfg.gcode.env_y_min, cfg.gcode.env_y_max}},
                  {"z", {cfg.gcode.env_z_min, cfg.gcode.env_z_max}}}}};
  j["calibration"] = cfg.calibration_path;
  j["home_mm"] = {cfg.home_x_mm, cfg.home_y_mm};
  j["iv"] = {{"dir", cfg.iv_dir}, {"synth", cfg.synth_iv}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << j.dump(2) << '\n';
}

std::vector<Diagnostic> validate_config(const PipelineConfig& cfg) {
  std::vector<Diagnostic> diags;
  auto bad = [&](const std::string& field, const std::string& msg) {
    diags.push_back({field, msg});
  };

  if (cfg.mask_glob.empty()) bad("masks.glob", "mask glob is empty");
  if (cfg.scale_mm_per_px <= 0.0) bad("masks.scale_mm_per_px", "out of range (> 0)");
  if (cfg.sigma_px <= 0.0) bad("masks.sigma_px", "out of range (> 0)");
  if (cfg.weights.w_coverage < 0.0) bad("loss.w_coverage", "out of range (>= 0)");
  if (cfg.weights.w_angle < 0.0) bad("loss.w_angle", "out of range (>= 0)");
  if (cfg.weights.w_overlap < 0.0) bad("loss.w_overlap", "out of range (>= 0)");
  if (cfg.optimizer.k > 1 && cfg.weights.w_overlap <= 0.0) {
    bad("loss.w_overlap", "must be > 0 when k > 1");
  }
  if (cfg.weights.sigmoid_steepness <= 0.0) bad("loss.sigmoid_steepness", "out of range (> 0)");
  if (cfg.optimizer.k < 1) bad("optimizer.k", "out of range (>= 1)");
  if (cfg.optimizer.restarts < 1) bad("optimizer.restarts", "out of range (>= 1)");
  if (cfg.optimizer.max_iters < 1) bad("optimizer.max_iters", "out of range (>= 1)");
  if (cfg.optimizer.step_size <= 0.0) bad("optimizer.step_size", "out of range (> 0)");
  if (cfg.optimizer.step_decay <= 0.0 || cfg.optimizer.step_decay > 1.0) {
    bad("optimizer.step_decay", "out of range ((0, 1])");
  }
  if (cfg.optimizer.tau <= 0.0 || cfg.optimizer.tau >= 1.0) {
    bad("optimizer.tau", "out of range ((0, 1))");
  }
  if (cfg.planner.alpha < 0.0) bad("planner.alpha", "out of range (>= 0)");
  if (cfg.planner.generations < 1) bad("planner.generations", "out of range (>= 1)");
  const bool known_planner =
      cfg.planner_algorithm == "noisy_dijkstra" || cfg.planner_algorithm == "greedy_dijkstra" ||
      cfg.planner_algorithm == "christofides" || cfg.planner_algorithm == "astar" ||
      cfg.planner_algorithm == "ga";
  if (!known_planner) bad("planner.algorithm", "unknown algorithm: " + cfg.planner_algorithm);
  if (cfg.ga.population < 2) bad("ga.population", "out of range (>= 2)");
  if (cfg.ga.mutation_rate < 0.0 || cfg.ga.mutation_rate > 1.0) {
    bad("ga.mutation_rate", "out of range ([0, 1])");
  }
  if (cfg.probe.tip_count < 1) bad("probe.tip_count", "out of range (>= 1)");
  if (cfg.probe.tip_spacing_px < 0.0) bad("probe.tip_spacing_px", "out of range (>= 0)");
  if (cfg.probe.tip_radius_px <= 0.0) bad("probe.tip_radius_px", "out of range (> 0)");
  if (cfg.probe.arm_length_mm < 0.0) bad("probe.arm_length_mm", "out of range (>= 0)");
  if (cfg.gcode.safe_z_mm <= cfg.gcode.plunge_z_mm) {
    bad("gcode.safe_z_mm", "must be above plunge_z_mm");
  }
  if (cfg.gcode.travel_feed_mm_min <= 0.0) bad("gcode.travel_feed_mm_min", "out of range (> 0)");
  if (cfg.gcode.plunge_feed_mm_min <= 0.0) bad("gcode.plunge_feed_mm_min", "out of range (> 0)");
  if (cfg.gcode.dwell_s < 0.0) bad("gcode.dwell_s", "out of range (>= 0)");
  if (cfg.gcode.env_x_min >= cfg.gcode.env_x_max) bad("gcode.envelope.x", "min must be < max");
  if (cfg.gcode.env_y_min >= cfg.gcode.env_y_max) bad("gcode.envelope.y", "min must be < max");
  if (cfg.gcode.env_z_min >= cfg.gcode.env_z_max) bad("gcode.envelope.z", "min must be < max");
  if (cfg.gcode.rotary_word != "A" && cfg.gcode.rotary_word != "B" &&
      cfg.gcode.rotary_word != "C" && cfg.gcode.rotary_word != "E") {
    bad("gcode.rotary_word", "must be one of A, B, C, E");
  }
  if (!cfg.calibration_path.empty() && !fs::exists(cfg.calibration_path)) {
    bad("calibration", "missing calibration file: " + cfg.calibration_path);
  }
  if (!cfg.iv_dir.empty() && !fs::is_directory(cfg.iv_dir)) {
    bad("iv.dir", "missing iv directory: " + cfg.iv_dir);
  }
  if (!cfg.mask_glob.empty() && glob_paths(cfg.mask_glob).empty()) {
    bad("masks.glob", "no files match: " + cfg.mask_glob);
  }
  return diags;
}

std::vector<Diagnostic> validate_config(const std::string& path) {
  try {
    return validate_config(load_config(path));
  } catch (const std::exception& e) {
    return {{"config", e.what()}};
  }
}

MaskBundle load_masks(const PipelineConfig& cfg) {
  MaskBundle bundle;
  for (const auto& path : glob_paths(cfg.mask_glob)) {
    try {
      field::SegmentMask mask = field::load_mask(path, cfg.scale_mm_per_px);
      const std::string sidecar = path + ".json";
      if (fs::exists(sidecar)) {
        std::ifstream in(sidecar);
        json js;
        in >> js;
        if (js.contains("origin_mm")) {
          mask.origin_mm_x = js["origin_mm"][0].get<double>();
          mask.origin_mm_y = js["origin_mm"][1].get<double>();
        }
      }
      bundle.fields.push_back(field::smooth(mask, cfg.sigma_px));
      bundle.masks.push_back(std::move(mask));
    } catch (const std::exception& e) {
      bundle.errors.push_back(e.what());
    }
  }
  return bundle;
}

std::vector<optim::PoseSet> compute_poses(const PipelineConfig& cfg, const MaskBundle& bundle) {
  optim::OptimizerConfig ocfg = cfg.optimizer;
  ocfg.seed = cfg.seed;
  ocfg.footprint = {cfg.probe.tip_count, cfg.probe.tip_spacing_px, cfg.probe.tip_radius_px};
  ocfg.record_trace = cfg.trace;
  std::vector<optim::PoseSet> sets = optim::batch_optimize(bundle.fields, ocfg, cfg.weights);
  for (size_t i = 0; i < sets.size(); ++i) {
    sets[i].segment_id = bundle.masks[i].id;
    sets[i].origin_mm_x = bundle.masks[i].origin_mm_x;
    sets[i].origin_mm_y = bundle.masks[i].origin_mm_y;
    sets[i].scale_mm_per_px = bundle.masks[i].scale_mm_per_px;
  }
  return sets;
}

route::Tour plan_route(const route::TourGraph& graph, const PipelineConfig& cfg) {
  route::PlannerConfig pcfg = cfg.planner;
  pcfg.seed = cfg.seed;
  route::GaConfig gacfg = cfg.ga;
  gacfg.seed = cfg.seed;
  if (cfg.planner_algorithm == "greedy_dijkstra") return route::greedy_dijkstra(graph);
  if (cfg.planner_algorithm == "christofides") return route::christofides_otsp(graph);
  if (cfg.planner_algorithm == "astar") return route::astar_otsp(graph);
  if (cfg.planner_algorithm == "ga") return route::ga_otsp(graph, gacfg);
  return route::noisy_dijkstra(graph, pcfg);
}

namespace {

// Measurement stage shared by run_pipeline and run_analysis. Mask index is
// looked up by segment id so the stage also works from reloaded poses.json.
void analyze_stage(const PipelineConfig& cfg, const MaskBundle& bundle,
                   std::span<const optim::PoseSet> sets, PipelineResult& result) {
  const fs::path out(cfg.out_dir);
  std::vector<measure::MeasurementRecord> records;
  uint64_t record_index = 0;
  for (size_t si = 0; si < sets.size(); ++si) {
    const auto& set = sets[si];
    size_t mask_index = bundle.masks.size();
    for (size_t m = 0; m < bundle.masks.size(); ++m) {
      if (bundle.masks[m].id == set.segment_id) {
        mask_index = m;
        break;
      }
    }
    std::vector<std::pair<field::Pose, double>> samples;
    const double comp_x =
        sets.size() > 1 ? static_cast<double>(si) / static_cast<double>(sets.size() - 1) : 0.0;
    for (size_t pi = 0; pi < set.poses.size(); ++pi) {
      if (!set.pose_valid[pi]) continue;
      measure::IVRecord iv;
      if (cfg.synth_iv) {
        double quality = 1.0;
        if (mask_index < bundle.fields.size()) {
          quality = std::clamp(
              bundle.fields[mask_index].sample(set.poses[pi].x, set.poses[pi].y), 0.0, 1.0);
        }
        iv = measure::synth_iv(comp_x, quality, mix_seed(cfg.seed, 0x6976 + record_index));
      } else {
        const fs::path ivp = fs::path(cfg.iv_dir) / set.segment_id /
                             (std::to_string(pi) + ".csv");
        if (!fs::exists(ivp)) continue;
        try {
          iv = measure::read_iv_csv(ivp.string());
        } catch (const std::exception& e) {
          result.errors.push_back({"analyze", std::string(e.what())});
          continue;
        }
      }
      ++record_index;
      const auto fit = measure::photoconductance(iv);
      measure::MeasurementRecord rec;
      rec.segment_id = set.segment_id;
      rec.pose = set.poses[pi];
      rec.g_ph = fit.g_ph;
      rec.fit_r2 = fit.r2;
      rec.composition_x = comp_x;
      records.push_back(rec);
      samples.push_back({set.poses[pi], fit.g_ph});
    }
    if (!samples.empty() && mask_index < bundle.masks.size()) {
      const auto& mask = bundle.masks[mask_index];
      double bw = mean_pairwise_distance(samples);
      if (bw <= 0.0) bw = 0.25 * std::max(mask.width, mask.height);
      const auto map = measure::spatial_map(samples, mask, bw);
      fs::create_directories(out / "maps");
      field::ScalarField raster;
      raster.width = map.width;
      raster.height = map.height;
      raster.sigma = map.bandwidth_px;
      raster.values = map.grid;
      const std::string mp = (out / "maps" / (set.segment_id + ".sfld")).string();
      field::write_sfld(mp, raster);
      json sidecar;
      sidecar["bandwidth_px"] = map.bandwidth_px;
      auto& js = sidecar["samples"] = json::array();
      for (const auto& [pose, g] : samples) {
        js.push_back({{"x_px", pose.x}, {"y_px", pose.y}, {"g_ph_S", g}});
      }
      std::ofstream sout(mp + ".json");
      sout << sidecar.dump(2) << '\n';
      result.artifacts.push_back(mp);
    }
  }
  result.measurements = static_cast<int>(records.size());
  if (!records.empty()) {
    measure::write_records_csv((out / "measurements.csv").string(), records);
    const auto stats = measure::campaign_summary(records);
    measure::write_summary_csv((out / "summary.csv").string(), stats);
    result.artifacts.push_back((out / "measurements.csv").string());
    result.artifacts.push_back((out / "summary.csv").string());
  }
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  PipelineResult result;
  const auto diags = validate_config(cfg);
  if (!diags.empty()) {
    for (const auto& d : diags) result.errors.push_back({"config", d.field + ": " + d.message});
    return result;
  }
  fs::create_directories(cfg.out_dir);
  const fs::path out(cfg.out_dir);

  MaskBundle bundle = load_masks(cfg);
  for (const auto& e : bundle.errors) result.errors.push_back({"masks", e});
  result.masks_loaded = static_cast<int>(bundle.masks.size());
  if (bundle.masks.empty()) {
    result.errors.push_back({"masks", "no usable masks"});
    return result;
  }

  std::vector<optim::PoseSet> sets = compute_poses(cfg, bundle);
  for (const auto& s : sets) result.valid_pose_sets += s.valid ? 1 : 0;
  optim::write_pose_sets_csv((out / "poses.csv").string(), sets);
  optim::write_pose_sets_json((out / "poses.json").string(), sets);
  result.artifacts.push_back((out / "poses.csv").string());
  result.artifacts.push_back((out / "poses.json").string());
  if (cfg.trace) {
    fs::create_directories(out / "fields");
    for (size_t i = 0; i < bundle.fields.size(); ++i) {
      const std::string p = (out / "fields" / (bundle.masks[i].id + ".sfld")).string();
      field::write_sfld(p, bundle.fields[i]);
      result.artifacts.push_back(p);
    }
  }

  calib::FrameCalibration cal;
  if (!cfg.calibration_path.empty()) {
    try {
      cal = calib::load_calibration(cfg.calibration_path);
    } catch (const std::exception& e) {
      result.errors.push_back({"calibration", std::string(e.what())});
      return result;
    }
  }
  route::TourGraph graph;
  route::Tour tour;
  try {
    graph = route::build_graph(sets, cal, cfg.home_x_mm, cfg.home_y_mm);
    tour = plan_route(graph, cfg);
  } catch (const std::exception& e) {
    result.errors.push_back({"plan", std::string(e.what())});
    return result;
  }
  result.tour_nodes = static_cast<int>(tour.order.size());
  result.tour_length_mm = tour.length_mm;
  route::write_tour_csv((out / "tour.csv").string(), graph, tour);
  result.artifacts.push_back((out / "tour.csv").string());

  try {
    const GcodeProgram prog = emit_gcode(graph, tour, cfg.gcode, cfg.probe);
    write_gcode((out / "program.gcode").string(), prog);
    result.artifacts.push_back((out / "program.gcode").string());
  } catch (const std::exception& e) {
    result.errors.push_back({"gcode", std::string(e.what())});
    return result;
  }

  if (cfg.synth_iv || !cfg.iv_dir.empty()) {
    analyze_stage(cfg, bundle, sets, result);
  }

  result.ok = result.errors.empty();
  return result;
}

PipelineResult run_analysis(const PipelineConfig& cfg) {
  PipelineResult result;
  const fs::path out(cfg.out_dir);
  const std::string poses_path = (out / "poses.json").string();
  if (!fs::exists(poses_path)) {
    result.errors.push_back({"analyze", "missing " + poses_path + " (run `poses` first)"});
    return result;
  }
  if (!cfg.synth_iv && cfg.iv_dir.empty()) {
    result.errors.push_back({"analyze", "no IV source: set iv.dir or iv.synth"});
    return result;
  }
  MaskBundle bundle = load_masks(cfg);
  for (const auto& e : bundle.errors) result.errors.push_back({"masks", e});
  const auto sets = optim::read_pose_sets_json(poses_path);
  analyze_stage(cfg, bundle, sets, result);
  result.ok = result.errors.empty();
  return result;
}

}  // namespace probemap::pipeline
