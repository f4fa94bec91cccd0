// probemap: batch CLI for the contact-measurement pipeline.
//
// Subcommands mirror the pipeline stages: `poses` (masks -> contact poses),
// `plan` (poses -> route), `gcode` (route -> Marlin program), `analyze`
// (IV sweeps -> photoconductance + maps), `bench` (planner comparison), and
// `run` (everything). `validate` checks a config without running anything.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "probemap/pipeline.hpp"
#include "probemap/rng.hpp"

namespace fs = std::filesystem;
using namespace probemap;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_override;
  uint64_t seed_override = 0;
  bool seed_set = false;
  bool trace = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "pipeline config JSON")->required();
  cmd->add_option("--out", opts.out_override, "override output directory");
  cmd->add_option("--seed", opts.seed_override, "override the config seed")
      ->each([&](const std::string&) { opts.seed_set = true; });
  cmd->add_flag("--trace", opts.trace, "emit per-stage debug artifacts");
}

pipeline::PipelineConfig load(const CommonOpts& opts) {
  pipeline::PipelineConfig cfg = pipeline::load_config(opts.config_path);
  if (!opts.out_override.empty()) cfg.out_dir = opts.out_override;
  if (opts.seed_set) cfg.seed = opts.seed_override;
  if (opts.trace) cfg.trace = true;
  return cfg;
}

int report(const pipeline::PipelineResult& result) {
  for (const auto& e : result.errors) {
    std::cerr << "[" << e.stage << "] " << e.message << "\n";
  }
  for (const auto& a : result.artifacts) {
    std::cout << "wrote " << a << "\n";
  }
  return result.ok ? 0 : 1;
}

int cmd_validate(const CommonOpts& opts) {
  const auto diags = pipeline::validate_config(opts.config_path);
  for (const auto& d : diags) {
    std::cout << d.field << ": " << d.message << "\n";
  }
  if (diags.empty()) std::cout << "config ok\n";
  return diags.empty() ? 0 : 1;
}

int cmd_poses(const CommonOpts& opts) {
  const auto cfg = load(opts);
  const auto diags = pipeline::validate_config(cfg);
  if (!diags.empty()) {
    for (const auto& d : diags) std::cerr << d.field << ": " << d.message << "\n";
    return 1;
  }
  fs::create_directories(cfg.out_dir);
  auto bundle = pipeline::load_masks(cfg);
  for (const auto& e : bundle.errors) std::cerr << "[masks] " << e << "\n";
  if (bundle.masks.empty()) {
    std::cerr << "no usable masks\n";
    return 1;
  }
  const auto sets = pipeline::compute_poses(cfg, bundle);
  int valid = 0;
  for (const auto& s : sets) valid += s.valid ? 1 : 0;
  const fs::path out(cfg.out_dir);
  optim::write_pose_sets_csv((out / "poses.csv").string(), sets);
  optim::write_pose_sets_json((out / "poses.json").string(), sets);
  if (cfg.trace) {
    fs::create_directories(out / "fields");
    for (size_t i = 0; i < bundle.fields.size(); ++i) {
      field::write_sfld((out / "fields" / (bundle.masks[i].id + ".sfld")).string(),
                        bundle.fields[i]);
    }
    for (const auto& s : sets) {
      if (!s.loss_trace.empty()) {
        std::cout << s.segment_id << " trace: " << loss::report_json(s.final_loss) << "\n";
      }
    }
  }
  std::cout << "segments=" << sets.size() << " valid_sets=" << valid << "\n";
  std::cout << "wrote " << (out / "poses.csv").string() << "\n";
  std::cout << "wrote " << (out / "poses.json").string() << "\n";
  return 0;
}

int cmd_plan(const CommonOpts& opts) {
  const auto cfg = load(opts);
  const fs::path out(cfg.out_dir);
  const std::string poses_path = (out / "poses.json").string();
  if (!fs::exists(poses_path)) {
    std::cerr << "missing " << poses_path << " (run `poses` first)\n";
    return 1;
  }
  const auto sets = optim::read_pose_sets_json(poses_path);
  calib::FrameCalibration cal;
  if (!cfg.calibration_path.empty()) cal = calib::load_calibration(cfg.calibration_path);
  const auto graph = route::build_graph(sets, cal, cfg.home_x_mm, cfg.home_y_mm);
  const auto tour = pipeline::plan_route(graph, cfg);
  route::write_tour_csv((out / "tour.csv").string(), graph, tour);
  std::cout << "algorithm=" << tour.algorithm << " nodes=" << tour.order.size()
            << " length_mm=" << tour.length_mm << "\n";
  std::cout << "wrote " << (out / "tour.csv").string() << "\n";
  return 0;
}

int cmd_gcode(const CommonOpts& opts) {
  const auto cfg = load(opts);
  const fs::path out(cfg.out_dir);
  const std::string tour_path = (out / "tour.csv").string();
  if (!fs::exists(tour_path)) {
    std::cerr << "missing " << tour_path << " (run `plan` first)\n";
    return 1;
  }
  const auto [graph, tour] = route::read_tour_csv(tour_path);
  const auto prog = pipeline::emit_gcode(graph, tour, cfg.gcode, cfg.probe);
  pipeline::write_gcode((out / "program.gcode").string(), prog);
  std::cout << "contact_cycles=" << prog.contact_cycles << "\n";
  std::cout << "wrote " << (out / "program.gcode").string() << "\n";
  return 0;
}

int cmd_analyze(const CommonOpts& opts) {
  const auto cfg = load(opts);
  return report(pipeline::run_analysis(cfg));
}

int cmd_run(const CommonOpts& opts) {
  const auto cfg = load(opts);
  const auto result = pipeline::run_pipeline(cfg);
  std::cout << "masks=" << result.masks_loaded << " valid_sets=" << result.valid_pose_sets
            << " tour_nodes=" << result.tour_nodes << " tour_mm=" << result.tour_length_mm
            << " measurements=" << result.measurements << "\n";
  return report(result);
}

struct BenchOpts {
  int graphs = 115;
  int clusters = 35;
  int per_cluster = 3;
  double width_mm = 100.0;
  double height_mm = 150.0;
  uint64_t seed = 1;
  double alpha = 0.02;
  int generations = 1000;
  std::vector<std::string> algorithms;
  std::string out_csv = "benchmark.csv";
};

int cmd_bench(const BenchOpts& b) {
  std::vector<route::TourGraph> graphs;
  graphs.reserve(static_cast<size_t>(b.graphs));
  for (int i = 0; i < b.graphs; ++i) {
    graphs.push_back(route::random_clustered_graph(
        b.clusters, b.per_cluster, b.width_mm, b.height_mm, mix_seed(b.seed, i)));
  }
  std::vector<std::string> algos = b.algorithms;
  if (algos.empty()) {
    algos = {"greedy_dijkstra", "noisy_dijkstra", "christofides", "astar", "ga"};
  }
  route::PlannerConfig noisy{b.alpha, b.generations, b.seed};
  route::GaConfig ga;
  ga.seed = b.seed;
  const auto table = route::benchmark(graphs, noisy, ga, algos);
  table.write_csv(b.out_csv);
  std::printf("%-18s %12s %14s %10s\n", "algorithm", "median_mm", "variance_mm2", "wall_ms");
  for (const auto& s : table.summarize()) {
    std::printf("%-18s %12.2f %14.2f %10.2f\n", s.algorithm.c_str(), s.median_mm,
                s.variance_mm2, s.mean_wall_ms);
  }
  std::cout << "wrote " << b.out_csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"autonomous contact-measurement pipeline"};
  app.require_subcommand(1);

  CommonOpts validate_opts, poses_opts, plan_opts, gcode_opts, analyze_opts, run_opts;
  BenchOpts bench_opts;

  auto* validate = app.add_subcommand("validate", "check a config file");
  validate->add_option("--config", validate_opts.config_path, "pipeline config JSON")->required();

  add_common(app.add_subcommand("poses", "predict contact poses from masks"), poses_opts);
  add_common(app.add_subcommand("plan", "plan a route over predicted poses"), plan_opts);
  add_common(app.add_subcommand("gcode", "emit the Marlin program for a tour"), gcode_opts);
  add_common(app.add_subcommand("analyze", "photoconductance analysis + maps"), analyze_opts);
  add_common(app.add_subcommand("run", "full pipeline"), run_opts);

  auto* bench = app.add_subcommand("bench", "compare planners on clustered graphs");
  bench->add_option("--graphs", bench_opts.graphs, "number of random graphs");
  bench->add_option("--clusters", bench_opts.clusters, "film clusters per graph");
  bench->add_option("--per-cluster", bench_opts.per_cluster, "poses per cluster");
  bench->add_option("--width", bench_opts.width_mm, "plane width (mm)");
  bench->add_option("--height", bench_opts.height_mm, "plane height (mm)");
  bench->add_option("--seed", bench_opts.seed, "benchmark seed");
  bench->add_option("--alpha", bench_opts.alpha, "noisy Dijkstra noise level");
  bench->add_option("--generations", bench_opts.generations, "noisy Dijkstra generations");
  bench->add_option("--algorithms", bench_opts.algorithms,
                    "subset of: greedy_dijkstra noisy_dijkstra christofides astar ga");
  bench->add_option("--out", bench_opts.out_csv, "benchmark CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("validate")) return cmd_validate(validate_opts);
    if (app.got_subcommand("poses")) return cmd_poses(poses_opts);
    if (app.got_subcommand("plan")) return cmd_plan(plan_opts);
    if (app.got_subcommand("gcode")) return cmd_gcode(gcode_opts);
    if (app.got_subcommand("analyze")) return cmd_analyze(analyze_opts);
    if (app.got_subcommand("run")) return cmd_run(run_opts);
    if (app.got_subcommand("bench")) return cmd_bench(bench_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
