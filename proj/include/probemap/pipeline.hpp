#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "probemap/calibration.hpp"
#include "probemap/measurement.hpp"
#include "probemap/pose_loss.hpp"
#include "probemap/pose_optimizer.hpp"
#include "probemap/route_planner.hpp"

namespace probemap::pipeline {

struct ProbeConfig {
  int tip_count = 4;
  double tip_spacing_px = 10.0;
  double tip_radius_px = 2.5;
  /// Pivot-to-contact arm length for the rotary transfer function. 0 means
  /// the contact point sits on the carriage axis and no transfer is applied;
  /// with a nonzero arm the emitted XY words are carriage targets, which
  /// travel farther than the contact tour.
  double arm_length_mm = 0.0;
};

struct GcodeConfig {
  double safe_z_mm = 10.0;
  double plunge_z_mm = 0.0;
  double travel_feed_mm_min = 3000.0;
  double plunge_feed_mm_min = 300.0;
  double dwell_s = 5.0;          // measurement window per contact
  std::string rotary_word = "A";  // Marlin axis word for the yaw motor
  double env_x_min = 0.0, env_x_max = 300.0;
  double env_y_min = 0.0, env_y_max = 300.0;
  double env_z_min = -1.0, env_z_max = 50.0;
};

struct PipelineConfig {
  int config_version = 1;
  std::string mask_glob;          // e.g. "masks/*.pgm"
  double scale_mm_per_px = 0.2;
  double sigma_px = 3.0;
  loss::LossWeights weights;
  optim::OptimizerConfig optimizer;  // footprint is filled from `probe`
  route::PlannerConfig planner;
  std::string planner_algorithm = "noisy_dijkstra";
  route::GaConfig ga;
  std::string calibration_path;   // empty -> identity calibration
  ProbeConfig probe;
  GcodeConfig gcode;
  std::string iv_dir;             // campaign layout <segment>/<pose>.csv
  bool synth_iv = false;          // synthesize IV data for valid poses
  std::string out_dir = "out";
  uint64_t seed = 0;
  double home_x_mm = 0.0;
  double home_y_mm = 0.0;
  bool trace = false;
};

struct Diagnostic {
  std::string field;
  std::string message;
};

PipelineConfig load_config(const std::string& path);
void save_config(const std::string& path, const PipelineConfig& cfg);

/// Schema and range checks without touching any state; returns one
/// diagnostic per problem (empty means the config is runnable).
std::vector<Diagnostic> validate_config(const std::string& path);
std::vector<Diagnostic> validate_config(const PipelineConfig& cfg);

struct GcodeProgram {
  std::vector<std::string> lines;
  int contact_cycles = 0;
  std::string text() const;
};

/// Marlin-compatible program: G21/G90 header, then per waypoint a safe-Z
/// rapid, rotary align, plunge, M400 sync + ";PROBE segment pose" marker,
/// dwell, retract. Throws if any emitted coordinate leaves the work
/// envelope.
GcodeProgram emit_gcode(const route::TourGraph& graph, const route::Tour& tour,
                        const GcodeConfig& gc, const ProbeConfig& probe);

void write_gcode(const std::string& path, const GcodeProgram& prog);

/// Independent safety check of an emitted program: parses the text, tracks
/// machine state, flags lateral motion below the safe height, and sums XY
/// travel.
struct GcodeCheck {
  bool safe = true;
  double total_xy_travel_mm = 0.0;
  int contact_cycles = 0;
  std::vector<std::string> violations;
};
GcodeCheck check_gcode(const std::string& text, double safe_z_mm);

struct StageError {
  std::string stage;
  std::string message;
};

struct PipelineResult {
  bool ok = false;
  std::vector<std::string> artifacts;  // paths written
  std::vector<StageError> errors;
  int masks_loaded = 0;
  int valid_pose_sets = 0;
  int tour_nodes = 0;
  double tour_length_mm = 0.0;
  int measurements = 0;
};

/// masks -> fields -> poses -> route -> G-code -> (optional) analysis.
/// Deterministic for a fixed config and seed; artifacts land in
/// cfg.out_dir.
PipelineResult run_pipeline(const PipelineConfig& cfg);

// Individual stages, shared by run_pipeline and the CLI subcommands.

struct MaskBundle {
  std::vector<field::SegmentMask> masks;
  std::vector<field::ScalarField> fields;
  std::vector<std::string> errors;
};

/// Loads every mask matching cfg.mask_glob (an optional "<mask>.json"
/// sidecar places the crop in the image plane) and smooths it.
MaskBundle load_masks(const PipelineConfig& cfg);

/// Pose optimization over a mask bundle; segment ids and placement come
/// from the masks.
std::vector<optim::PoseSet> compute_poses(const PipelineConfig& cfg, const MaskBundle& bundle);

/// Runs the configured planner on a built graph.
route::Tour plan_route(const route::TourGraph& graph, const PipelineConfig& cfg);

/// Measurement stage alone: consumes cfg.out_dir/poses.json plus the mask
/// files, reading IV sweeps from cfg.iv_dir (or synthesizing them) and
/// writing measurements.csv, summary.csv, and per-segment map rasters.
PipelineResult run_analysis(const PipelineConfig& cfg);

/// Sorted paths matching a glob pattern ('*' and '?' in the basename).
std::vector<std::string> glob_paths(const std::string& pattern);

}  // namespace probemap::pipeline
