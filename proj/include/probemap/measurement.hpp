#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "probemap/shape_field.hpp"

namespace probemap::measure {

/// Paired light/dark current-voltage sweeps at one contact pose.
struct IVRecord {
  std::vector<double> voltages;       // strictly monotonic, >= 2 points
  std::vector<double> current_light;  // amps
  std::vector<double> current_dark;
  std::string segment_id;
  int pose_index = -1;
};

struct PhotoFit {
  double g_ph = 0.0;  // siemens
  double r2 = 0.0;
};

/// Photoconductance: least-squares slope of (I_light - I_dark) against V.
/// The intercept is fitted and discarded by default (absorbs instrument
/// offsets); zero_intercept forces the line through the origin.
PhotoFit photoconductance(const IVRecord& rec, bool zero_intercept = false);

struct MeasurementRecord {
  std::string segment_id;
  field::Pose pose;
  double g_ph = 0.0;
  double fit_r2 = 0.0;
  double composition_x = 0.0;  // Br -> I fraction, metadata
};

struct SynthOptions {
  int points = 40;
  double v_min = -40.0;
  double v_max = 40.0;
  double noise_frac = 0.01;  // Gaussian noise sigma as a fraction of the
                             // true photocurrent range (max - min)
};

/// True photoconductance of the synthetic film model, strictly increasing
/// in composition and linear in pose quality:
///   G(x, q) = q * (1 + 49 x^2) nS.
double synth_true_gph(double composition_x, double pose_quality);

/// Synthetic light/dark IV sweep with documented ground truth (see
/// synth_true_gph); pose_quality 0 gives a dead region (light == dark).
IVRecord synth_iv(double composition_x, double pose_quality, uint64_t seed,
                  const SynthOptions& opt = {});

/// Gaussian-interpolated property raster over the mask's grid
/// (Nadaraya-Watson weights); background cells are NaN.
struct SpatialMap {
  int width = 0;
  int height = 0;
  std::vector<double> grid;
  double bandwidth_px = 0.0;
};

SpatialMap spatial_map(std::span<const std::pair<field::Pose, double>> samples,
                       const field::SegmentMask& mask, double bandwidth_px);

/// Per-composition median/spread/count over a measurement campaign.
struct CompositionStats {
  double composition_x = 0.0;
  int count = 0;
  double median = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
};

std::vector<CompositionStats> campaign_summary(std::span<const MeasurementRecord> records);

// CSV I/O. Per-pose sweep files hold "voltage,current_light,current_dark"
// rows; campaign layout is <dir>/<segment_id>/<pose_index>.csv.
IVRecord read_iv_csv(const std::string& path);
void write_iv_csv(const std::string& path, const IVRecord& rec);
void write_records_csv(const std::string& path, std::span<const MeasurementRecord> records);
void write_summary_csv(const std::string& path, std::span<const CompositionStats> stats);

}  // namespace probemap::measure
