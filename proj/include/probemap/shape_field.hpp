#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace probemap::field {

/// Binary film segment with its placement in the image-plane millimeter
/// frame (pixel (0,0) sits at origin_mm, pitch scale_mm_per_px).
struct SegmentMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;  // row-major, 1 = film, 0 = background
  std::string id;
  double origin_mm_x = 0.0;
  double origin_mm_y = 0.0;
  double scale_mm_per_px = 1.0;

  bool at(int x, int y) const { return data[static_cast<size_t>(y) * width + x] != 0; }
  size_t set_count() const;
};

/// Smooth scalar field over the mask grid. `values` are max-normalized to
/// [0,1]; `raw_max` records the pre-normalization maximum so the absolute
/// Gaussian scale stays recoverable (raw value = values[i] * raw_max).
struct ScalarField {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  double sigma = 0.0;
  double raw_max = 1.0;

  double at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }

  /// Bilinear sample at a continuous pixel coordinate, clamped to the grid.
  double sample(double x, double y) const;
};

/// Contact line of the probe: `tip_count` tips spaced `tip_spacing_px`
/// along a line through the pose center; each tip renders as an isotropic
/// Gaussian of std-dev `tip_radius_px`.
struct ProbeFootprint {
  int tip_count = 4;
  double tip_spacing_px = 10.0;
  double tip_radius_px = 2.5;
};

/// Contact pose. theta is normalized to [0, pi): a contact line is
/// symmetric under 180-degree rotation.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  ProbeFootprint footprint;
};

/// Maps any angle to the canonical [0, pi) range.
double normalize_theta(double theta);

/// Loads an 8-bit grayscale PGM (P5/P2) or PNG raster; nonzero pixels become
/// the segment. Throws std::runtime_error on unreadable files, non-grayscale
/// input, or an empty mask.
SegmentMask load_mask(const std::string& path, double scale_mm_per_px);

/// Whether PNG ingestion was compiled in.
bool png_supported();

/// Gaussian-smooths a mask: discrete convolution with the normalized 2D
/// Gaussian kernel truncated at +/-4 sigma, then max-normalized to [0,1].
/// Throws std::invalid_argument for sigma <= 0.
ScalarField smooth(const SegmentMask& mask, double sigma);

/// Exact tip coordinates: the canonical centered tip layout rotated by theta
/// about (x, y).
std::vector<std::array<double, 2>> tip_positions(const Pose& pose);

/// Soft footprint intensity at one point with analytic partials w.r.t. the
/// pose parameters. value = S(sum of per-tip Gaussians) where S is the
/// steepness-kappa sigmoid soft threshold rescaled to span exactly [0,1].
struct FootprintSample {
  double value = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
};
FootprintSample footprint_at(const Pose& pose, double px, double py,
                             double sigma, double steepness);

/// Total mass (grid sum) of the soft footprint on an unbounded plane;
/// translation- and rotation-invariant, used to normalize coverage.
double footprint_reference_mass(const ProbeFootprint& fp, double sigma,
                                double steepness);

/// Renders the soft footprint of a pose onto a width x height grid.
/// Values are in [0,1]; tips may fall outside the grid (validity checking
/// flags that downstream).
ScalarField render_footprint(const Pose& pose, int width, int height,
                             double sigma, double steepness = 10.0);

/// Radius beyond which a tip's contribution to the soft footprint is
/// negligible (< ~1e-14); used to bound summation windows.
double footprint_cutoff_radius(const ProbeFootprint& fp, double sigma);

// Debug field raster: 16-byte header (magic "SFLD", u32 width, u32 height,
// f32 sigma, little-endian) followed by row-major f32 values.
void write_sfld(const std::string& path, const ScalarField& f);
ScalarField read_sfld(const std::string& path);

}  // namespace probemap::field
