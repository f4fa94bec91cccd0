#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace probemap::calib {

/// Residual correction field measured after homography rectification:
/// barycentric interpolation over a Delaunay triangulation of the anchors,
/// nearest-anchor residual outside the convex hull. Anchors are keyed by
/// image-plane coordinates; residuals are robot-frame millimeters.
class CorrectionMesh {
 public:
  struct Anchor {
    double u = 0.0, v = 0.0;       // image-plane coordinate
    double dx_mm = 0.0, dy_mm = 0.0;
  };

  CorrectionMesh() = default;
  explicit CorrectionMesh(std::vector<Anchor> anchors);

  bool empty() const { return anchors_.empty(); }
  const std::vector<Anchor>& anchors() const { return anchors_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }

  std::array<double, 2> residual_at(double u, double v) const;

 private:
  std::vector<Anchor> anchors_;
  std::vector<std::array<int, 3>> triangles_;
};

/// Camera -> image -> robot rectification chain plus the residual mesh.
struct FrameCalibration {
  Eigen::Matrix3d K_cam_img = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d K_img_robot = Eigen::Matrix3d::Identity();
  CorrectionMesh mesh;
  int calib_version = 1;
};

struct EffectorGeometry {
  double arm_length_mm = 0.0;  // R0: pivot to contact point, must be > 0
};

/// Applies one homography with homogeneous normalization. Throws on a
/// degenerate result (w ~ 0).
std::array<double, 2> apply_homography(const Eigen::Matrix3d& k, double x, double y);

/// Full rectification of a camera-frame point into robot-frame millimeters:
/// K_img_robot (K_cam_img p), normalized after each product, then the mesh
/// residual (looked up at the intermediate image coordinate) added.
std::array<double, 2> rectify(const FrameCalibration& cal, double x_cam, double y_cam);

/// Image-plane point (mm) to robot frame: K_img_robot plus mesh residual.
std::array<double, 2> image_to_robot(const FrameCalibration& cal, double x_img, double y_img);

/// Normalized DLT homography fit from >= 4 correspondences (exact for 4 in
/// general position, least-squares beyond). Throws on degenerate input.
Eigen::Matrix3d fit_homography(
    std::span<const std::array<double, 2>> src,
    std::span<const std::array<double, 2>> dst);

/// Builds the residual mesh from measured (image point, residual mm) pairs.
CorrectionMesh build_mesh(std::span<const CorrectionMesh::Anchor> anchors);

/// Single-pivot geometric transfer: carriage target (x_t, y_t, theta_t) that
/// lands the arm's contact point on (x0, y0) at theta0. Angles in degrees at
/// this boundary, matching the rig convention.
std::array<double, 3> effector_target(double x0, double y0, double theta0_deg,
                                      const EffectorGeometry& geom);

/// Side-LED distance that equalizes illumination intensity:
/// d2 = d3 = sqrt(d1^2 - D^2). Throws if d1 <= D.
double led_spacing(double d1_mm, double led_gap_mm);

FrameCalibration load_calibration(const std::string& path);
void save_calibration(const std::string& path, const FrameCalibration& cal);

/// Checks both homographies are invertible and the chain round-trips.
bool calibration_valid(const FrameCalibration& cal);

}  // namespace probemap::calib
