#include "probemap/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace probemap::calib {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Circumcircle {
  double cx, cy, r2;
  bool valid;
};

Circumcircle circumcircle(const CorrectionMesh::Anchor& a, const CorrectionMesh::Anchor& b,
                          const CorrectionMesh::Anchor& c) {
  const double d = 2.0 * (a.u * (b.v - c.v) + b.u * (c.v - a.v) + c.u * (a.v - b.v));
  if (std::abs(d) < 1e-12) return {0, 0, 0, false};
  const double a2 = a.u * a.u + a.v * a.v;
  const double b2 = b.u * b.u + b.v * b.v;
  const double c2 = c.u * c.u + c.v * c.v;
  const double cx = (a2 * (b.v - c.v) + b2 * (c.v - a.v) + c2 * (a.v - b.v)) / d;
  const double cy = (a2 * (c.u - b.u) + b2 * (a.u - c.u) + c2 * (b.u - a.u)) / d;
  const double dx = a.u - cx, dy = a.v - cy;
  return {cx, cy, dx * dx + dy * dy, true};
}

std::array<double, 3> barycentric(const CorrectionMesh::Anchor& p0,
                                  const CorrectionMesh::Anchor& p1,
                                  const CorrectionMesh::Anchor& p2, double u, double v) {
  const double det = (p1.v - p2.v) * (p0.u - p2.u) + (p2.u - p1.u) * (p0.v - p2.v);
  if (std::abs(det) < 1e-15) return {-1, -1, -1};
  const double l0 = ((p1.v - p2.v) * (u - p2.u) + (p2.u - p1.u) * (v - p2.v)) / det;
  const double l1 = ((p2.v - p0.v) * (u - p2.u) + (p0.u - p2.u) * (v - p2.v)) / det;
  return {l0, l1, 1.0 - l0 - l1};
}

// Bowyer-Watson over the anchor cloud. Anchor counts here are tiny (~15),
// so the O(n^2) insertion is fine and doubles are robust enough.
std::vector<std::array<int, 3>> delaunay(const std::vector<CorrectionMesh::Anchor>& pts) {
  const int n = static_cast<int>(pts.size());
  double lo_u = 1e300, hi_u = -1e300, lo_v = 1e300, hi_v = -1e300;
  for (const auto& p : pts) {
    lo_u = std::min(lo_u, p.u);
    hi_u = std::max(hi_u, p.u);
    lo_v = std::min(lo_v, p.v);
    hi_v = std::max(hi_v, p.v);
  }
  const double span = std::max({hi_u - lo_u, hi_v - lo_v, 1.0});
  const double mu = 0.5 * (lo_u + hi_u), mv = 0.5 * (lo_v + hi_v);

  std::vector<CorrectionMesh::Anchor> work = pts;
  work.push_back({mu - 30.0 * span, mv - 10.0 * span, 0, 0});
  work.push_back({mu + 30.0 * span, mv - 10.0 * span, 0, 0});
  work.push_back({mu, mv + 30.0 * span, 0, 0});

  std::vector<std::array<int, 3>> tris = {{n, n + 1, n + 2}};
  for (int i = 0; i < n; ++i) {
    std::vector<std::array<int, 2>> boundary;
    std::vector<std::array<int, 3>> keep;
    for (const auto& t : tris) {
      const auto cc = circumcircle(work[static_cast<size_t>(t[0])], work[static_cast<size_t>(t[1])],
                                   work[static_cast<size_t>(t[2])]);
      const double dx = pts[static_cast<size_t>(i)].u - cc.cx;
      const double dy = pts[static_cast<size_t>(i)].v - cc.cy;
      if (cc.valid && dx * dx + dy * dy <= cc.r2 * (1.0 + 1e-12)) {
        for (int e = 0; e < 3; ++e) {
          boundary.push_back({t[static_cast<size_t>(e)], t[static_cast<size_t>((e + 1) % 3)]});
        }
      } else {
        keep.push_back(t);
      }
    }
    // Edges appearing twice are interior to the cavity; drop both copies.
    std::vector<std::array<int, 2>> hull;
    for (const auto& e : boundary) {
      bool dup = false;
      for (const auto& o : boundary) {
        if (e[0] == o[1] && e[1] == o[0]) {
          dup = true;
          break;
        }
      }
      if (!dup) hull.push_back(e);
    }
    tris = std::move(keep);
    for (const auto& e : hull) tris.push_back({e[0], e[1], i});
  }
  std::vector<std::array<int, 3>> out;
  for (const auto& t : tris) {
    if (t[0] < n && t[1] < n && t[2] < n) out.push_back(t);
  }
  return out;
}

nlohmann::json matrix_json(const Eigen::Matrix3d& m) {
  nlohmann::json j = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) j.push_back(m(r, c));
  }
  return j;
}

Eigen::Matrix3d matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 9) throw std::runtime_error("calibration: matrix must have 9 entries");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = j[static_cast<size_t>(r * 3 + c)].get<double>();
  }
  return m;
}

}  // namespace

CorrectionMesh::CorrectionMesh(std::vector<Anchor> anchors) : anchors_(std::move(anchors)) {
  if (anchors_.size() < 4) throw std::invalid_argument("correction mesh needs >= 4 anchors");
  triangles_ = delaunay(anchors_);
  if (triangles_.empty()) throw std::invalid_argument("correction mesh anchors are collinear");
}

std::array<double, 2> CorrectionMesh::residual_at(double u, double v) const {
  if (anchors_.empty()) return {0.0, 0.0};
  for (const auto& t : triangles_) {
    const auto& p0 = anchors_[static_cast<size_t>(t[0])];
    const auto& p1 = anchors_[static_cast<size_t>(t[1])];
    const auto& p2 = anchors_[static_cast<size_t>(t[2])];
    const auto l = barycentric(p0, p1, p2, u, v);
    if (l[0] >= -1e-9 && l[1] >= -1e-9 && l[2] >= -1e-9) {
      return {l[0] * p0.dx_mm + l[1] * p1.dx_mm + l[2] * p2.dx_mm,
              l[0] * p0.dy_mm + l[1] * p1.dy_mm + l[2] * p2.dy_mm};
    }
  }
  // Outside the hull: nearest anchor's residual (lowest index on ties).
  size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < anchors_.size(); ++i) {
    const double dx = anchors_[i].u - u, dy = anchors_[i].v - v;
    const double d = dx * dx + dy * dy;
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return {anchors_[best].dx_mm, anchors_[best].dy_mm};
}

std::array<double, 2> apply_homography(const Eigen::Matrix3d& k, double x, double y) {
  const Eigen::Vector3d v = k * Eigen::Vector3d(x, y, 1.0);
  if (std::abs(v.z()) < 1e-12) {
    throw std::runtime_error("homography: point maps to the plane at infinity");
  }
  return {v.x() / v.z(), v.y() / v.z()};
}

std::array<double, 2> rectify(const FrameCalibration& cal, double x_cam, double y_cam) {
  const auto img = apply_homography(cal.K_cam_img, x_cam, y_cam);
  return image_to_robot(cal, img[0], img[1]);
}

std::array<double, 2> image_to_robot(const FrameCalibration& cal, double x_img, double y_img) {
  auto robot = apply_homography(cal.K_img_robot, x_img, y_img);
  if (!cal.mesh.empty()) {
    const auto res = cal.mesh.residual_at(x_img, y_img);
    robot[0] += res[0];
    robot[1] += res[1];
  }
  return robot;
}

Eigen::Matrix3d fit_homography(std::span<const std::array<double, 2>> src,
                               std::span<const std::array<double, 2>> dst) {
  if (src.size() != dst.size() || src.size() < 4) {
    throw std::invalid_argument("fit_homography: need >= 4 correspondences");
  }
  const size_t n = src.size();

  // Hartley normalization: centroid to origin, mean radius sqrt(2).
  auto normalizer = [](std::span<const std::array<double, 2>> pts) {
    double cx = 0, cy = 0;
    for (const auto& p : pts) {
      cx += p[0];
      cy += p[1];
    }
    cx /= static_cast<double>(pts.size());
    cy /= static_cast<double>(pts.size());
    double mean_r = 0;
    for (const auto& p : pts) mean_r += std::hypot(p[0] - cx, p[1] - cy);
    mean_r /= static_cast<double>(pts.size());
    const double s = mean_r > 1e-12 ? std::sqrt(2.0) / mean_r : 1.0;
    Eigen::Matrix3d t;
    t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
    return t;
  };
  const Eigen::Matrix3d ts = normalizer(src);
  const Eigen::Matrix3d td = normalizer(dst);

  Eigen::MatrixXd a(2 * n, 9);
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d p = ts * Eigen::Vector3d(src[i][0], src[i][1], 1.0);
    const Eigen::Vector3d q = td * Eigen::Vector3d(dst[i][0], dst[i][1], 1.0);
    const double x = p.x(), y = p.y(), u = q.x(), v = q.y();
    a.row(static_cast<Eigen::Index>(2 * i)) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(static_cast<Eigen::Index>(2 * i + 1)) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  if (svd.rank() < 8) throw std::invalid_argument("fit_homography: degenerate configuration");
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Eigen::Matrix3d out = td.inverse() * hn * ts;
  if (std::abs(out(2, 2)) > 1e-12) out /= out(2, 2);
  return out;
}

CorrectionMesh build_mesh(std::span<const CorrectionMesh::Anchor> anchors) {
  return CorrectionMesh(std::vector<CorrectionMesh::Anchor>(anchors.begin(), anchors.end()));
}

std::array<double, 3> effector_target(double x0, double y0, double theta0_deg,
                                      const EffectorGeometry& geom) {
  if (geom.arm_length_mm <= 0.0) {
    throw std::invalid_argument("effector_target: arm length R0 must be > 0");
  }
  const double r0 = geom.arm_length_mm;
  const double a = (90.0 - theta0_deg) * kPi / 180.0;
  return {x0 - r0 * std::cos(a), y0 - r0 + r0 * std::sin(a), theta0_deg};
}

double led_spacing(double d1_mm, double led_gap_mm) {
  if (led_gap_mm < 0.0) throw std::invalid_argument("led_spacing: D must be >= 0");
  if (d1_mm <= led_gap_mm) throw std::invalid_argument("led_spacing: need d1 > D");
  return std::sqrt(d1_mm * d1_mm - led_gap_mm * led_gap_mm);
}

FrameCalibration load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open calibration file: " + path);
  nlohmann::json j;
  in >> j;
  FrameCalibration cal;
  cal.calib_version = j.value("calib_version", 1);
  cal.K_cam_img = matrix_from_json(j.at("K_cam_img"));
  cal.K_img_robot = matrix_from_json(j.at("K_img_robot"));
  if (j.contains("mesh_anchors") && !j["mesh_anchors"].empty()) {
    std::vector<CorrectionMesh::Anchor> anchors;
    for (const auto& ja : j["mesh_anchors"]) {
      anchors.push_back({ja.at("image_xy")[0].get<double>(), ja.at("image_xy")[1].get<double>(),
                         ja.at("residual_mm")[0].get<double>(),
                         ja.at("residual_mm")[1].get<double>()});
    }
    cal.mesh = CorrectionMesh(std::move(anchors));
  }
  if (!calibration_valid(cal)) throw std::runtime_error("calibration matrices not invertible: " + path);
  return cal;
}

void save_calibration(const std::string& path, const FrameCalibration& cal) {
  nlohmann::json j;
  j["calib_version"] = cal.calib_version;
  j["K_cam_img"] = matrix_json(cal.K_cam_img);
  j["K_img_robot"] = matrix_json(cal.K_img_robot);
  auto& anchors = j["mesh_anchors"] = nlohmann::json::array();
  for (const auto& a : cal.mesh.anchors()) {
    anchors.push_back({{"image_xy", {a.u, a.v}}, {"residual_mm", {a.dx_mm, a.dy_mm}}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write calibration file: " + path);
  out << j.dump(2) << '\n';
}

bool calibration_valid(const FrameCalibration& cal) {
  if (std::abs(cal.K_cam_img.determinant()) <= 1e-9) return false;
  if (std::abs(cal.K_img_robot.determinant()) <= 1e-9) return false;
  return true;
}

}  // namespace probemap::calib
