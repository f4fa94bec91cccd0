#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <vector>

#include "probemap/calibration.hpp"
#include "probemap/rng.hpp"
#include "support/oracles.hpp"

using namespace probemap;

namespace {

Eigen::Matrix3d random_homography(Rng& rng) {
  Eigen::Matrix3d h;
  h << rng.uniform(0.8, 1.2), rng.uniform(-0.1, 0.1), rng.uniform(-5.0, 5.0),
      rng.uniform(-0.1, 0.1), rng.uniform(0.8, 1.2), rng.uniform(-5.0, 5.0),
      rng.uniform(-1e-4, 1e-4), rng.uniform(-1e-4, 1e-4), 1.0;
  return h;
}

}  // namespace

TEST_CASE("rectify: identity calibration is the identity") {
  const calib::FrameCalibration cal;
  const auto p = calib::rectify(cal, 12.5, -3.75);
  CHECK(p[0] == doctest::Approx(12.5));
  CHECK(p[1] == doctest::Approx(-3.75));
}

TEST_CASE("rectify: pure scale in K_img_robot") {
  calib::FrameCalibration cal;
  cal.K_img_robot << 2.5, 0, 0, 0, 2.5, 0, 0, 0, 1;
  const auto p = calib::rectify(cal, 4.0, -2.0);
  CHECK(p[0] == doctest::Approx(10.0));
  CHECK(p[1] == doctest::Approx(-5.0));
}

TEST_CASE("rectify matches an explicit matrix-vector oracle") {
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    calib::FrameCalibration cal;
    cal.K_cam_img = random_homography(rng);
    cal.K_img_robot = random_homography(rng);
    const double x = rng.uniform(-50.0, 50.0), y = rng.uniform(-50.0, 50.0);
    const auto got = calib::rectify(cal, x, y);

    // Step-by-step homogeneous products.
    const Eigen::Vector3d img_h = cal.K_cam_img * Eigen::Vector3d(x, y, 1.0);
    const Eigen::Vector3d img(img_h.x() / img_h.z(), img_h.y() / img_h.z(), 1.0);
    const Eigen::Vector3d rob_h = cal.K_img_robot * img;
    CHECK(std::abs(got[0] - rob_h.x() / rob_h.z()) < 1e-12);
    CHECK(std::abs(got[1] - rob_h.y() / rob_h.z()) < 1e-12);
  }
}

TEST_CASE("rectify: degenerate homography application throws") {
  calib::FrameCalibration cal;
  cal.K_cam_img << 1, 0, 0, 0, 1, 0, 0, -1, 0;  // maps y=0 points to w=0
  CHECK_THROWS_AS(calib::rectify(cal, 3.0, 0.0), std::runtime_error);
}

TEST_CASE("fit_homography: unit square to itself is the identity") {
  const std::vector<std::array<double, 2>> corners = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const auto h = calib::fit_homography(corners, corners);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      CHECK(std::abs(h(r, c) - (r == c ? 1.0 : 0.0)) < 1e-9);
    }
  }
}

TEST_CASE("fit_homography recovers a known affine map exactly") {
  const std::vector<std::array<double, 2>> src = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  std::vector<std::array<double, 2>> dst;
  for (const auto& p : src) {
    dst.push_back({2.0 * p[0] - 0.5 * p[1] + 3.0, 0.25 * p[0] + 1.5 * p[1] - 1.0});
  }
  const auto h = calib::fit_homography(src, dst);
  for (const auto& p : src) {
    const auto q = calib::apply_homography(h, p[0], p[1]);
    const double ex = 2.0 * p[0] - 0.5 * p[1] + 3.0;
    const double ey = 0.25 * p[0] + 1.5 * p[1] - 1.0;
    CHECK(std::abs(q[0] - ex) < 1e-9);
    CHECK(std::abs(q[1] - ey) < 1e-9);
  }
}

TEST_CASE("fit_homography: 15 noisy pairs reproject under 0.3 px") {
  Rng rng(603);
  const Eigen::Matrix3d truth = random_homography(rng);
  std::vector<std::array<double, 2>> src, dst;
  for (int i = 0; i < 15; ++i) {
    const double x = rng.uniform(0.0, 640.0), y = rng.uniform(0.0, 480.0);
    const auto q = calib::apply_homography(truth, x, y);
    src.push_back({x, y});
    dst.push_back({q[0] + 0.1 * rng.normal(), q[1] + 0.1 * rng.normal()});
  }
  const auto h = calib::fit_homography(src, dst);
  double rms = 0.0;
  for (size_t i = 0; i < src.size(); ++i) {
    const auto q = calib::apply_homography(h, src[i][0], src[i][1]);
    const auto t = calib::apply_homography(truth, src[i][0], src[i][1]);
    rms += (q[0] - t[0]) * (q[0] - t[0]) + (q[1] - t[1]) * (q[1] - t[1]);
  }
  rms = std::sqrt(rms / static_cast<double>(src.size()));
  CHECK(rms < 0.3);
}

TEST_CASE("fit_homography rejects degenerate input") {
  std::vector<std::array<double, 2>> three = {{0, 0}, {1, 0}, {1, 1}};
  CHECK_THROWS_AS(calib::fit_homography(three, three), std::invalid_argument);
  // All points collinear.
  std::vector<std::array<double, 2>> line = {{0, 0}, {1, 1}, {2, 2}, {3, 3}, {4, 4}};
  CHECK_THROWS_AS(calib::fit_homography(line, line), std::invalid_argument);
}

TEST_CASE("fit_homography round trip on its own correspondences") {
  Rng rng(71);
  const Eigen::Matrix3d truth = random_homography(rng);
  std::vector<std::array<double, 2>> src, dst;
  for (int i = 0; i < 8; ++i) {
    const double x = rng.uniform(0.0, 100.0), y = rng.uniform(0.0, 100.0);
    const auto q = calib::apply_homography(truth, x, y);
    src.push_back({x, y});
    dst.push_back(q);
  }
  const auto h = calib::fit_homography(src, dst);
  for (size_t i = 0; i < src.size(); ++i) {
    const auto q = calib::apply_homography(h, src[i][0], src[i][1]);
    CHECK(std::abs(q[0] - dst[i][0]) < 1e-9);
    CHECK(std::abs(q[1] - dst[i][1]) < 1e-9);
  }
}

TEST_CASE("correction mesh: anchors reproduce exactly, interior is barycentric") {
  std::vector<calib::CorrectionMesh::Anchor> anchors = {
      {0, 0, 0.5, -0.2}, {10, 0, -0.1, 0.3}, {10, 10, 0.2, 0.2}, {0, 10, 0.0, -0.4},
      {5, 4, 0.1, 0.1}};
  const auto mesh = calib::build_mesh(anchors);

  for (const auto& a : anchors) {
    const auto r = mesh.residual_at(a.u, a.v);
    CHECK(r[0] == doctest::Approx(a.dx_mm).epsilon(1e-12));
    CHECK(r[1] == doctest::Approx(a.dy_mm).epsilon(1e-12));
  }

  // Triangle centroid equals the mean of its vertices' residuals.
  REQUIRE_FALSE(mesh.triangles().empty());
  const auto& tri = mesh.triangles()[0];
  const auto& p0 = mesh.anchors()[static_cast<size_t>(tri[0])];
  const auto& p1 = mesh.anchors()[static_cast<size_t>(tri[1])];
  const auto& p2 = mesh.anchors()[static_cast<size_t>(tri[2])];
  const double cu = (p0.u + p1.u + p2.u) / 3.0, cv = (p0.v + p1.v + p2.v) / 3.0;
  const auto r = mesh.residual_at(cu, cv);
  CHECK(std::abs(r[0] - (p0.dx_mm + p1.dx_mm + p2.dx_mm) / 3.0) < 1e-12);
  CHECK(std::abs(r[1] - (p0.dy_mm + p1.dy_mm + p2.dy_mm) / 3.0) < 1e-12);
}

TEST_CASE("correction mesh: zero residuals, bounded interpolation, hull fallback") {
  std::vector<calib::CorrectionMesh::Anchor> zeros = {
      {0, 0, 0, 0}, {20, 0, 0, 0}, {20, 20, 0, 0}, {0, 20, 0, 0}};
  const auto zmesh = calib::build_mesh(zeros);
  Rng rng(17);
  for (int i = 0; i < 20; ++i) {
    const auto r = zmesh.residual_at(rng.uniform(-5.0, 25.0), rng.uniform(-5.0, 25.0));
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 0.0);
  }

  std::vector<calib::CorrectionMesh::Anchor> anchors = {
      {0, 0, 0.5, -0.2}, {10, 0, -0.1, 0.3}, {10, 10, 0.2, 0.2}, {0, 10, 0.0, -0.4}};
  const auto mesh = calib::build_mesh(anchors);
  double max_mag = 0.0;
  for (const auto& a : anchors) max_mag = std::max(max_mag, std::hypot(a.dx_mm, a.dy_mm));
  for (int i = 0; i < 50; ++i) {
    const auto r = mesh.residual_at(rng.uniform(-8.0, 18.0), rng.uniform(-8.0, 18.0));
    CHECK(std::hypot(r[0], r[1]) <= max_mag + 1e-12);
  }
  // Far outside the hull: nearest anchor's residual.
  const auto far = mesh.residual_at(-100.0, -100.0);
  CHECK(far[0] == doctest::Approx(0.5));
  CHECK(far[1] == doctest::Approx(-0.2));
}

TEST_CASE("correction mesh rejects collinear or insufficient anchors") {
  std::vector<calib::CorrectionMesh::Anchor> line = {
      {0, 0, 0, 0}, {1, 1, 0, 0}, {2, 2, 0, 0}, {3, 3, 0, 0}};
  CHECK_THROWS_AS(calib::build_mesh(line), std::invalid_argument);
  std::vector<calib::CorrectionMesh::Anchor> few = {{0, 0, 0, 0}, {1, 0, 0, 0}, {0, 1, 0, 0}};
  CHECK_THROWS_AS(calib::build_mesh(few), std::invalid_argument);
}

TEST_CASE("effector_target: paper cases and the forward-model identity") {
  const calib::EffectorGeometry geom{30.0};

  const auto id = calib::effector_target(10.0, 20.0, 0.0, geom);
  CHECK(id[0] == doctest::Approx(10.0));
  CHECK(id[1] == doctest::Approx(20.0));
  CHECK(id[2] == doctest::Approx(0.0));

  const auto t90 = calib::effector_target(10.0, 20.0, 90.0, geom);
  CHECK(t90[0] == doctest::Approx(10.0 - 30.0));
  CHECK(t90[1] == doctest::Approx(20.0 - 30.0));

  Rng rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const double x0 = rng.uniform(-50.0, 50.0);
    const double y0 = rng.uniform(-50.0, 50.0);
    const double theta_deg = rng.uniform(0.0, 180.0);
    const double r0 = rng.uniform(5.0, 60.0);
    const auto t = calib::effector_target(x0, y0, theta_deg, {r0});
    // Forward model: the contact sits R0 below the pivot at theta = 0 and
    // rotates with the arm; pivot is R0 above the carriage target.
    const double theta = theta_deg * M_PI / 180.0;
    const auto contact =
        oracles::rotate_about(t[0], t[1], t[0], t[1] + r0, theta);
    CHECK(std::abs(contact[0] - x0) < 1e-9);
    CHECK(std::abs(contact[1] - y0) < 1e-9);
  }

  CHECK_THROWS_AS(calib::effector_target(0, 0, 0, {0.0}), std::invalid_argument);
  CHECK_THROWS_AS(calib::effector_target(0, 0, 0, {-3.0}), std::invalid_argument);
}

TEST_CASE("led_spacing: pythagorean cases and errors") {
  CHECK(calib::led_spacing(5.0, 0.0) == doctest::Approx(5.0));
  CHECK(calib::led_spacing(5.0, 3.0) == doctest::Approx(4.0));
  CHECK(calib::led_spacing(10.0, 6.0) == doctest::Approx(8.0));
  CHECK_THROWS_AS(calib::led_spacing(3.0, 5.0), std::invalid_argument);
  CHECK_THROWS_AS(calib::led_spacing(3.0, 3.0), std::invalid_argument);
  CHECK_THROWS_AS(calib::led_spacing(3.0, -1.0), std::invalid_argument);
}

TEST_CASE("homography chain round trip over the work area") {
  Rng rng(202);
  calib::FrameCalibration cal;
  cal.K_cam_img = random_homography(rng);
  cal.K_img_robot = random_homography(rng);
  const Eigen::Matrix3d inv_chain = (cal.K_img_robot * cal.K_cam_img).inverse();
  for (int gx = 0; gx < 10; ++gx) {
    for (int gy = 0; gy < 10; ++gy) {
      const double x = 64.0 * gx, y = 48.0 * gy;
      const auto fwd = calib::rectify(cal, x, y);
      const auto back = calib::apply_homography(inv_chain, fwd[0], fwd[1]);
      CHECK(std::abs(back[0] - x) < 1e-9);
      CHECK(std::abs(back[1] - y) < 1e-9);
    }
  }
}

TEST_CASE("calibration JSON round trip") {
  calib::FrameCalibration cal;
  Rng rng(55);
  cal.K_cam_img = random_homography(rng);
  cal.K_img_robot = random_homography(rng);
  cal.mesh = calib::build_mesh(std::vector<calib::CorrectionMesh::Anchor>{
      {0, 0, 0.1, 0.0}, {100, 0, -0.1, 0.05}, {100, 100, 0.0, 0.2}, {0, 100, 0.05, -0.1}});

  const auto dir = std::filesystem::temp_directory_path() / "probemap_calib_tests";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "calib.json").string();
  calib::save_calibration(path, cal);
  const auto back = calib::load_calibration(path);
  CHECK((back.K_cam_img - cal.K_cam_img).norm() < 1e-12);
  CHECK((back.K_img_robot - cal.K_img_robot).norm() < 1e-12);
  REQUIRE(back.mesh.anchors().size() == 4);
  const auto r = back.mesh.residual_at(50.0, 50.0);
  const auto want = cal.mesh.residual_at(50.0, 50.0);
  CHECK(r[0] == doctest::Approx(want[0]));
  CHECK(r[1] == doctest::Approx(want[1]));

  // Mesh residual participates in rectification.
  const auto with_mesh = calib::image_to_robot(back, 50.0, 50.0);
  calib::FrameCalibration no_mesh = back;
  no_mesh.mesh = calib::CorrectionMesh();
  const auto without = calib::image_to_robot(no_mesh, 50.0, 50.0);
  CHECK(std::abs((with_mesh[0] - without[0]) - want[0]) < 1e-12);
  CHECK(std::abs((with_mesh[1] - without[1]) - want[1]) < 1e-12);

  CHECK_THROWS_AS(calib::load_calibration((dir / "none.json").string()), std::runtime_error);

  calib::FrameCalibration singular;
  singular.K_cam_img.setZero();
  CHECK_FALSE(calib::calibration_valid(singular));
}
