#include "generators.hpp"
#include "worksight/door_geometry.hpp"
#include "worksight/error.hpp"
#include "worksight/image_io.hpp"
#include "worksight/synth.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <filesystem>

using namespace worksight;

namespace {

CameraModel test_camera() {
  CameraModel c{150.0, 140.0, 80.0, 60.0, {}};
  return c;
}

CameraDescriptor synth_in_camera() {
  CameraDescriptor d;
  d.id = "in";
  d.intrinsics = {150, 150, 80, 60, 160, 120};
  d.extrinsic.rotation << 1, 0, 0, 0, 0, 1, 0, -1, 0;
  d.extrinsic.translation = Vec3(0.8, -3.0, 1.85);
  return d;
}

}  // namespace

TEST_CASE("jacobi matches Eigen's self-adjoint solver on random symmetric matrices") {
  testgen::Gen g(31);
  for (int trial = 0; trial < 200; ++trial) {
    const Mat3 a = g.symmetric(g.uniform(0.01, 10.0));
    const auto ours = jacobi_eigen(a);
    Eigen::SelfAdjointEigenSolver<Mat3> ref(a);
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    for (int k = 0; k < 3; ++k) {
      CHECK(ours.values[static_cast<std::size_t>(k)] == doctest::Approx(ref.eigenvalues()[2 - k]).epsilon(1e-10).scale(scale));
      const Vec3 v = ours.vectors.col(k);
      CHECK(std::abs(v.norm() - 1.0) < 1e-12);
      CHECK((a * v - ours.values[static_cast<std::size_t>(k)] * v).norm() < 1e-9 * scale);
    }
    CHECK(ours.values[0] >= ours.values[1]);
    CHECK(ours.values[1] >= ours.values[2]);
  }
}

TEST_CASE("jacobi on diagonal and zero matrices") {
  const auto z = jacobi_eigen(Mat3::Zero());
  CHECK(z.values == std::array<double, 3>{0, 0, 0});
  CHECK(z.sweeps == 0);
  Mat3 d = Mat3::Zero();
  d.diagonal() << 1, 3, 2;
  const auto e = jacobi_eigen(d);
  CHECK(e.values == std::array<double, 3>{3, 2, 1});
  CHECK(std::abs(e.vectors.col(0).dot(Vec3::UnitY())) == 1.0);
}

TEST_CASE("pinhole back-projection re-projects onto its pixel") {
  const auto cam = test_camera();
  MaskImage mask(160, 120, 0);
  DepthImage depth(160, 120, 0);
  testgen::Gen g(2);
  for (int k = 0; k < 50; ++k) {
    const int u = static_cast<int>(g.index(0, 159));
    const int v = static_cast<int>(g.index(0, 119));
    mask.at(u, v) = 255;
    depth.at(u, v) = static_cast<std::uint16_t>(g.index(300, 8000));
  }
  const auto pts = back_project(mask, depth, cam);
  std::size_t i = 0;
  for (int v = 0; v < 120; ++v)
    for (int u = 0; u < 160; ++u) {
      if (!mask.at(u, v)) continue;
      REQUIRE(i < pts.size());
      const Vec3& p = pts[i++];
      CHECK(std::abs(p.z() - depth.at(u, v) / 1000.0) < 1e-12);
      CHECK(std::abs(cam.fx * p.x() / p.z() + cam.cx - u) < 1e-12);
      CHECK(std::abs(cam.fy * p.y() / p.z() + cam.cy - v) < 1e-12);
    }
  CHECK(i == pts.size());
}

TEST_CASE("depth repair borrows the nearest masked depth within the radius") {
  const auto cam = test_camera();
  MaskImage mask(20, 20, 0);
  DepthImage depth(20, 20, 0);
  mask.at(5, 5) = 1;
  depth.at(5, 5) = 1000;
  mask.at(8, 5) = 1;  // 3 px away: repaired
  mask.at(5, 15) = 1;  // 10 px away: dropped
  depth.at(8, 6) = 3000;  // unmasked depth never donates
  const auto pts = back_project(mask, depth, cam);
  REQUIRE(pts.size() == 2);
  CHECK(pts[1].z() == 1.0);
  CHECK(std::abs(cam.fx * pts[1].x() / pts[1].z() + cam.cx - 8) < 1e-12);

  CHECK(back_project(mask, depth, cam, 10).size() == 3);
  CHECK(back_project(mask, depth, cam, 0).size() == 1);
}

TEST_CASE("back-projection errors") {
  const auto cam = test_camera();
  MaskImage mask(4, 4, 0);
  DepthImage depth(4, 4, 0);
  CHECK_THROWS_AS(back_project(mask, depth, cam), DataError);
  mask.at(1, 1) = 1;
  CHECK_THROWS_AS(back_project(mask, depth, cam), DataError);
  CHECK_THROWS_AS(back_project(mask, DepthImage(3, 4, 1), cam), ValidationError);
  auto bad = cam;
  bad.fx = 0;
  depth.at(1, 1) = 5;
  CHECK_THROWS_AS(back_project(mask, depth, bad), ValidationError);
}

TEST_CASE("rendered door at 30 degrees yaw is recovered") {
  const auto desc = synth_in_camera();
  const auto cam = CameraModel::from(desc);
  for (double yaw : {-30.0, 0.0, 30.0, 45.0}) {
    const Vec3 centroid(0.8, 0.7, 0.9);
    const auto frame = synth::render_door(desc, centroid, yaw);
    const auto pose = door_pose(back_project(frame.mask, frame.depth, cam), cam);
    REQUIRE(pose.yaw_defined);
    CHECK(std::abs(pose.yaw_deg - yaw) < 0.5);
    // Pixel density favors the nearer half of a yawed plane.
    CHECK((pose.centroid_global - centroid).norm() < 0.05);
  }
}

TEST_CASE("door pose is equivariant under rigid motion of the points") {
  testgen::Gen g(17);
  const auto cam = test_camera();
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 100; ++i) pts.push_back(Vec3(g.normal(1.0), g.normal(0.3), g.normal(0.1)) + Vec3(0, 0, 3));
    const auto t = g.rigid();
    std::vector<Vec3> moved;
    for (const auto& p : pts) moved.push_back(t.apply(p));
    const auto a = door_pose(pts, cam);
    const auto b = door_pose(moved, cam);
    CHECK((t.apply(a.centroid_cam) - b.centroid_cam).norm() < 1e-9);
    CHECK(std::abs(std::abs((t.apply_direction(a.axis_cam)).dot(b.axis_cam)) - 1.0) < 1e-9);

    auto cam2 = cam;
    cam2.extrinsic = t * cam.extrinsic;
    const auto c = door_pose(pts, cam2);
    CHECK((t.apply(a.centroid_global) - c.centroid_global).norm() < 1e-9);
    for (const auto& p : moved) CHECK(b.bbox_cam.contains(p, 1e-12));
  }
}

TEST_CASE("degenerate point sets leave orientation undefined") {
  const auto cam = test_camera();
  const auto single = door_pose({Vec3(1, 2, 3), Vec3(1, 2, 3)}, cam);
  CHECK_FALSE(single.orientation_defined);
  CHECK_FALSE(single.yaw_defined);
  CHECK(single.centroid_cam == Vec3(1, 2, 3));
  // Vertical line: axis defined, yaw not.
  const auto vertical = door_pose({Vec3(0, 0, 0), Vec3(0, 0, 1), Vec3(0, 0, 2)}, cam);
  CHECK(vertical.orientation_defined);
  CHECK_FALSE(vertical.yaw_defined);
  // Regular octahedron: isotropic covariance.
  const auto iso = door_pose({Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0), Vec3(0, -1, 0), Vec3(0, 0, 1),
                              Vec3(0, 0, -1)},
                             cam);
  CHECK_FALSE(iso.orientation_defined);
  CHECK_THROWS_AS(door_pose({}, cam), DataError);
}

TEST_CASE("yaw lies in (-90, 90] with a sign-normalized axis") {
  const auto cam = test_camera();
  for (double yaw : {-89.0, -45.0, 0.0, 60.0, 90.0, 120.0, 200.0}) {
    const Vec3 dir(std::cos(deg2rad(yaw)), std::sin(deg2rad(yaw)), 0);
    std::vector<Vec3> pts;
    for (int i = -5; i <= 5; ++i) pts.push_back(0.1 * i * dir + Vec3(0, 0, 0.01 * (i % 2)));
    const auto p = door_pose(pts, cam);
    REQUIRE(p.yaw_defined);
    CHECK(p.yaw_deg > -90.0 - 1e-9);
    CHECK(p.yaw_deg <= 90.0 + 1e-9);
    const double diff = std::remainder(p.yaw_deg - yaw, 180.0);
    CHECK(std::abs(diff) < 1e-6);
  }
}

TEST_CASE("door series round trip and ordering") {
  std::vector<DoorObservation> s{{0.0, Vec3(0.1, 0.2, 0.3), 12.5, true}, {0.5, Vec3(1, 2, 3), 0.0, false}};
  CHECK(parse_door_series(write_door_series(s)) == s);
  CHECK_THROWS_AS(parse_door_series("t,cx\n"), ValidationError);
  CHECK_THROWS_AS(parse_door_series("timestamp_s,cx,cy,cz,yaw_deg,yaw_defined\n1,0,0,0,0,1\n1,0,0,0,0,1\n"),
                  ValidationError);
  CHECK_THROWS_AS(parse_door_series("timestamp_s,cx,cy,cz,yaw_deg,yaw_defined\n1,0,0,0,0\n"), ValidationError);
  DoorPose p;
  p.centroid_global = Vec3(1, 1, 1);
  p.yaw_deg = 33;
  p.yaw_defined = false;
  CHECK(observe(2.0, p) == DoorObservation{2.0, Vec3(1, 1, 1), 0.0, false});
}

TEST_CASE("PGM images round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "worksight_pgm_test";
  std::filesystem::remove_all(dir);
  DepthImage d(7, 5, 0);
  MaskImage m(7, 5, 0);
  for (int v = 0; v < 5; ++v)
    for (int u = 0; u < 7; ++u) {
      d.at(u, v) = static_cast<std::uint16_t>(u * 1000 + v * 257);
      m.at(u, v) = static_cast<std::uint8_t>((u + v) % 2 ? 255 : 0);
    }
  write_depth_pgm(dir / "d.pgm", d);
  write_mask_pgm(dir / "m.pgm", m);
  CHECK(read_depth_pgm(dir / "d.pgm").pixels == d.pixels);
  const auto m2 = read_mask_pgm(dir / "m.pgm");
  CHECK(m2.width == 7);
  CHECK(m2.pixels == m.pixels);
  CHECK_THROWS(read_depth_pgm(dir / "missing.pgm"));
  std::filesystem::remove_all(dir);
}
