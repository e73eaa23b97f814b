#include "worksight/door_geometry.hpp"

#include "worksight/error.hpp"
#include "worksight/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace worksight {

CameraModel CameraModel::from(const CameraDescriptor& cam) {
  CameraModel m{cam.intrinsics.fx, cam.intrinsics.fy, cam.intrinsics.cx, cam.intrinsics.cy, cam.extrinsic};
  m.validate();
  return m;
}

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ValidationError("camera focal lengths must be positive");
  if (!extrinsic.is_rigid(1e-6)) throw ValidationError("camera extrinsic is not a rigid transform");
}

SymmetricEigen3 jacobi_eigen(const Mat3& symmetric, double tol, int max_sweeps) {
  Mat3 a = 0.5 * (symmetric + symmetric.transpose());
  Mat3 v = Mat3::Identity();
  const double scale = std::max(a.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  SymmetricEigen3 out;
  for (; out.sweeps < max_sweeps; ++out.sweeps) {
    const double off = std::max({std::abs(a(0, 1)), std::abs(a(0, 2)), std::abs(a(1, 2))});
    if (off <= tol * scale) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        Mat3 rot = Mat3::Identity();
        rot(p, p) = c;
        rot(q, q) = c;
        rot(p, q) = s;
        rot(q, p) = -s;
        a = rot.transpose() * a * rot;
        a(p, q) = a(q, p) = 0.0;
        v = v * rot;
      }
    }
  }
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) > a(j, j); });
  for (int k = 0; k < 3; ++k) {
    out.values[static_cast<std::size_t>(k)] = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

std::vector<Vec3> back_project(const MaskImage& mask, const DepthImage& depth_mm, const CameraModel& cam,
                               int repair_radius) {
  cam.validate();
  if (mask.width != depth_mm.width || mask.height != depth_mm.height)
    throw ValidationError("mask and depth image dimensions differ");

  bool any_mask = false;
  bool any_depth = false;
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u)
      if (mask.at(u, v) != 0) {
        any_mask = true;
        if (depth_mm.at(u, v) != 0) any_depth = true;
      }
  if (!any_mask) throw DataError("back_project: empty mask");
  if (!any_depth) throw DataError("back_project: no mask pixel has valid depth");

  auto repaired_depth = [&](int u, int v) -> std::uint16_t {
    std::uint16_t best = 0;
    int best_d2 = std::numeric_limits<int>::max();
    for (int dv = -repair_radius; dv <= repair_radius; ++dv) {
      for (int du = -repair_radius; du <= repair_radius; ++du) {
        const int d2 = du * du + dv * dv;
        if (d2 > repair_radius * repair_radius || d2 >= best_d2) continue;
        const int uu = u + du;
        const int vv = v + dv;
        if (uu < 0 || vv < 0 || uu >= mask.width || vv >= mask.height) continue;
        if (mask.at(uu, vv) == 0 || depth_mm.at(uu, vv) == 0) continue;
        best = depth_mm.at(uu, vv);
        best_d2 = d2;
      }
    }
    return best;
  };

  std::vector<Vec3> points;
  for (int v = 0; v < mask.height; ++v) {
    for (int u = 0; u < mask.width; ++u) {
      if (mask.at(u, v) == 0) continue;
      std::uint16_t d = depth_mm.at(u, v);
      if (d == 0) d = repaired_depth(u, v);
      if (d == 0) continue;
      const double z = static_cast<double>(d) / 1000.0;
      points.emplace_back(z * (u - cam.cx) / cam.fx, z * (v - cam.cy) / cam.fy, z);
    }
  }
  return points;
}

DoorPose door_pose(const std::vector<Vec3>& points_cam, const CameraModel& cam) {
  if (points_cam.empty()) throw DataError("door_pose: empty point set");
  DoorPose pose;
  pose.point_count = points_cam.size();

  Vec3 sum = Vec3::Zero();
  for (const auto& p : points_cam) sum += p;
  pose.centroid_cam = sum / static_cast<double>(points_cam.size());
  pose.centroid_global = cam.extrinsic.apply(pose.centroid_cam);
  pose.bbox_cam = bounding_box(points_cam);
  std::vector<Vec3> global;
  global.reserve(points_cam.size());
  for (const auto& p : points_cam) global.push_back(cam.extrinsic.apply(p));
  pose.bbox_global = bounding_box(global);

  Mat3 cov = Mat3::Zero();
  for (const auto& p : points_cam) {
    const Vec3 d = p - pose.centroid_cam;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points_cam.size());

  const auto eig = jacobi_eigen(cov);
  const double l1 = eig.values[0];
  const double l2 = eig.values[1];
  const double extent = pose.bbox_cam.max.cwiseAbs().maxCoeff() + pose.bbox_cam.min.cwiseAbs().maxCoeff();
  const bool coincident = l1 <= 1e-24 * std::max(1.0, extent * extent);
  const bool isotropic = !coincident && (l1 - l2) <= 1e-9 * l1;
  pose.orientation_defined = !coincident && !isotropic;
  if (!pose.orientation_defined) return pose;

  Vec3 axis_global = cam.extrinsic.apply_direction(eig.vectors.col(0)).normalized();
  for (int k = 0; k < 3; ++k) {
    if (std::abs(axis_global[k]) > 1e-12) {
      if (axis_global[k] < 0.0) axis_global = -axis_global;
      break;
    }
  }
  pose.axis_global = axis_global;
  pose.axis_cam = cam.extrinsic.rotation.transpose() * axis_global;
  const double horizontal = std::hypot(axis_global.x(), axis_global.y());
  pose.yaw_defined = horizontal > 1e-9;
  if (pose.yaw_defined) pose.yaw_deg = rad2deg(std::atan2(axis_global.y(), axis_global.x()));
  return pose;
}

DoorObservation observe(double timestamp, const DoorPose& pose) {
  return {timestamp, pose.centroid_global, pose.yaw_defined ? pose.yaw_deg : 0.0, pose.yaw_defined};
}

std::string write_door_series(const std::vector<DoorObservation>& series) {
  using text::format_number;
  std::string out = "timestamp_s,cx,cy,cz,yaw_deg,yaw_defined\n";
  for (const auto& o : series) {
    out += format_number(o.timestamp) + ',' + format_number(o.centroid_global.x()) + ',' +
           format_number(o.centroid_global.y()) + ',' + format_number(o.centroid_global.z()) + ',' +
           format_number(o.yaw_deg) + ',' + (o.yaw_defined ? "1" : "0") + '\n';
  }
  return out;
}

std::vector<DoorObservation> parse_door_series(const std::string& content) {
  const auto lines = text::split_lines(content);
  std::vector<DoorObservation> out;
  bool header = true;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const auto f = text::split_fields(lines[i], ',');
    if (header) {
      header = false;
      if (f.empty() || text::lowercase(text::trim(f[0])) != "timestamp_s")
        throw ValidationError("door series: expected header starting with timestamp_s");
      continue;
    }
    const std::string where = "door series line " + std::to_string(i + 1);
    if (f.size() != 6) throw ValidationError(where + ": expected 6 fields");
    DoorObservation o;
    o.timestamp = text::parse_number(f[0], where + " timestamp");
    o.centroid_global = {text::parse_number(f[1], where + " cx"), text::parse_number(f[2], where + " cy"),
                         text::parse_number(f[3], where + " cz")};
    o.yaw_deg = text::parse_number(f[4], where + " yaw");
    o.yaw_defined = text::parse_integer(f[5], where + " yaw_defined") != 0;
    if (!out.empty() && o.timestamp <= out.back().timestamp)
      throw ValidationError(where + ": timestamps must increase");
    out.push_back(o);
  }
  return out;
}

std::vector<DoorObservation> read_door_series(const std::filesystem::path& path) {
  return parse_door_series(text::read_file(path));
}

}  // namespace worksight
