#pragma once

#include "worksight/geometry.hpp"
#include "worksight/image_io.hpp"
#include "worksight/manifest.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace worksight {

struct CameraModel {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  RigidTransform extrinsic;  // camera -> global

  static CameraModel from(const CameraDescriptor& cam);
  void validate() const;
};

struct SymmetricEigen3 {
  std::array<double, 3> values{};  // descending
  Mat3 vectors = Mat3::Identity();  // column k pairs with values[k]
  int sweeps = 0;
};

/// Cyclic Jacobi rotations until every off-diagonal entry is below
/// `tol` times the matrix scale.
SymmetricEigen3 jacobi_eigen(const Mat3& symmetric, double tol = 1e-12, int max_sweeps = 64);

inline constexpr int kDepthRepairRadius = 5;

/// Back-projects every mask pixel through the pinhole model. Pixels without
/// depth borrow the depth of the nearest mask pixel with depth inside
/// `repair_radius`; pixels with none in range are dropped.
std::vector<Vec3> back_project(const MaskImage& mask, const DepthImage& depth_mm, const CameraModel& cam,
                               int repair_radius = kDepthRepairRadius);

struct DoorPose {
  Vec3 centroid_cam = Vec3::Zero();
  Vec3 centroid_global = Vec3::Zero();
  Vec3 axis_cam = Vec3::UnitX();  // dominant principal axis, unit length
  Vec3 axis_global = Vec3::UnitX();
  double yaw_deg = 0.0;  // of axis_global about global +Z, in (-90, 90]
  Aabb bbox_cam;
  Aabb bbox_global;  // box of the transformed points
  bool orientation_defined = false;
  bool yaw_defined = false;
  std::size_t point_count = 0;
};

/// Centroid, principal axis, yaw and boxes of a camera-frame point set.
/// Coincident or isotropic sets keep centroid and boxes but report
/// orientation_defined = false.
DoorPose door_pose(const std::vector<Vec3>& points_cam, const CameraModel& cam);

/// One door measurement on the global clock.
struct DoorObservation {
  double timestamp = 0.0;
  Vec3 centroid_global = Vec3::Zero();
  double yaw_deg = 0.0;
  bool yaw_defined = false;

  bool operator==(const DoorObservation&) const = default;
};

DoorObservation observe(double timestamp, const DoorPose& pose);

// CSV: timestamp_s,cx,cy,cz,yaw_deg,yaw_defined (0/1), ascending timestamps.
std::string write_door_series(const std::vector<DoorObservation>& series);
std::vector<DoorObservation> parse_door_series(const std::string& content);
std::vector<DoorObservation> read_door_series(const std::filesystem::path& path);

}  // namespace worksight
