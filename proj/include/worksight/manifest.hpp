#pragma once

#include "worksight/geometry.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace worksight {

enum class Workstation { WS10, WS20, WS30 };

std::string to_string(Workstation ws);
Workstation parse_workstation(const std::string& text);

struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  bool operator==(const Intrinsics&) const = default;
};

struct CameraDescriptor {
  std::string id;
  std::string side;
  Intrinsics intrinsics;
  RigidTransform extrinsic;  // camera -> global
  double mount_height_m = 0.0;

  bool operator==(const CameraDescriptor&) const = default;
};

/// Paths exactly as written in the manifest (relative to the manifest
/// directory unless absolute). Use DatasetManifest::resolve to open them.
struct Recordings {
  std::map<std::string, std::filesystem::path> pose_streams;
  std::map<std::string, std::filesystem::path> depth_dirs;
  std::map<std::string, std::filesystem::path> mask_dirs;
  std::optional<std::filesystem::path> bvh;
  std::optional<std::filesystem::path> annotations;
  std::optional<std::filesystem::path> posture_intervals;
  std::optional<std::filesystem::path> door_series;

  bool operator==(const Recordings&) const = default;
};

inline constexpr std::size_t kMaxCamerasPerWorkstation = 2;

struct DatasetManifest {
  Workstation workstation = Workstation::WS10;
  std::string pose_topology = "body15";
  double bvh_scale = 0.01;  // BVH file units -> meters
  RigidTransform bvh_to_global;
  std::optional<Vec3> cart_location;
  std::vector<CameraDescriptor> cameras;
  Recordings recordings;
  std::filesystem::path base_dir;  // not serialized

  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : base_dir / p;
  }
  const CameraDescriptor& camera(const std::string& id) const;

  bool operator==(const DatasetManifest& o) const;
};

/// Parses and validates manifest JSON text. Referenced paths are checked
/// against `base_dir` only when `check_paths` is set.
DatasetManifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir,
                               bool check_paths = true);
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string serialize_manifest(const DatasetManifest& manifest);
void validate_manifest(const DatasetManifest& manifest, bool check_paths = true);

}  // namespace worksight
