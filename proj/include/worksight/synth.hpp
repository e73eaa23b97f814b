#pragma once

#include "worksight/door_geometry.hpp"
#include "worksight/manifest.hpp"
#include "worksight/pose_stream.hpp"
#include "worksight/progress.hpp"
#include "worksight/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace worksight::synth {

/// Skeleton shape parameters for one instant. Angles in degrees.
struct BodyPose {
  Vec3 root = Vec3(0.0, 0.0, 1.0);  // pelvis, global
  double heading_rad = 0.0;         // facing direction about +Z (0 = +X)
  double flexion_deg = 0.0;         // forward trunk bend
  double lateral_deg = 0.0;         // sideways trunk bend (to the right)
  double twist_deg = 0.0;           // shoulder girdle rotation about the trunk axis
  double arm_elevation_l_deg = 8.0;  // 0 = hanging, 90 = forward horizontal, 180 = overhead
  double arm_elevation_r_deg = 8.0;
};

/// Body15 joint positions for a pose (pelvis height 1.0 m when standing).
std::vector<Vec3> body15_positions(const BodyPose& pose);

struct Episode {
  PostureClass posture = PostureClass::P3_BentForward;
  double start_s = 0.0;
  double duration_s = 0.0;

  double end_s() const { return start_s + duration_s; }
};

struct Occlusion {
  std::string camera_id;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct ScenarioSpec {
  std::uint64_t seed = 1;
  Workstation workstation = Workstation::WS10;
  double cycle_duration_s = 216.0;
  std::size_t subgoal_count = 5;
  double min_subgoal_s = 22.0;
  double max_subgoal_s = 67.0;
  std::vector<Episode> episodes;
  double jitter_sigma_m = 0.005;
  double base_confidence = 0.9;
  double occluded_confidence = 0.2;
  std::vector<Occlusion> occlusions;
  bool bystander = true;      // second person far from the cart in every camera
  double gt_rate_hz = 60.0;   // ground-truth motion capture
  double camera_rate_hz = 30.0;
  std::size_t door_image_frames = 0;  // depth/mask frames rendered per camera

  /// Throws on out-of-cycle or overlapping mutually exclusive episodes
  /// (bent forward with strongly bent forward).
  void validate() const;
};

/// One episode of each class spread over a 216 s cycle, with two
/// short occlusions and a bystander.
ScenarioSpec default_scenario(std::uint64_t seed = 1);

struct Scenario {
  ScenarioSpec spec;
  PoseSequence ground_truth;  // body15, global frame, gt_rate_hz
  std::vector<CameraDescriptor> cameras;
  std::vector<std::vector<PoseRecord>> camera_records;  // per camera, camera frame
  std::vector<DoorObservation> door;
  std::vector<AnnotationSegment> subgoals;
  std::vector<AnnotationSegment> posture_intervals;
  Vec3 cart_location = Vec3::Zero();
};

/// Body pose of the scripted worker at time t.
BodyPose scripted_pose(const ScenarioSpec& spec, const std::vector<AnnotationSegment>& subgoals, double t);

Scenario generate(const ScenarioSpec& spec);

/// Writes manifest.json and every recording it references into `dir`.
/// Returns the manifest path.
std::filesystem::path write_scenario(const Scenario& scenario, const std::filesystem::path& dir);

/// Planar door rectangle rendered into a camera as depth (mm) and mask.
struct DoorFrame {
  DepthImage depth;
  MaskImage mask;
};
DoorFrame render_door(const CameraDescriptor& camera, const Vec3& centroid_global, double yaw_deg,
                      double width_m = 1.0, double height_m = 0.8);

/// Classes are well separated prototypes (unit Gaussian entries) plus
/// Gaussian noise. Each run of n_classes consecutive windows shares one of
/// 10 group ids, so every group holds every class.
std::vector<progress::TokenizedWindow> separable_windows(std::size_t count, std::size_t n_classes,
                                                         std::size_t n_tokens, std::size_t d_in, std::uint64_t seed,
                                                         double noise_sigma = 0.3);

}  // namespace worksight::synth
