#pragma once

#include "worksight/geometry.hpp"
#include "worksight/types.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace worksight {

/// A detection is valid when strictly more than `valid_fraction` of its
/// joints have confidence strictly above `joint_conf_threshold`.
struct ViewSelectionPolicy {
  double joint_conf_threshold = 0.5;
  double valid_fraction = 0.5;

  void validate() const;
};

struct CandidatePose {
  std::string camera_id;
  PoseFrame pose;
  double mean_confidence = 0.0;

  static CandidatePose from(std::string camera_id, PoseFrame pose);
};

bool is_valid(const PoseFrame& pose, const ViewSelectionPolicy& policy = {});

/// The single valid candidate, or the valid one with the higher mean
/// confidence. Equal means fall back to the earlier candidate.
std::optional<CandidatePose> select_view(std::span<const CandidatePose> candidates,
                                         const ViewSelectionPolicy& policy = {});

/// Index of the pose whose `root_joint` lies closest to `cart_centroid`.
/// Ties go to the lower index.
std::size_t select_active_worker_index(std::span<const PoseFrame> poses, std::size_t root_joint,
                                       const Vec3& cart_centroid);
const PoseFrame& select_active_worker(std::span<const PoseFrame> poses, std::size_t root_joint,
                                      const Vec3& cart_centroid);

/// Translates the pose so that `base_joint` is at the origin.
PoseFrame to_body_frame(const PoseFrame& pose, std::size_t base_joint);
PoseSequence to_body_frame(const PoseSequence& seq);

/// Maps a camera-frame pose into the global frame.
PoseFrame camera_to_global(const PoseFrame& pose, const RigidTransform& extrinsic);

// Pose-stream interchange files: one CSV row per (timestamp, camera, person)
// with columns timestamp_s,camera_id,person_id,frame followed by
// <joint>_x,<joint>_y,<joint>_z,<joint>_conf for each topology joint.

struct PoseRecord {
  std::string camera_id;
  int person_id = 0;
  PoseFrame pose;
};

std::string write_pose_stream(const SkeletonTopology& topology, std::span<const PoseRecord> records);
std::vector<PoseRecord> parse_pose_stream(const std::string& content, const SkeletonTopology& topology);
std::vector<PoseRecord> read_pose_stream(const std::filesystem::path& path, const SkeletonTopology& topology);

/// Single-person sequence stored in the same layout; `camera_id` labels
/// each row with its source (e.g. the selected view).
std::string write_sequence(const PoseSequence& seq, std::span<const std::string> camera_ids = {});
PoseSequence parse_sequence(const std::string& content, const SkeletonTopology& topology, double rate_hz);

}  // namespace worksight
