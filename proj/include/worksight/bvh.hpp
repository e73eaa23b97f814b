#pragma once

#include "worksight/geometry.hpp"
#include "worksight/types.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace worksight::bvh {

enum class Channel { Xposition, Yposition, Zposition, Xrotation, Yrotation, Zrotation };

struct Joint {
  std::string name;
  int parent = -1;
  Vec3 offset = Vec3::Zero();
  std::vector<Channel> channels;  // declared order
  std::size_t first_channel = 0;  // index into a motion row
  std::optional<Vec3> end_site;
};

struct Rig {
  std::vector<Joint> joints;  // depth-first declaration order, parents precede children
  std::size_t channel_count = 0;
  std::size_t frame_count = 0;
  double frame_time = 0.0;
  std::vector<double> motion;  // frame-major, channel_count values per frame

  double frame_rate() const { return 1.0 / frame_time; }
  std::span<const double> frame(std::size_t index) const;
  SkeletonTopology topology(const std::string& name = "bvh") const;
};

/// BVH files carry no units; this converts file units to meters.
class UnitScale {
 public:
  explicit UnitScale(double file_to_meters = 0.01);
  double file_to_meters() const { return factor_; }

 private:
  double factor_;
};

Rig parse_bvh_text(const std::string& content);
Rig parse_bvh(const std::filesystem::path& path);

/// Serializes a rig. Joints must be listed depth-first with contiguous
/// channel blocks, as parse_bvh_text produces them.
std::string write_bvh(const Rig& rig);

/// World positions of every joint at `frame_index`. Each joint's local
/// transform is translation(offset + position channels) followed by its
/// rotation channels composed in declared order; results are scaled to
/// meters and then mapped through `to_global`.
PoseFrame forward_kinematics(const Rig& rig, std::size_t frame_index, const UnitScale& scale,
                             const RigidTransform& to_global = RigidTransform::identity());

/// Runs forward kinematics on every frame.
PoseSequence to_sequence(const Rig& rig, const UnitScale& scale,
                         const RigidTransform& to_global = RigidTransform::identity(),
                         const std::string& topology_name = "bvh");

}  // namespace worksight::bvh

namespace worksight {

/// Uniformly resamples onto target_hz starting at the first timestamp,
/// linearly interpolating positions and confidences. Never extrapolates past
/// the last source frame. Throws on upsampling or fewer than two frames.
PoseSequence resample(const PoseSequence& seq, double target_hz);

}  // namespace worksight
