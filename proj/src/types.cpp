#include "worksight/types.hpp"

#include "worksight/error.hpp"

#include <cmath>
#include <numeric>
#include <set>

namespace worksight {

std::string_view to_string(CoordinateFrame frame) {
  switch (frame) {
    case CoordinateFrame::camera: return "camera";
    case CoordinateFrame::global: return "global";
    case CoordinateFrame::body: return "body";
  }
  return "unknown";
}

CoordinateFrame parse_coordinate_frame(std::string_view text) {
  if (text == "camera") return CoordinateFrame::camera;
  if (text == "global") return CoordinateFrame::global;
  if (text == "body") return CoordinateFrame::body;
  throw ValidationError("unknown coordinate frame '" + std::string(text) + "'");
}

SkeletonTopology::SkeletonTopology(std::string name, std::vector<std::string> joints,
                                   std::vector<int> parents)
    : name_(std::move(name)), joints_(std::move(joints)), parents_(std::move(parents)) {
  if (joints_.empty()) throw ValidationError("topology '" + name_ + "' has no joints");
  if (parents_.size() != joints_.size())
    throw ValidationError("topology '" + name_ + "': parent table size mismatch");
  std::set<std::string> unique(joints_.begin(), joints_.end());
  if (unique.size() != joints_.size())
    throw ValidationError("topology '" + name_ + "': duplicate joint names");

  int roots = 0;
  const auto n = static_cast<int>(joints_.size());
  for (int i = 0; i < n; ++i) {
    const int p = parents_[static_cast<std::size_t>(i)];
    if (p < 0) {
      ++roots;
      root_ = static_cast<std::size_t>(i);
    } else if (p >= n || p == i) {
      throw ValidationError("topology '" + name_ + "': bad parent for joint " + joints_[static_cast<std::size_t>(i)]);
    }
  }
  if (roots != 1) throw ValidationError("topology '" + name_ + "' must have exactly one root");

  // Every joint must reach the root without revisiting a joint.
  for (int i = 0; i < n; ++i) {
    int cur = i;
    for (int steps = 0; cur >= 0; ++steps) {
      if (steps > n) throw ValidationError("topology '" + name_ + "' contains a cycle");
      cur = parents_[static_cast<std::size_t>(cur)];
    }
  }
}

std::optional<std::size_t> SkeletonTopology::index_of(std::string_view joint) const {
  for (std::size_t i = 0; i < joints_.size(); ++i)
    if (joints_[i] == joint) return i;
  return std::nullopt;
}

std::size_t SkeletonTopology::require(std::string_view joint) const {
  if (auto idx = index_of(joint)) return *idx;
  throw ValidationError("topology '" + name_ + "' lacks joint '" + std::string(joint) + "'");
}

const SkeletonTopology& body15_topology() {
  static const SkeletonTopology topo(
      "body15",
      {"hip", "neck", "head", "r_shoulder", "r_elbow", "r_wrist", "l_shoulder", "l_elbow",
       "l_wrist", "r_hip", "r_knee", "r_ankle", "l_hip", "l_knee", "l_ankle"},
      {-1, 0, 1, 1, 3, 4, 1, 6, 7, 0, 9, 10, 0, 12, 13});
  return topo;
}

const SkeletonTopology& body25_topology() {
  static const SkeletonTopology topo(
      "body25",
      {"Nose",   "Neck",    "RShoulder", "RElbow",    "RWrist",   "LShoulder", "LElbow",
       "LWrist", "MidHip",  "RHip",      "RKnee",     "RAnkle",   "LHip",      "LKnee",
       "LAnkle", "REye",    "LEye",      "REar",      "LEar",     "LBigToe",   "LSmallToe",
       "LHeel",  "RBigToe", "RSmallToe", "RHeel"},
      {1, 8, 1, 2, 3, 1, 5, 6, -1, 8, 9, 10, 8, 12, 13, 0, 0, 15, 16, 14, 14, 14, 11, 11, 11});
  return topo;
}

const SkeletonTopology& mocap24_topology() {
  static const SkeletonTopology topo(
      "mocap24",
      {"Hips",        "Spine",        "Spine1",     "Spine2",      "Spine3",    "Neck",
       "Head",        "HeadTop",      "LeftShoulder", "LeftArm",   "LeftForeArm", "LeftHand",
       "RightShoulder", "RightArm",   "RightForeArm", "RightHand", "LeftUpLeg", "LeftLeg",
       "LeftFoot",    "LeftToe",      "RightUpLeg", "RightLeg",    "RightFoot", "RightToe"},
      {-1, 0, 1, 2, 3, 4, 5, 6, 4, 8, 9, 10, 4, 12, 13, 14, 0, 16, 17, 18, 0, 20, 21, 22});
  return topo;
}

const SkeletonTopology& builtin_topology(std::string_view name) {
  if (name == "body15") return body15_topology();
  if (name == "body25") return body25_topology();
  if (name == "mocap24") return mocap24_topology();
  throw ValidationError("unknown topology '" + std::string(name) + "'");
}

double PoseFrame::mean_confidence() const {
  if (confidences.empty()) return 0.0;
  return std::accumulate(confidences.begin(), confidences.end(), 0.0) /
         static_cast<double>(confidences.size());
}

void PoseSequence::validate() const {
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) throw ValidationError("sequence rate must be positive");
  const std::size_t n = topology.expected_count();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (f.positions.size() != n || f.confidences.size() != n)
      throw ValidationError("frame " + std::to_string(i) + ": joint count does not match topology");
    if (!(f.timestamp >= 0.0) || !std::isfinite(f.timestamp))
      throw ValidationError("frame " + std::to_string(i) + ": negative or non-finite timestamp");
    for (double c : f.confidences)
      if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("frame " + std::to_string(i) + ": confidence outside [0,1]");
    if (i > 0) {
      if (!(f.timestamp > frames[i - 1].timestamp))
        throw ValidationError("frame " + std::to_string(i) + ": timestamps not strictly increasing");
      if (f.frame != frames[0].frame) throw ValidationError("frames mix coordinate frames");
    }
  }
}

std::string_view to_string(PostureClass c) {
  switch (c) {
    case PostureClass::P1_StandingWalking: return "P1_StandingWalking";
    case PostureClass::P3_BentForward: return "P3_BentForward";
    case PostureClass::P4_StronglyBentForward: return "P4_StronglyBentForward";
    case PostureClass::P5_ElbowAtAboveShoulder: return "P5_ElbowAtAboveShoulder";
    case PostureClass::P6_HandsAboveHead: return "P6_HandsAboveHead";
    case PostureClass::TrunkRotation: return "TrunkRotation";
    case PostureClass::LateralBending: return "LateralBending";
  }
  return "unknown";
}

std::optional<PostureClass> parse_posture_class(std::string_view text) {
  for (auto c : kAllPostureClasses)
    if (to_string(c) == text) return c;
  return std::nullopt;
}

}  // namespace worksight
