#pragma once

#include "worksight/geometry.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace worksight {

enum class CoordinateFrame { camera, global, body };

std::string_view to_string(CoordinateFrame frame);
CoordinateFrame parse_coordinate_frame(std::string_view text);

/// Named joint tree. Parents are stored by index; the root has parent -1.
class SkeletonTopology {
 public:
  SkeletonTopology() = default;
  SkeletonTopology(std::string name, std::vector<std::string> joints, std::vector<int> parents);

  const std::string& name() const { return name_; }
  const std::vector<std::string>& joints() const { return joints_; }
  const std::vector<int>& parents() const { return parents_; }
  std::size_t expected_count() const { return joints_.size(); }
  std::size_t root() const { return root_; }
  int parent(std::size_t joint) const { return parents_.at(joint); }

  std::optional<std::size_t> index_of(std::string_view joint) const;
  /// Like index_of, but throws ValidationError when the joint is absent.
  std::size_t require(std::string_view joint) const;

  bool operator==(const SkeletonTopology& o) const {
    return name_ == o.name_ && joints_ == o.joints_ && parents_ == o.parents_;
  }

 private:
  std::string name_;
  std::vector<std::string> joints_;
  std::vector<int> parents_;
  std::size_t root_ = 0;
};

/// 15-joint estimated-pose skeleton. Joint 0 ("hip") is the base spine.
const SkeletonTopology& body15_topology();
/// 25-joint 2D detector skeleton (Body25 ordering), rooted at "MidHip".
const SkeletonTopology& body25_topology();
/// 24-joint motion-capture suit skeleton, rooted at "Hips".
const SkeletonTopology& mocap24_topology();
/// Looks up one of the built-in topologies by name.
const SkeletonTopology& builtin_topology(std::string_view name);

struct PoseFrame {
  double timestamp = 0.0;
  std::vector<Vec3> positions;
  std::vector<double> confidences;
  CoordinateFrame frame = CoordinateFrame::global;

  double mean_confidence() const;
};

struct PoseSequence {
  SkeletonTopology topology;
  std::vector<PoseFrame> frames;
  double rate_hz = 30.0;

  double duration() const {
    return frames.empty() ? 0.0 : frames.back().timestamp - frames.front().timestamp;
  }
  /// Throws ValidationError unless joint counts, confidence ranges,
  /// timestamp ordering and frame tags are consistent.
  void validate() const;
};

/// The seven assessed postures, in report column order.
enum class PostureClass {
  P1_StandingWalking,
  P3_BentForward,
  P4_StronglyBentForward,
  P5_ElbowAtAboveShoulder,
  P6_HandsAboveHead,
  TrunkRotation,
  LateralBending,
};

inline constexpr std::size_t kPostureClassCount = 7;
inline constexpr std::array<PostureClass, kPostureClassCount> kAllPostureClasses = {
    PostureClass::P1_StandingWalking,      PostureClass::P3_BentForward,
    PostureClass::P4_StronglyBentForward,  PostureClass::P5_ElbowAtAboveShoulder,
    PostureClass::P6_HandsAboveHead,       PostureClass::TrunkRotation,
    PostureClass::LateralBending,
};

std::string_view to_string(PostureClass c);
std::optional<PostureClass> parse_posture_class(std::string_view text);
inline std::size_t index_of(PostureClass c) { return static_cast<std::size_t>(c); }

/// Postures shorter than this are kept but flagged invalid for assessment.
inline constexpr double kMinValidPostureSeconds = 4.0;

enum class AnnotationKind { subgoal, posture };

struct AnnotationSegment {
  std::string label;
  double start_s = 0.0;
  double end_s = 0.0;
  AnnotationKind kind = AnnotationKind::subgoal;
  // For posture records taken from a per-subgoal table the interval is the
  // subgoal's and the observed duration is stored separately.
  double duration_s = 0.0;
  std::string subgoal;
  bool valid = true;

  bool operator==(const AnnotationSegment&) const = default;
};

}  // namespace worksight
