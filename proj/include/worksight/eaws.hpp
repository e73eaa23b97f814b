#pragma once

#include "worksight/soft_dtw.hpp"
#include "worksight/types.hpp"

#include <array>
#include <bitset>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace worksight::eaws {

/// Per-frame posture descriptors in the global (Z-up) frame.
struct PostureFeatures {
  double trunk_flexion_deg = 0.0;   // pelvis->neck vs vertical
  double trunk_rotation_deg = 0.0;  // shoulder axis vs hip axis, horizontal plane
  double lateral_bend_deg = 0.0;    // trunk tilt within the frontal plane
  double elbow_above_shoulder_l = 0.0;  // elbow height minus shoulder height (m)
  double elbow_above_shoulder_r = 0.0;
  double wrist_above_head_l = 0.0;  // wrist height minus head height (m)
  double wrist_above_head_r = 0.0;
  double root_speed_mps = 0.0;  // horizontal pelvis speed

  static constexpr std::size_t kDim = 8;
  std::array<double, kDim> as_array() const;
};

/// Joint indices the feature extractor needs, resolved by name for the
/// built-in topologies.
struct JointRoles {
  std::size_t pelvis, neck, head;
  std::size_t l_shoulder, r_shoulder, l_elbow, r_elbow, l_wrist, r_wrist, l_hip, r_hip;

  static JointRoles resolve(const SkeletonTopology& topology);
};

struct FeatureParams {
  double speed_baseline_s = 0.5;  // finite-difference span for root speed
};

std::vector<PostureFeatures> extract_features(const PoseSequence& seq, const FeatureParams& params = {});
dtw::FeatureSequence to_feature_sequence(const std::vector<PostureFeatures>& features);

/// Screening thresholds for the rule-based reference labeler.
struct RuleThresholds {
  double bent_forward_deg = 20.0;
  double strongly_bent_deg = 60.0;
  double trunk_rotation_deg = 20.0;
  double lateral_bend_deg = 20.0;
  double walking_speed_mps = 0.2;
  double alternation_horizon_s = 4.0;
};

using PostureSet = std::bitset<kPostureClassCount>;

inline bool contains(const PostureSet& s, PostureClass c) { return s.test(index_of(c)); }
PostureSet make_set(std::initializer_list<PostureClass> classes);

/// Rule labels for one frame. Standing & walking needs temporal context and
/// fires only when `speed_alternates` is set and no other class fires.
PostureSet rule_label(const PostureFeatures& f, bool speed_alternates = false, const RuleThresholds& t = {});

/// rule_label per frame, with speed alternation judged over a centered
/// horizon of frames.
std::vector<PostureSet> rule_label_sequence(const std::vector<PostureFeatures>& features,
                                            const std::vector<double>& timestamps, const RuleThresholds& t = {});

struct PostureSegment {
  PostureClass posture = PostureClass::P1_StandingWalking;
  double start_s = 0.0;
  double end_s = 0.0;
  bool valid = false;

  double duration() const { return end_s - start_s; }
  bool operator==(const PostureSegment&) const = default;
};

/// Segments held at least 4 s count; a 1e-9 s slack absorbs rounding in
/// window arithmetic.
bool is_valid_duration(double seconds);
PostureSegment make_segment(PostureClass c, double start_s, double end_s);

/// Joins touching or overlapping segments of the same class and recomputes
/// validity. Idempotent.
std::vector<PostureSegment> merge_segments(std::vector<PostureSegment> segments);

/// floor((T - window) / hop) + 1 for T >= window, else 0.
std::size_t window_count(double duration_s, double window_s = 8.0, double hop_s = 4.0);

struct DetectionParams {
  double window_s = 8.0;
  double hop_s = 4.0;
  dtw::SoftDtwParams dtw{0.1};
  std::size_t k = 3;
  std::size_t feature_stride = 3;  // frames skipped when aligning (30 Hz -> 10 Hz)
  bool standardize = true;
  // Multi-label switch: every class whose score is within this margin of the
  // best score is also active in the window. Unset = argmin only.
  std::optional<double> multi_label_margin;
  FeatureParams features;
};

struct WindowResult {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string label;
  std::vector<dtw::ClassScore> scores;
  std::vector<std::string> active;  // labels emitted for this window
};

struct Detection {
  std::vector<WindowResult> windows;
  std::vector<PostureSegment> segments;
};

/// Slides 8 s windows at a 4 s hop, classifies each by soft-DTW against the
/// exemplar library and merges consecutive windows of the same class.
/// A window run i..j spans from the middle of its first window's leading
/// overlap to the middle of its last window's trailing overlap (the first
/// and last windows of the recording extend to the recording bounds).
/// Library labels that are not posture classes (e.g. "Neutral") produce
/// no segments.
Detection detect_postures(const PoseSequence& seq, const dtw::ExemplarLibrary& exemplars,
                          const DetectionParams& params = {});

/// Segments from per-window active labels.
std::vector<PostureSegment> segments_from_windows(const std::vector<WindowResult>& windows, double recording_start_s,
                                                  double recording_end_s, double window_s, double hop_s);

inline constexpr const char* kNeutralLabel = "Neutral";

struct ExemplarParams {
  double window_s = 8.0;
  double hop_s = 4.0;
  std::size_t feature_stride = 3;
  std::size_t max_per_class = 6;
  double neutral_margin_s = 1.0;  // clearance from any posture interval
  FeatureParams features;
};

/// Cuts exemplars from annotated posture intervals (>= 4 s; intervals longer
/// than a window yield several windows) plus "Neutral" exemplars from
/// stretches free of any posture. Adds to `lib`.
void add_exemplars(dtw::ExemplarLibrary& lib, const PoseSequence& seq,
                   const std::vector<AnnotationSegment>& posture_intervals, const ExemplarParams& params = {});

struct ClassTally {
  int occurrences = 0;
  double duration_s = 0.0;

  bool operator==(const ClassTally&) const = default;
};

struct ReportRow {
  std::string subgoal;
  double start_s = 0.0;
  double end_s = 0.0;
  std::array<ClassTally, kPostureClassCount> tallies{};
};

struct EawsMinuteReport {
  std::vector<ReportRow> rows;
  ReportRow unassigned;  // valid time outside every subgoal
  std::array<ClassTally, kPostureClassCount> totals{};
  std::array<double, kPostureClassCount> seconds_per_minute{};
  double cycle_duration_s = 0.0;

  double apportioned_total() const;
};

/// Apportions each valid segment to the subgoals it overlaps by interval
/// intersection and counts one occurrence per touched (subgoal, class).
EawsMinuteReport aggregate_report(const std::vector<PostureSegment>& segments,
                                  const std::vector<AnnotationSegment>& subgoals, double cycle_duration_s);

std::string write_report(const EawsMinuteReport& report);
std::string write_segments(const std::vector<PostureSegment>& segments);
std::string write_windows(const std::vector<WindowResult>& windows);

}  // namespace worksight::eaws
