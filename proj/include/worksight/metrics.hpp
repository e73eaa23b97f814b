#pragma once

#include "worksight/types.hpp"

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace worksight::metrics {

/// Pairs of (predicted-skeleton joint, ground-truth joint) compared by the
/// pose metrics.
struct JointMap {
  std::vector<std::pair<std::string, std::string>> pairs;

  static JointMap identity(const SkeletonTopology& topology);
  /// Estimated 15-joint skeleton against the 24-joint motion-capture rig.
  static JointMap body15_to_mocap24();
  /// identity() when `gt` names every `pred` joint, else the declared table
  /// for known topology pairs.
  static JointMap for_topologies(const SkeletonTopology& pred, const SkeletonTopology& gt);
  /// "pred_joint,gt_joint" per line; '#' comments allowed.
  static JointMap parse(const std::string& content);
};

inline constexpr double kPckThresholdMm = 150.0;

struct JointError {
  std::string joint;
  double mpjpe_mm = 0.0;
  double pck = 0.0;
  std::size_t samples = 0;
};

struct JointErrorTable {
  std::vector<JointError> joints;  // per mapped joint, in map order
  std::vector<JointError> pairs;   // left/right joints averaged, unpaired joints as-is
  double mean_mpjpe_mm = 0.0;
  double mean_pck = 0.0;
  double threshold_mm = kPckThresholdMm;
};

/// Index pairs (pred frame, gt frame) matching each prediction to the
/// ground-truth frame nearest in time, dropping pairs further apart than
/// `max_gap_s`.
std::vector<std::pair<std::size_t, std::size_t>> align_by_time(const PoseSequence& pred, const PoseSequence& gt,
                                                               double max_gap_s);

/// Builds two equal-length sequences from the time pairing.
std::pair<PoseSequence, PoseSequence> time_aligned(const PoseSequence& pred, const PoseSequence& gt, double max_gap_s);

/// Re-expresses every frame relative to `root_joint`.
PoseSequence root_align(const PoseSequence& seq, const std::string& root_joint);

/// Mean Euclidean error per joint in millimeters over frame-paired sequences
/// (frame i of pred against frame i of gt). The pck fields are filled at
/// kPckThresholdMm.
JointErrorTable mpjpe(const PoseSequence& pred, const PoseSequence& gt, const JointMap& map);

struct PckResult {
  std::vector<std::pair<std::string, double>> per_joint;
  double overall = 0.0;
};

/// Fraction of joint-frame pairs with error <= threshold_mm.
PckResult pck(const PoseSequence& pred, const PoseSequence& gt, const JointMap& map,
              double threshold_mm = kPckThresholdMm);

/// mpjpe and pck together, pck at `threshold_mm`.
JointErrorTable evaluate_poses(const PoseSequence& pred, const PoseSequence& gt, const JointMap& map,
                               double threshold_mm = kPckThresholdMm);

class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  ConfusionMatrix(std::size_t n_classes, std::vector<std::string> names = {});

  void add(std::size_t truth, std::size_t predicted);
  long long at(std::size_t truth, std::size_t predicted) const { return counts_[truth * n_ + predicted]; }
  long long row_sum(std::size_t truth) const;
  long long col_sum(std::size_t predicted) const;
  long long total() const;
  std::size_t size() const { return n_; }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::size_t n_ = 0;
  std::vector<std::string> names_;
  std::vector<long long> counts_;
};

struct ClassificationScores {
  std::vector<double> accuracy;   // one-vs-rest (TP+TN)/N
  std::vector<double> precision;  // TP/(TP+FP), 0 when nothing predicted
  std::vector<double> recall;     // TP/(TP+FN), 0 when class absent
  std::vector<double> f1;
  double mean_accuracy = 0.0;
  double mean_precision = 0.0;  // reported as mAP
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double overall_accuracy = 0.0;  // fraction of exact matches
  ConfusionMatrix confusion;
};

ClassificationScores classification_scores(const std::vector<int>& predictions, const std::vector<int>& labels,
                                           std::size_t n_classes, std::vector<std::string> names = {});

struct RocCurve {
  std::size_t class_index = 0;
  std::vector<std::pair<double, double>> points;  // (false positive rate, true positive rate)
  double auc = 0.0;
};

struct RocResult {
  std::vector<RocCurve> curves;
  std::vector<std::size_t> skipped;  // classes lacking positives or negatives
  double macro_auc = 0.0;            // NaN when every class was skipped
};

/// One-vs-rest ROC per class from a threshold sweep over distinct scores,
/// trapezoidal AUC, unweighted macro mean.
RocResult roc_auc_macro(const std::vector<std::vector<double>>& scores, const std::vector<int>& labels,
                        std::size_t n_classes);

std::string write_joint_table(const JointErrorTable& table);
std::string write_classification_table(const ClassificationScores& scores);
std::string write_confusion(const ConfusionMatrix& cm);
std::string write_roc(const RocResult& roc);

}  // namespace worksight::metrics
