#include "worksight/metrics.hpp"

#include "worksight/error.hpp"
#include "worksight/pose_stream.hpp"
#include "worksight/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace worksight::metrics {

namespace {

struct ResolvedMap {
  std::vector<std::string> names;
  std::vector<std::size_t> pred;
  std::vector<std::size_t> gt;
};

ResolvedMap resolve(const PoseSequence& pred, const PoseSequence& gt, const JointMap& map) {
  if (map.pairs.empty()) throw ValidationError("joint map is empty");
  if (pred.frames.size() != gt.frames.size())
    throw ValidationError("length mismatch after alignment: " + std::to_string(pred.frames.size()) + " vs " +
                          std::to_string(gt.frames.size()) + " frames");
  if (pred.frames.empty()) throw ValidationError("no frames to evaluate");
  ResolvedMap r;
  for (const auto& [p, g] : map.pairs) {
    const auto pi = pred.topology.index_of(p);
    const auto gi = gt.topology.index_of(g);
    if (!pi || !gi) throw ValidationError("unmapped joint: '" + p + "' -> '" + g + "'");
    r.names.push_back(p);
    r.pred.push_back(*pi);
    r.gt.push_back(*gi);
  }
  return r;
}

double error_mm(const PoseSequence& pred, const PoseSequence& gt, std::size_t frame, std::size_t pj, std::size_t gj) {
  return (pred.frames[frame].positions[pj] - gt.frames[frame].positions[gj]).norm() * 1000.0;
}

/// Name shared by a left/right joint pair, or empty when unpaired.
std::string pair_stem(const std::string& joint) {
  for (const auto& [l, r] : std::vector<std::pair<std::string, std::string>>{{"l_", "r_"}, {"Left", "Right"}})
    if (joint.starts_with(l) || joint.starts_with(r))
      return joint.substr(joint.starts_with(l) ? l.size() : r.size());
  if (joint.size() > 1 && (joint[0] == 'L' || joint[0] == 'R') && std::isupper(static_cast<unsigned char>(joint[1])))
    return joint.substr(1);
  return {};
}

}  // namespace

JointMap JointMap::identity(const SkeletonTopology& topology) {
  JointMap m;
  for (const auto& j : topology.joints()) m.pairs.emplace_back(j, j);
  return m;
}

JointMap JointMap::body15_to_mocap24() {
  return {{{"hip", "Hips"},
           {"neck", "Neck"},
           {"head", "Head"},
           {"r_shoulder", "RightArm"},
           {"r_elbow", "RightForeArm"},
           {"r_wrist", "RightHand"},
           {"l_shoulder", "LeftArm"},
           {"l_elbow", "LeftForeArm"},
           {"l_wrist", "LeftHand"},
           {"r_hip", "RightUpLeg"},
           {"r_knee", "RightLeg"},
           {"r_ankle", "RightFoot"},
           {"l_hip", "LeftUpLeg"},
           {"l_knee", "LeftLeg"},
           {"l_ankle", "LeftFoot"}}};
}

JointMap JointMap::for_topologies(const SkeletonTopology& pred, const SkeletonTopology& gt) {
  bool all = true;
  for (const auto& j : pred.joints()) all = all && gt.index_of(j).has_value();
  if (all) return identity(pred);
  auto table = body15_to_mocap24();
  for (const auto& [p, g] : table.pairs)
    if (!pred.index_of(p) || !gt.index_of(g))
      throw ValidationError("no joint map between topologies '" + pred.name() + "' and '" + gt.name() + "'");
  return table;
}

JointMap JointMap::parse(const std::string& content) {
  JointMap m;
  for (const auto& raw : text::split_lines(content)) {
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto f = text::split_fields(line, ',');
    if (f.size() != 2 || f[0].empty() || f[1].empty()) throw ValidationError("joint map line needs 'pred,gt'");
    m.pairs.emplace_back(f[0], f[1]);
  }
  return m;
}

std::vector<std::pair<std::size_t, std::size_t>> align_by_time(const PoseSequence& pred, const PoseSequence& gt,
                                                               double max_gap_s) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (gt.frames.empty()) return out;
  std::size_t g = 0;
  for (std::size_t p = 0; p < pred.frames.size(); ++p) {
    const double t = pred.frames[p].timestamp;
    while (g + 1 < gt.frames.size() &&
           std::abs(gt.frames[g + 1].timestamp - t) <= std::abs(gt.frames[g].timestamp - t))
      ++g;
    if (std::abs(gt.frames[g].timestamp - t) <= max_gap_s) out.emplace_back(p, g);
  }
  return out;
}

std::pair<PoseSequence, PoseSequence> time_aligned(const PoseSequence& pred, const PoseSequence& gt, double max_gap_s) {
  PoseSequence a{pred.topology, {}, pred.rate_hz};
  PoseSequence b{gt.topology, {}, pred.rate_hz};
  for (const auto& [p, g] : align_by_time(pred, gt, max_gap_s)) {
    a.frames.push_back(pred.frames[p]);
    b.frames.push_back(gt.frames[g]);
  }
  return {std::move(a), std::move(b)};
}

PoseSequence root_align(const PoseSequence& seq, const std::string& root_joint) {
  const auto root = seq.topology.require(root_joint);
  PoseSequence out{seq.topology, {}, seq.rate_hz};
  out.frames.reserve(seq.frames.size());
  for (const auto& f : seq.frames) out.frames.push_back(to_body_frame(f, root));
  return out;
}

JointErrorTable mpjpe(const PoseSequence& pred, const PoseSequence& gt, const JointMap& map) {
  return evaluate_poses(pred, gt, map, kPckThresholdMm);
}

PckResult pck(const PoseSequence& pred, const PoseSequence& gt, const JointMap& map, double threshold_mm) {
  const auto r = resolve(pred, gt, map);
  PckResult out;
  std::size_t hits_total = 0;
  for (std::size_t j = 0; j < r.names.size(); ++j) {
    std::size_t hits = 0;
    for (std::size_t f = 0; f < pred.frames.size(); ++f)
      if (error_mm(pred, gt, f, r.pred[j], r.gt[j]) <= threshold_mm) ++hits;
    out.per_joint.emplace_back(r.names[j], static_cast<double>(hits) / static_cast<double>(pred.frames.size()));
    hits_total += hits;
  }
  out.overall = static_cast<double>(hits_total) / static_cast<double>(pred.frames.size() * r.names.size());
  return out;
}

JointErrorTable evaluate_poses(const PoseSequence& pred, const PoseSequence& gt, const JointMap& map,
                               double threshold_mm) {
  const auto r = resolve(pred, gt, map);
  const std::size_t frames = pred.frames.size();
  JointErrorTable table;
  table.threshold_mm = threshold_mm;
  double err_sum = 0.0;
  std::size_t hit_sum = 0;
  for (std::size_t j = 0; j < r.names.size(); ++j) {
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t f = 0; f < frames; ++f) {
      const double e = error_mm(pred, gt, f, r.pred[j], r.gt[j]);
      sum += e;
      if (e <= threshold_mm) ++hits;
    }
    table.joints.push_back({r.names[j], sum / static_cast<double>(frames),
                            static_cast<double>(hits) / static_cast<double>(frames), frames});
    err_sum += sum;
    hit_sum += hits;
  }
  const double n = static_cast<double>(frames * r.names.size());
  table.mean_mpjpe_mm = err_sum / n;
  table.mean_pck = static_cast<double>(hit_sum) / n;

  std::vector<std::string> order;
  std::map<std::string, std::vector<const JointError*>> groups;
  for (const auto& je : table.joints) {
    auto stem = pair_stem(je.joint);
    const std::string key = stem.empty() ? je.joint : "L/R " + stem;
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&je);
  }
  for (const auto& stem : order) {
    JointError avg{groups[stem].size() == 1 ? groups[stem].front()->joint : stem, 0.0, 0.0, 0};
    for (const auto* je : groups[stem]) {
      avg.mpjpe_mm += je->mpjpe_mm;
      avg.pck += je->pck;
      avg.samples += je->samples;
    }
    avg.mpjpe_mm /= static_cast<double>(groups[stem].size());
    avg.pck /= static_cast<double>(groups[stem].size());
    table.pairs.push_back(avg);
  }
  return table;
}

ConfusionMatrix::ConfusionMatrix(std::size_t n_classes, std::vector<std::string> names)
    : n_(n_classes), names_(std::move(names)), counts_(n_classes * n_classes, 0) {
  if (names_.empty())
    for (std::size_t i = 0; i < n_; ++i) names_.push_back(std::to_string(i));
  if (names_.size() != n_) throw ValidationError("confusion matrix: class name count mismatch");
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
  if (truth >= n_ || predicted >= n_) throw ValidationError("label out of range");
  ++counts_[truth * n_ + predicted];
}

long long ConfusionMatrix::row_sum(std::size_t truth) const {
  long long s = 0;
  for (std::size_t p = 0; p < n_; ++p) s += at(truth, p);
  return s;
}

long long ConfusionMatrix::col_sum(std::size_t predicted) const {
  long long s = 0;
  for (std::size_t t = 0; t < n_; ++t) s += at(t, predicted);
  return s;
}

long long ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), 0LL); }

ClassificationScores classification_scores(const std::vector<int>& predictions, const std::vector<int>& labels,
                                           std::size_t n_classes, std::vector<std::string> names) {
  if (predictions.size() != labels.size()) throw ValidationError("prediction/label count mismatch");
  if (n_classes == 0) throw ValidationError("need at least one class");
  ClassificationScores s;
  s.confusion = ConfusionMatrix(n_classes, std::move(names));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || predictions[i] < 0) throw ValidationError("label out of range");
    s.confusion.add(static_cast<std::size_t>(labels[i]), static_cast<std::size_t>(predictions[i]));
  }
  const auto total = static_cast<double>(labels.size());
  long long correct = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    const long long tp = s.confusion.at(c, c);
    const long long fp = s.confusion.col_sum(c) - tp;
    const long long fn = s.confusion.row_sum(c) - tp;
    const long long tn = static_cast<long long>(labels.size()) - tp - fp - fn;
    correct += tp;
    const double acc = total > 0 ? static_cast<double>(tp + tn) / total : 0.0;
    const double prec = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double rec = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    s.accuracy.push_back(acc);
    s.precision.push_back(prec);
    s.recall.push_back(rec);
    s.f1.push_back(prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0);
  }
  const auto mean = [&](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  s.mean_accuracy = mean(s.accuracy);
  s.mean_precision = mean(s.precision);
  s.macro_recall = mean(s.recall);
  s.macro_f1 = mean(s.f1);
  s.overall_accuracy = total > 0 ? static_cast<double>(correct) / total : 0.0;
  return s;
}

RocResult roc_auc_macro(const std::vector<std::vector<double>>& scores, const std::vector<int>& labels,
                        std::size_t n_classes) {
  if (scores.size() != labels.size()) throw ValidationError("score/label count mismatch");
  for (const auto& row : scores) {
    if (row.size() != n_classes) throw ValidationError("score row has wrong class count");
    for (double v : row)
      if (!std::isfinite(v)) throw ValidationError("non-finite score");
  }
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes) throw ValidationError("label out of range");

  RocResult out;
  double auc_sum = 0.0;
  std::vector<std::size_t> idx(labels.size());
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::size_t pos = 0;
    for (int l : labels) pos += static_cast<std::size_t>(l) == c;
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) {
      out.skipped.push_back(c);
      continue;
    }
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a][c] > scores[b][c]; });

    RocCurve curve;
    curve.class_index = c;
    curve.points.emplace_back(0.0, 0.0);
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (std::size_t i = 0; i < idx.size();) {
      const double threshold = scores[idx[i]][c];
      while (i < idx.size() && scores[idx[i]][c] == threshold) {
        if (static_cast<std::size_t>(labels[idx[i]]) == c) ++tp;
        else ++fp;
        ++i;
      }
      curve.points.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                                static_cast<double>(tp) / static_cast<double>(pos));
    }
    for (std::size_t k = 1; k < curve.points.size(); ++k) {
      const auto& [x0, y0] = curve.points[k - 1];
      const auto& [x1, y1] = curve.points[k];
      curve.auc += (x1 - x0) * (y0 + y1) * 0.5;
    }
    auc_sum += curve.auc;
    out.curves.push_back(std::move(curve));
  }
  out.macro_auc = out.curves.empty() ? std::numeric_limits<double>::quiet_NaN()
                                     : auc_sum / static_cast<double>(out.curves.size());
  return out;
}

std::string write_joint_table(const JointErrorTable& table) {
  using text::format_number;
  std::string out = "joint,MPJPE [mm],PCK@" + format_number(table.threshold_mm) + "\n";
  for (const auto& j : table.pairs)
    out += j.joint + "," + format_number(j.mpjpe_mm) + "," + format_number(j.pck) + "\n";
  out += "mean," + format_number(table.mean_mpjpe_mm) + "," + format_number(table.mean_pck) + "\n";
  return out;
}

std::string write_classification_table(const ClassificationScores& s) {
  using text::format_number;
  std::string out = "metric";
  for (const auto& n : s.confusion.names()) out += "," + n;
  out += ",mean\n";
  auto row = [&](const char* name, const std::vector<double>& v, double mean) {
    out += name;
    for (double x : v) out += "," + format_number(x);
    out += "," + format_number(mean) + "\n";
  };
  row("accuracy", s.accuracy, s.mean_accuracy);
  row("precision", s.precision, s.mean_precision);
  row("recall", s.recall, s.macro_recall);
  row("f1", s.f1, s.macro_f1);
  return out;
}

std::string write_confusion(const ConfusionMatrix& cm) {
  std::string out = "truth\\predicted";
  for (const auto& n : cm.names()) out += "," + n;
  out += "\n";
  for (std::size_t t = 0; t < cm.size(); ++t) {
    out += cm.names()[t];
    for (std::size_t p = 0; p < cm.size(); ++p) out += "," + std::to_string(cm.at(t, p));
    out += "\n";
  }
  return out;
}

std::string write_roc(const RocResult& roc) {
  using text::format_number;
  std::string out = "class,fpr,tpr\n";
  for (const auto& c : roc.curves)
    for (const auto& [x, y] : c.points)
      out += std::to_string(c.class_index) + "," + format_number(x) + "," + format_number(y) + "\n";
  out += "# auc";
  for (const auto& c : roc.curves) out += " " + std::to_string(c.class_index) + ":" + format_number(c.auc);
  out += " macro:" + (std::isnan(roc.macro_auc) ? std::string("nan") : format_number(roc.macro_auc)) + "\n";
  return out;
}

}  // namespace worksight::metrics
