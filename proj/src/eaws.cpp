#include "worksight/eaws.hpp"

#include "worksight/annotations.hpp"
#include "worksight/error.hpp"
#include "worksight/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <map>

namespace worksight::eaws {

namespace {

std::size_t first_of(const SkeletonTopology& topo, std::initializer_list<const char*> names, const char* role) {
  for (const char* n : names)
    if (auto idx = topo.index_of(n)) return *idx;
  throw ValidationError("topology '" + topo.name() + "' is missing the " + role + " joint");
}

Vec3 horizontal(const Vec3& v) { return {v.x(), v.y(), 0.0}; }

double angle_deg(const Vec3& a, const Vec3& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return rad2deg(std::atan2(a.cross(b).norm(), a.dot(b)));
}

}  // namespace

std::array<double, PostureFeatures::kDim> PostureFeatures::as_array() const {
  return {trunk_flexion_deg,      trunk_rotation_deg,     lateral_bend_deg,   elbow_above_shoulder_l,
          elbow_above_shoulder_r, wrist_above_head_l,     wrist_above_head_r, root_speed_mps};
}

JointRoles JointRoles::resolve(const SkeletonTopology& t) {
  JointRoles r{};
  r.pelvis = first_of(t, {"hip", "Hips", "MidHip", "pelvis"}, "pelvis");
  r.neck = first_of(t, {"neck", "Neck"}, "neck");
  r.head = first_of(t, {"head", "Head", "Nose"}, "head");
  r.l_shoulder = first_of(t, {"l_shoulder", "LeftArm", "LShoulder"}, "left shoulder");
  r.r_shoulder = first_of(t, {"r_shoulder", "RightArm", "RShoulder"}, "right shoulder");
  r.l_elbow = first_of(t, {"l_elbow", "LeftForeArm", "LElbow"}, "left elbow");
  r.r_elbow = first_of(t, {"r_elbow", "RightForeArm", "RElbow"}, "right elbow");
  r.l_wrist = first_of(t, {"l_wrist", "LeftHand", "LWrist"}, "left wrist");
  r.r_wrist = first_of(t, {"r_wrist", "RightHand", "RWrist"}, "right wrist");
  r.l_hip = first_of(t, {"l_hip", "LeftUpLeg", "LHip"}, "left hip");
  r.r_hip = first_of(t, {"r_hip", "RightUpLeg", "RHip"}, "right hip");
  return r;
}

std::vector<PostureFeatures> extract_features(const PoseSequence& seq, const FeatureParams& params) {
  const auto roles = JointRoles::resolve(seq.topology);
  const auto& frames = seq.frames;
  std::vector<PostureFeatures> out(frames.size());
  const Vec3 up = Vec3::UnitZ();

  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& p = frames[i].positions;
    auto& f = out[i];
    const Vec3 trunk = p[roles.neck] - p[roles.pelvis];
    f.trunk_flexion_deg = angle_deg(trunk, up);

    const Vec3 hip_axis = horizontal(p[roles.l_hip] - p[roles.r_hip]);
    const Vec3 shoulder_axis = horizontal(p[roles.l_shoulder] - p[roles.r_shoulder]);
    f.trunk_rotation_deg = angle_deg(shoulder_axis, hip_axis);
    if (hip_axis.norm() > 1e-12) {
      const Vec3 lateral = hip_axis.normalized();
      f.lateral_bend_deg = rad2deg(std::atan2(std::abs(trunk.dot(lateral)), trunk.dot(up)));
    }

    f.elbow_above_shoulder_l = p[roles.l_elbow].z() - p[roles.l_shoulder].z();
    f.elbow_above_shoulder_r = p[roles.r_elbow].z() - p[roles.r_shoulder].z();
    f.wrist_above_head_l = p[roles.l_wrist].z() - p[roles.head].z();
    f.wrist_above_head_r = p[roles.r_wrist].z() - p[roles.head].z();
  }

  // Root speed: horizontal displacement across a centered span of frames.
  const double half = 0.5 * params.speed_baseline_s;
  std::size_t lo = 0;
  std::size_t hi = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const double t = frames[i].timestamp;
    while (frames[lo].timestamp < t - half - 1e-9) ++lo;
    while (hi + 1 < frames.size() && frames[hi + 1].timestamp <= t + half + 1e-9) ++hi;
    if (hi < i) hi = i;
    const double dt = frames[hi].timestamp - frames[lo].timestamp;
    if (dt > 0.0)
      out[i].root_speed_mps = horizontal(frames[hi].positions[roles.pelvis] - frames[lo].positions[roles.pelvis]).norm() / dt;
  }
  return out;
}

dtw::FeatureSequence to_feature_sequence(const std::vector<PostureFeatures>& features) {
  std::vector<double> values;
  values.reserve(features.size() * PostureFeatures::kDim);
  for (const auto& f : features) {
    const auto a = f.as_array();
    values.insert(values.end(), a.begin(), a.end());
  }
  return dtw::FeatureSequence(PostureFeatures::kDim, std::move(values));
}

PostureSet make_set(std::initializer_list<PostureClass> classes) {
  PostureSet s;
  for (auto c : classes) s.set(index_of(c));
  return s;
}

PostureSet rule_label(const PostureFeatures& f, bool speed_alternates, const RuleThresholds& t) {
  PostureSet s;
  if (f.trunk_flexion_deg >= t.strongly_bent_deg) s.set(index_of(PostureClass::P4_StronglyBentForward));
  else if (f.trunk_flexion_deg >= t.bent_forward_deg) s.set(index_of(PostureClass::P3_BentForward));
  if ((f.elbow_above_shoulder_l > 0.0 || f.elbow_above_shoulder_r > 0.0) && f.trunk_flexion_deg < t.bent_forward_deg)
    s.set(index_of(PostureClass::P5_ElbowAtAboveShoulder));
  if (f.wrist_above_head_l > 0.0 || f.wrist_above_head_r > 0.0) s.set(index_of(PostureClass::P6_HandsAboveHead));
  if (f.trunk_rotation_deg >= t.trunk_rotation_deg) s.set(index_of(PostureClass::TrunkRotation));
  if (f.lateral_bend_deg >= t.lateral_bend_deg) s.set(index_of(PostureClass::LateralBending));
  if (s.none() && speed_alternates) s.set(index_of(PostureClass::P1_StandingWalking));
  return s;
}

std::vector<PostureSet> rule_label_sequence(const std::vector<PostureFeatures>& features,
                                            const std::vector<double>& timestamps, const RuleThresholds& t) {
  if (features.size() != timestamps.size()) throw ValidationError("rule_label_sequence: size mismatch");
  std::vector<PostureSet> out(features.size());
  const double half = 0.5 * t.alternation_horizon_s;
  std::size_t lo = 0;
  std::size_t hi = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    while (timestamps[lo] < timestamps[i] - half - 1e-9) ++lo;
    if (hi < i) hi = i;
    while (hi + 1 < features.size() && timestamps[hi + 1] <= timestamps[i] + half + 1e-9) ++hi;
    bool slow = false;
    bool fast = false;
    for (std::size_t k = lo; k <= hi; ++k) {
      if (features[k].root_speed_mps < t.walking_speed_mps) slow = true;
      else fast = true;
    }
    out[i] = rule_label(features[i], slow && fast, t);
  }
  return out;
}

bool is_valid_duration(double seconds) { return seconds >= kMinValidPostureSeconds - 1e-9; }

PostureSegment make_segment(PostureClass c, double start_s, double end_s) {
  if (!(end_s > start_s)) throw ValidationError("posture segment must have end > start");
  return {c, start_s, end_s, is_valid_duration(end_s - start_s)};
}

std::vector<PostureSegment> merge_segments(std::vector<PostureSegment> segments) {
  std::stable_sort(segments.begin(), segments.end(), [](const auto& a, const auto& b) {
    if (a.posture != b.posture) return index_of(a.posture) < index_of(b.posture);
    return a.start_s < b.start_s;
  });
  std::vector<PostureSegment> out;
  for (const auto& s : segments) {
    if (!out.empty() && out.back().posture == s.posture && s.start_s <= out.back().end_s) {
      out.back().end_s = std::max(out.back().end_s, s.end_s);
    } else {
      out.push_back(s);
    }
  }
  for (auto& s : out) s.valid = is_valid_duration(s.duration());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.start_s != b.start_s) return a.start_s < b.start_s;
    return index_of(a.posture) < index_of(b.posture);
  });
  return out;
}

std::size_t window_count(double duration_s, double window_s, double hop_s) {
  if (!(window_s > 0.0) || !(hop_s > 0.0)) throw ValidationError("window and hop must be positive");
  if (duration_s + 1e-9 < window_s) return 0;
  return static_cast<std::size_t>(std::floor((duration_s - window_s) / hop_s + 1e-9)) + 1;
}

std::vector<PostureSegment> segments_from_windows(const std::vector<WindowResult>& windows, double recording_start_s,
                                                  double recording_end_s, double window_s, double hop_s) {
  const double lead = 0.5 * (window_s - hop_s);
  auto core_start = [&](std::size_t i) { return i == 0 ? recording_start_s : windows[i].start_s + lead; };
  auto core_end = [&](std::size_t i) {
    return i + 1 == windows.size() ? std::min(windows[i].end_s, recording_end_s) : windows[i].end_s - lead;
  };

  std::vector<PostureSegment> out;
  for (auto c : kAllPostureClasses) {
    const std::string label(to_string(c));
    std::size_t i = 0;
    while (i < windows.size()) {
      const auto& act = windows[i].active;
      if (std::find(act.begin(), act.end(), label) == act.end()) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j + 1 < windows.size()) {
        const auto& next = windows[j + 1].active;
        if (std::find(next.begin(), next.end(), label) == next.end()) break;
        ++j;
      }
      out.push_back(make_segment(c, core_start(i), core_end(j)));
      i = j + 1;
    }
  }
  return merge_segments(std::move(out));
}

Detection detect_postures(const PoseSequence& seq, const dtw::ExemplarLibrary& exemplars,
                          const DetectionParams& params) {
  seq.validate();
  exemplars.validate();
  if (seq.frames.empty()) throw ValidationError("detect_postures: empty sequence");
  for (auto c : kAllPostureClasses)
    if (exemplars.count(std::string(to_string(c))) == 0)
      throw ValidationError("missing class in exemplars: " + std::string(to_string(c)));
  if (exemplars.dim() != PostureFeatures::kDim) throw ValidationError("exemplar feature dimension mismatch");

  const double t0 = seq.frames.front().timestamp;
  const double span = seq.frames.back().timestamp - t0 + 1.0 / seq.rate_hz;
  const std::size_t n_windows = window_count(span, params.window_s, params.hop_s);
  if (n_windows == 0)
    throw ValidationError("sequence too short: " + text::format_number(span) + " s < " +
                          text::format_number(params.window_s) + " s window");

  const auto features = to_feature_sequence(extract_features(seq, params.features));
  dtw::ExemplarLibrary lib = exemplars;
  dtw::FeatureSequence query_all = features;
  if (params.standardize) {
    const auto z = dtw::Standardizer::fit(exemplars);
    lib = z.apply(exemplars);
    query_all = z.apply(features);
  }

  std::vector<double> times;
  times.reserve(seq.frames.size());
  for (const auto& f : seq.frames) times.push_back(f.timestamp);

  Detection out;
  for (std::size_t w = 0; w < n_windows; ++w) {
    WindowResult r;
    r.start_s = t0 + static_cast<double>(w) * params.hop_s;
    r.end_s = r.start_s + params.window_s;
    const auto first = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), r.start_s - 1e-9) - times.begin());
    const auto last = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), r.end_s - 1e-9) - times.begin());
    if (last > first) {
      const auto query = query_all.slice(first, last).strided(params.feature_stride);
      const auto cls = dtw::classify_by_alignment(query, lib, params.dtw, params.k);
      r.label = cls.label;
      r.scores = cls.scores;
      double best = 0.0;
      for (const auto& s : cls.scores)
        if (s.label == cls.label) best = s.score;
      for (const auto& s : cls.scores) {
        const bool is_best = s.label == cls.label;
        const bool within = params.multi_label_margin && s.score <= best + *params.multi_label_margin;
        if (is_best || within) r.active.push_back(s.label);
      }
    }
    out.windows.push_back(std::move(r));
  }
  out.segments = segments_from_windows(out.windows, t0, t0 + span, params.window_s, params.hop_s);
  return out;
}

void add_exemplars(dtw::ExemplarLibrary& lib, const PoseSequence& seq,
                   const std::vector<AnnotationSegment>& posture_intervals, const ExemplarParams& params) {
  seq.validate();
  if (seq.frames.empty()) throw ValidationError("add_exemplars: empty sequence");
  const auto features = to_feature_sequence(extract_features(seq, params.features));
  std::vector<double> times;
  for (const auto& f : seq.frames) times.push_back(f.timestamp);

  auto cut = [&](double start, double end) -> std::optional<dtw::FeatureSequence> {
    const auto first = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), start - 1e-9) - times.begin());
    const auto last = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), end - 1e-9) - times.begin());
    if (last <= first) return std::nullopt;
    return features.slice(first, last).strided(params.feature_stride);
  };

  // Candidate windows per label, thinned evenly to max_per_class.
  std::map<std::string, std::vector<std::pair<double, double>>> candidates;
  std::vector<std::string> order;
  auto note = [&](const std::string& label, double s, double e) {
    if (!candidates.count(label)) order.push_back(label);
    candidates[label].emplace_back(s, e);
  };

  for (const auto& p : posture_intervals) {
    if (p.kind != AnnotationKind::posture || !is_valid_duration(p.end_s - p.start_s)) continue;
    const double len = p.end_s - p.start_s;
    if (len <= params.window_s + 1e-9) {
      note(p.label, p.start_s, p.end_s);
      continue;
    }
    for (double s = p.start_s; s + params.window_s <= p.end_s + 1e-9; s += params.hop_s)
      note(p.label, s, s + params.window_s);
  }

  // Neutral stretches: clear of every posture interval by the margin.
  std::vector<std::pair<double, double>> busy;
  for (const auto& p : posture_intervals)
    busy.emplace_back(p.start_s - params.neutral_margin_s, p.end_s + params.neutral_margin_s);
  std::sort(busy.begin(), busy.end());
  double cursor = times.front();
  auto neutral_gap = [&](double gap_start, double gap_end) {
    for (double s = gap_start; s + params.window_s <= gap_end + 1e-9; s += params.window_s)
      note(kNeutralLabel, s, s + params.window_s);
  };
  for (const auto& [bs, be] : busy) {
    if (bs > cursor) neutral_gap(cursor, bs);
    cursor = std::max(cursor, be);
  }
  neutral_gap(cursor, times.back());

  for (const auto& label : order) {
    const auto& all = candidates[label];
    const std::size_t take = std::min(all.size(), params.max_per_class);
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t pick = take == all.size() ? i : (i * all.size()) / take;
      if (auto seq_cut = cut(all[pick].first, all[pick].second)) lib.add(label, std::move(*seq_cut));
    }
  }
}

double EawsMinuteReport::apportioned_total() const {
  double sum = 0.0;
  for (const auto& row : rows)
    for (const auto& t : row.tallies) sum += t.duration_s;
  for (const auto& t : unassigned.tallies) sum += t.duration_s;
  return sum;
}

EawsMinuteReport aggregate_report(const std::vector<PostureSegment>& segments,
                                  const std::vector<AnnotationSegment>& subgoals, double cycle_duration_s) {
  if (!(cycle_duration_s > 0.0)) throw ValidationError("cycle duration must be positive");
  std::vector<AnnotationSegment> sorted;
  for (const auto& s : subgoals)
    if (s.kind == AnnotationKind::subgoal) sorted.push_back(s);
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start_s < b.start_s; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].start_s < sorted[i - 1].end_s)
      throw ValidationError("overlapping subgoals: '" + sorted[i - 1].label + "' and '" + sorted[i].label + "'");

  EawsMinuteReport report;
  report.cycle_duration_s = cycle_duration_s;
  report.unassigned.subgoal = "(unassigned)";
  for (const auto& s : sorted) report.rows.push_back({s.label, s.start_s, s.end_s, {}});

  for (const auto& seg : segments) {
    if (!seg.valid) continue;
    const std::size_t c = index_of(seg.posture);
    double assigned = 0.0;
    for (auto& row : report.rows) {
      const double overlap = std::min(seg.end_s, row.end_s) - std::max(seg.start_s, row.start_s);
      if (overlap <= 0.0) continue;
      row.tallies[c].duration_s += overlap;
      row.tallies[c].occurrences += 1;
      assigned += overlap;
    }
    const double rest = seg.duration() - assigned;
    if (rest > 0.0) {
      report.unassigned.tallies[c].duration_s += rest;
      report.unassigned.tallies[c].occurrences += 1;
    }
    report.totals[c].duration_s += seg.duration();
    report.totals[c].occurrences += 1;
  }
  const double minutes = cycle_duration_s / 60.0;
  for (std::size_t c = 0; c < kPostureClassCount; ++c) report.seconds_per_minute[c] = report.totals[c].duration_s / minutes;
  return report;
}

std::string write_report(const EawsMinuteReport& report) {
  using text::format_number;
  std::string out = "Subgoal,Start [s],End [s]";
  for (auto c : kAllPostureClasses) {
    const auto title = posture_column_title(c);
    out += "," + title + " occurrences," + title + " duration [s]";
  }
  out += "\n";
  auto emit = [&](const std::string& name, const std::string& start, const std::string& end,
                  const std::array<ClassTally, kPostureClassCount>& tallies) {
    out += name + "," + start + "," + end;
    for (const auto& t : tallies) out += "," + std::to_string(t.occurrences) + "," + format_number(t.duration_s);
    out += "\n";
  };
  for (const auto& row : report.rows) emit(row.subgoal, format_number(row.start_s), format_number(row.end_s), row.tallies);
  bool any_unassigned = false;
  for (const auto& t : report.unassigned.tallies) any_unassigned = any_unassigned || t.occurrences > 0;
  if (any_unassigned) emit(report.unassigned.subgoal, "", "", report.unassigned.tallies);
  emit("Task cycle", "0", format_number(report.cycle_duration_s), report.totals);

  const double minutes = report.cycle_duration_s / 60.0;
  out += "Per minute,,";
  for (std::size_t c = 0; c < kPostureClassCount; ++c)
    out += "," + format_number(report.totals[c].occurrences / minutes) + "," + format_number(report.seconds_per_minute[c]);
  out += "\n";
  return out;
}

std::string write_segments(const std::vector<PostureSegment>& segments) {
  std::string out = "class,start_s,end_s,duration_s,valid\n";
  for (const auto& s : segments)
    out += std::string(to_string(s.posture)) + "," + text::format_number(s.start_s) + "," +
           text::format_number(s.end_s) + "," + text::format_number(s.duration()) + "," + (s.valid ? "1" : "0") + "\n";
  return out;
}

std::string write_windows(const std::vector<WindowResult>& windows) {
  std::string out = "window,start_s,end_s,label";
  if (!windows.empty())
    for (const auto& s : windows.front().scores) out += ",score_" + s.label;
  out += "\n";
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    out += std::to_string(i) + "," + text::format_number(w.start_s) + "," + text::format_number(w.end_s) + "," +
           (w.label.empty() ? std::string("-") : w.label);
    for (const auto& s : w.scores) out += "," + text::format_number(s.score);
    out += "\n";
  }
  return out;
}

}  // namespace worksight::eaws
