#include "worksight/pipeline.hpp"

#include "worksight/annotations.hpp"
#include "worksight/bvh.hpp"
#include "worksight/error.hpp"
#include "worksight/image_io.hpp"
#include "worksight/text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace worksight::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kBundleTag = "worksight-bundle/1";
constexpr const char* kInterpolated = "interpolated";

struct CameraStream {
  std::string id;
  RigidTransform extrinsic;
  std::vector<PoseRecord> records;  // sorted by timestamp
};

// Records of `stream` whose timestamp lies within half a tick of t.
std::vector<const PoseRecord*> at_tick(const CameraStream& s, double t, double half) {
  std::vector<const PoseRecord*> out;
  auto lo = std::lower_bound(s.records.begin(), s.records.end(), t - half,
                             [](const PoseRecord& r, double x) { return r.pose.timestamp < x; });
  for (auto it = lo; it != s.records.end() && it->pose.timestamp < t + half; ++it) out.push_back(&*it);
  return out;
}

void fill_gaps(PoseSequence& seq, std::vector<std::string>& provenance) {
  const std::size_t n = seq.frames.size();
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < n; ++i)
    if (provenance[i] != kInterpolated) valid.push_back(i);
  if (valid.empty()) throw DataError("no valid pose in any camera view");
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (provenance[i] != kInterpolated) {
      ++next;
      continue;
    }
    const bool has_prev = next > 0;
    const bool has_next = next < valid.size();
    const auto& a = seq.frames[has_prev ? valid[next - 1] : valid[next]];
    const auto& b = seq.frames[has_next ? valid[next] : valid[next - 1]];
    double w = 0.0;
    if (has_prev && has_next) w = (seq.frames[i].timestamp - a.timestamp) / (b.timestamp - a.timestamp);
    auto& f = seq.frames[i];
    f.positions.resize(a.positions.size());
    f.confidences.assign(a.positions.size(), 0.0);  // no measurement behind these frames
    for (std::size_t j = 0; j < a.positions.size(); ++j) f.positions[j] = (1.0 - w) * a.positions[j] + w * b.positions[j];
    f.frame = CoordinateFrame::global;
  }
}

std::vector<DoorObservation> door_from_images(const DatasetManifest& m, double rate_hz, std::vector<std::string>& warnings) {
  struct Source {
    CameraModel cam;
    fs::path depth_dir, mask_dir;
  };
  std::vector<Source> sources;
  for (const auto& [id, depth_dir] : m.recordings.depth_dirs) {
    const auto mask = m.recordings.mask_dirs.find(id);
    if (mask == m.recordings.mask_dirs.end()) {
      warnings.push_back("camera " + id + " has depth frames but no masks; skipped");
      continue;
    }
    sources.push_back({CameraModel::from(m.camera(id)), m.resolve(depth_dir), m.resolve(mask->second)});
  }
  std::vector<DoorObservation> out;
  for (std::size_t i = 0;; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.pgm", i);
    bool any_file = false;
    std::optional<DoorPose> best;
    for (const auto& s : sources) {
      const fs::path dp = s.depth_dir / name;
      const fs::path mp = s.mask_dir / name;
      if (!fs::exists(dp) || !fs::exists(mp)) continue;
      any_file = true;
      try {
        const auto pts = back_project(read_mask_pgm(mp), read_depth_pgm(dp), s.cam);
        auto pose = door_pose(pts, s.cam);
        if (!best || pose.point_count > best->point_count) best = pose;
      } catch (const DataError& e) {
        warnings.push_back(std::string("door frame ") + name + ": " + e.what());
      }
    }
    if (!any_file) break;
    if (best) out.push_back(observe(static_cast<double>(i) / rate_hz, *best));
  }
  return out;
}

json topology_to_json(const SkeletonTopology& t) {
  return {{"name", t.name()}, {"joints", t.joints()}, {"parents", t.parents()}};
}

SkeletonTopology topology_from_json(const json& j) {
  return SkeletonTopology(j.at("name").get<std::string>(), j.at("joints").get<std::vector<std::string>>(),
                          j.at("parents").get<std::vector<int>>());
}

}  // namespace

Bundle ingest(const DatasetManifest& m, const IngestParams& params) {
  validate_manifest(m, true);
  params.policy.validate();
  if (!(params.rate_hz > 0.0)) throw ValidationError("ingest: rate must be positive");
  Bundle b;
  b.workstation = m.workstation;
  const SkeletonTopology& topo = builtin_topology(m.pose_topology);
  const std::size_t root = topo.root();

  std::vector<CameraStream> streams;
  for (const auto& cam : m.cameras) {
    const auto it = m.recordings.pose_streams.find(cam.id);
    if (it == m.recordings.pose_streams.end()) {
      b.warnings.push_back("camera " + cam.id + " has no pose stream");
      continue;
    }
    CameraStream s{cam.id, cam.extrinsic, read_pose_stream(m.resolve(it->second), topo)};
    std::stable_sort(s.records.begin(), s.records.end(),
                     [](const PoseRecord& a, const PoseRecord& c) { return a.pose.timestamp < c.pose.timestamp; });
    for (auto& r : s.records)
      if (r.pose.frame == CoordinateFrame::camera) r.pose = camera_to_global(r.pose, cam.extrinsic);
    streams.push_back(std::move(s));
  }
  double t0 = 0.0, t1 = 0.0;
  bool any = false;
  for (const auto& s : streams) {
    if (s.records.empty()) continue;
    t0 = any ? std::min(t0, s.records.front().pose.timestamp) : s.records.front().pose.timestamp;
    t1 = any ? std::max(t1, s.records.back().pose.timestamp) : s.records.back().pose.timestamp;
    any = true;
  }
  if (!any) throw DataError("no pose records in any camera stream");

  const double dt = 1.0 / params.rate_hz;
  const auto ticks = static_cast<std::size_t>(std::floor((t1 - t0) / dt + 1e-9)) + 1;
  b.poses.topology = topo;
  b.poses.rate_hz = params.rate_hz;
  b.poses.frames.resize(ticks);
  b.provenance.assign(ticks, kInterpolated);
  for (std::size_t k = 0; k < ticks; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    std::vector<CandidatePose> candidates;
    for (const auto& s : streams) {
      const auto recs = at_tick(s, t, 0.5 * dt);
      if (recs.empty()) continue;
      std::vector<PoseFrame> people;
      for (const auto* r : recs) people.push_back(r->pose);
      std::size_t pick = 0;
      if (m.cart_location) {
        pick = select_active_worker_index(people, root, *m.cart_location);
      } else {
        for (std::size_t i = 1; i < people.size(); ++i)
          if (people[i].mean_confidence() > people[pick].mean_confidence()) pick = i;
      }
      candidates.push_back(CandidatePose::from(s.id, people[pick]));
    }
    auto& frame = b.poses.frames[k];
    frame.timestamp = t;
    frame.frame = CoordinateFrame::global;
    if (auto chosen = select_view(candidates, params.policy)) {
      frame.positions = chosen->pose.positions;
      frame.confidences = chosen->pose.confidences;
      b.provenance[k] = chosen->camera_id;
    }
  }
  fill_gaps(b.poses, b.provenance);
  const auto filled = static_cast<std::size_t>(std::count(b.provenance.begin(), b.provenance.end(), kInterpolated));
  if (filled > 0) b.warnings.push_back(std::to_string(filled) + " frames without a valid view were interpolated");

  if (m.recordings.door_series) {
    b.door = read_door_series(m.resolve(*m.recordings.door_series));
  } else if (params.read_door_images && !m.recordings.depth_dirs.empty()) {
    b.door = door_from_images(m, params.rate_hz, b.warnings);
  }
  if (b.door.empty()) b.warnings.push_back("no door measurements");

  if (m.recordings.annotations) b.annotations = parse_annotations(m.resolve(*m.recordings.annotations));
  if (m.recordings.posture_intervals)
    b.posture_intervals = parse_posture_intervals(m.resolve(*m.recordings.posture_intervals));

  if (m.recordings.bvh) {
    const auto rig = bvh::parse_bvh(m.resolve(*m.recordings.bvh));
    auto gt = bvh::to_sequence(rig, bvh::UnitScale(m.bvh_scale), m.bvh_to_global, "mocap");
    if (gt.rate_hz > params.rate_hz + 1e-9) gt = resample(gt, params.rate_hz);
    b.ground_truth = std::move(gt);
  } else {
    b.warnings.push_back("no motion-capture file; bundle has no ground truth");
  }
  return b;
}

void write_bundle(const Bundle& b, const fs::path& dir) {
  fs::create_directories(dir);
  json j;
  j["format"] = kBundleTag;
  j["workstation"] = to_string(b.workstation);
  j["rate_hz"] = b.poses.rate_hz;
  j["topology"] = topology_to_json(b.poses.topology);
  j["poses"] = "poses.csv";
  text::write_file(dir / "poses.csv", write_sequence(b.poses, b.provenance));
  j["door_series"] = "door.csv";
  text::write_file(dir / "door.csv", write_door_series(b.door));
  if (!b.annotations.empty()) {
    j["annotations"] = "annotations.csv";
    text::write_file(dir / "annotations.csv", write_annotations(b.annotations));
  }
  if (!b.posture_intervals.empty()) {
    j["posture_intervals"] = "postures.csv";
    text::write_file(dir / "postures.csv", write_posture_intervals(b.posture_intervals));
  }
  if (b.ground_truth) {
    j["ground_truth"] = {{"file", "ground_truth.csv"},
                         {"rate_hz", b.ground_truth->rate_hz},
                         {"topology", topology_to_json(b.ground_truth->topology)}};
    text::write_file(dir / "ground_truth.csv", write_sequence(*b.ground_truth));
  }
  j["warnings"] = b.warnings;
  text::write_file(dir / "bundle.json", j.dump(2) + "\n");
}

Bundle read_bundle(const fs::path& dir) {
  const fs::path meta = dir / "bundle.json";
  if (!fs::exists(meta)) throw DataError("missing bundle file " + meta.string());
  Bundle b;
  try {
    const json j = json::parse(text::read_file(meta));
    if (j.value("format", std::string()) != kBundleTag) throw ValidationError("not a worksight bundle: " + meta.string());
    b.workstation = parse_workstation(j.at("workstation").get<std::string>());
    const auto topo = topology_from_json(j.at("topology"));
    const double rate = j.at("rate_hz").get<double>();
    const auto pose_text = text::read_file(dir / j.at("poses").get<std::string>());
    b.poses = parse_sequence(pose_text, topo, rate);
    for (const auto& r : parse_pose_stream(pose_text, topo)) b.provenance.push_back(r.camera_id);
    b.door = read_door_series(dir / j.at("door_series").get<std::string>());
    if (j.contains("annotations")) b.annotations = parse_annotations(dir / j["annotations"].get<std::string>());
    if (j.contains("posture_intervals"))
      b.posture_intervals = parse_posture_intervals(dir / j["posture_intervals"].get<std::string>());
    if (j.contains("ground_truth")) {
      const auto& g = j["ground_truth"];
      b.ground_truth = parse_sequence(text::read_file(dir / g.at("file").get<std::string>()),
                                      topology_from_json(g.at("topology")), g.at("rate_hz").get<double>());
    }
    b.warnings = j.value("warnings", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bundle schema violation: ") + e.what());
  }
  return b;
}

AnalyzeResult analyze(const Bundle& bundle, const dtw::ExemplarLibrary& exemplars, const eaws::DetectionParams& params) {
  if (bundle.poses.frames.empty()) throw ValidationError("analyze: empty bundle");
  AnalyzeResult r;
  r.detection = eaws::detect_postures(bundle.poses, exemplars, params);
  const double t0 = bundle.poses.frames.front().timestamp;
  const double span = bundle.poses.frames.back().timestamp - t0 + 1.0 / bundle.poses.rate_hz;
  r.report = eaws::aggregate_report(r.detection.segments, subgoals_of(bundle.annotations), span);
  return r;
}

}  // namespace worksight::pipeline
