#include "worksight/pose_stream.hpp"

#include "worksight/error.hpp"
#include "worksight/text_io.hpp"

#include <cmath>
#include <limits>

namespace worksight {

void ViewSelectionPolicy::validate() const {
  if (!(joint_conf_threshold >= 0.0 && joint_conf_threshold <= 1.0))
    throw ValidationError("joint confidence threshold must lie in [0,1]");
  if (!(valid_fraction > 0.0 && valid_fraction <= 1.0)) throw ValidationError("valid fraction must lie in (0,1]");
}

CandidatePose CandidatePose::from(std::string camera_id, PoseFrame pose) {
  CandidatePose c;
  c.camera_id = std::move(camera_id);
  c.mean_confidence = pose.mean_confidence();
  c.pose = std::move(pose);
  return c;
}

bool is_valid(const PoseFrame& pose, const ViewSelectionPolicy& policy) {
  if (pose.confidences.empty()) return false;
  std::size_t confident = 0;
  for (double c : pose.confidences)
    if (c > policy.joint_conf_threshold) ++confident;
  return static_cast<double>(confident) / static_cast<double>(pose.confidences.size()) > policy.valid_fraction;
}

std::optional<CandidatePose> select_view(std::span<const CandidatePose> candidates,
                                         const ViewSelectionPolicy& policy) {
  const CandidatePose* best = nullptr;
  for (const auto& c : candidates) {
    if (!is_valid(c.pose, policy)) continue;
    if (!best || c.mean_confidence > best->mean_confidence) best = &c;
  }
  if (!best) return std::nullopt;
  return *best;
}

std::size_t select_active_worker_index(std::span<const PoseFrame> poses, std::size_t root_joint,
                                       const Vec3& cart_centroid) {
  if (poses.empty()) throw ValidationError("select_active_worker: no poses");
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (root_joint >= poses[i].positions.size()) throw ValidationError("select_active_worker: root joint out of range");
    const double d = (poses[i].positions[root_joint] - cart_centroid).norm();
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return best;
}

const PoseFrame& select_active_worker(std::span<const PoseFrame> poses, std::size_t root_joint,
                                      const Vec3& cart_centroid) {
  return poses[select_active_worker_index(poses, root_joint, cart_centroid)];
}

PoseFrame to_body_frame(const PoseFrame& pose, std::size_t base_joint) {
  if (base_joint >= pose.positions.size()) throw ValidationError("to_body_frame: base spine joint missing");
  PoseFrame out = pose;
  const Vec3 origin = pose.positions[base_joint];
  for (auto& p : out.positions) p -= origin;
  out.positions[base_joint] = Vec3::Zero();
  out.frame = CoordinateFrame::body;
  return out;
}

PoseSequence to_body_frame(const PoseSequence& seq) {
  PoseSequence out;
  out.topology = seq.topology;
  out.rate_hz = seq.rate_hz;
  out.frames.reserve(seq.frames.size());
  for (const auto& f : seq.frames) out.frames.push_back(to_body_frame(f, seq.topology.root()));
  return out;
}

PoseFrame camera_to_global(const PoseFrame& pose, const RigidTransform& extrinsic) {
  PoseFrame out = pose;
  for (auto& p : out.positions) p = extrinsic.apply(p);
  out.frame = CoordinateFrame::global;
  return out;
}

namespace {

std::string header_for(const SkeletonTopology& topology) {
  std::string h = "timestamp_s,camera_id,person_id,frame";
  for (const auto& j : topology.joints()) h += "," + j + "_x," + j + "_y," + j + "_z," + j + "_conf";
  return h + "\n";
}

void append_row(std::string& out, const PoseRecord& r) {
  out += text::format_number(r.pose.timestamp);
  out += ",";
  out += r.camera_id;
  out += ",";
  out += std::to_string(r.person_id);
  out += ",";
  out += to_string(r.pose.frame);
  for (std::size_t j = 0; j < r.pose.positions.size(); ++j) {
    const auto& p = r.pose.positions[j];
    out += "," + text::format_number(p.x()) + "," + text::format_number(p.y()) + "," + text::format_number(p.z()) +
           "," + text::format_number(r.pose.confidences[j]);
  }
  out += "\n";
}

}  // namespace

std::string write_pose_stream(const SkeletonTopology& topology, std::span<const PoseRecord> records) {
  std::string out = header_for(topology);
  for (const auto& r : records) {
    if (r.pose.positions.size() != topology.expected_count() || r.pose.confidences.size() != topology.expected_count())
      throw ValidationError("pose record does not match topology '" + topology.name() + "'");
    append_row(out, r);
  }
  return out;
}

std::vector<PoseRecord> parse_pose_stream(const std::string& content, const SkeletonTopology& topology) {
  const auto lines = text::split_lines(content);
  std::size_t i = 0;
  while (i < lines.size() && text::trim(lines[i]).empty()) ++i;
  if (i == lines.size()) throw ValidationError("pose stream: missing header");
  const auto header = text::split_fields(lines[i], ',');
  const auto expected = text::split_fields(text::trim(header_for(topology)), ',');
  if (header != expected)
    throw ValidationError("pose stream: header does not match topology '" + topology.name() + "'");

  const std::size_t joints = topology.expected_count();
  std::vector<PoseRecord> out;
  for (++i; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const auto f = text::split_fields(lines[i], ',');
    const std::string where = "pose stream line " + std::to_string(i + 1);
    if (f.size() != 4 + 4 * joints) throw ValidationError(where + ": expected " + std::to_string(4 + 4 * joints) + " fields");
    PoseRecord r;
    r.pose.timestamp = text::parse_number(f[0], where + " timestamp");
    if (r.pose.timestamp < 0.0) throw ValidationError(where + ": negative timestamp");
    r.camera_id = f[1];
    r.person_id = static_cast<int>(text::parse_integer(f[2], where + " person id"));
    r.pose.frame = parse_coordinate_frame(f[3]);
    r.pose.positions.resize(joints);
    r.pose.confidences.resize(joints);
    for (std::size_t j = 0; j < joints; ++j) {
      const std::size_t c = 4 + 4 * j;
      r.pose.positions[j] = {text::parse_number(f[c], where + " x"), text::parse_number(f[c + 1], where + " y"),
                             text::parse_number(f[c + 2], where + " z")};
      const double conf = text::parse_number(f[c + 3], where + " confidence");
      if (!(conf >= 0.0 && conf <= 1.0)) throw ValidationError(where + ": confidence outside [0,1]");
      r.pose.confidences[j] = conf;
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PoseRecord> read_pose_stream(const std::filesystem::path& path, const SkeletonTopology& topology) {
  return parse_pose_stream(text::read_file(path), topology);
}

std::string write_sequence(const PoseSequence& seq, std::span<const std::string> camera_ids) {
  std::string out = header_for(seq.topology);
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    PoseRecord r;
    r.camera_id = i < camera_ids.size() ? camera_ids[i] : std::string("-");
    r.pose = seq.frames[i];
    append_row(out, r);
  }
  return out;
}

PoseSequence parse_sequence(const std::string& content, const SkeletonTopology& topology, double rate_hz) {
  PoseSequence seq;
  seq.topology = topology;
  seq.rate_hz = rate_hz;
  for (auto& r : parse_pose_stream(content, topology)) seq.frames.push_back(std::move(r.pose));
  seq.validate();
  return seq;
}

}  // namespace worksight
