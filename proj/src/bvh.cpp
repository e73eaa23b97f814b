#include "worksight/bvh.hpp"

#include "worksight/error.hpp"
#include "worksight/text_io.hpp"

#include <cmath>
#include <sstream>

namespace worksight::bvh {

namespace {

class Tokenizer {
 public:
  explicit Tokenizer(const std::string& content) : in_(content) {}

  bool next(std::string& tok) { return static_cast<bool>(in_ >> tok); }
  std::string expect_any(const char* context) {
    std::string tok;
    if (!next(tok)) throw ValidationError(std::string("malformed hierarchy: unexpected end of file in ") + context);
    return tok;
  }
  void expect(const std::string& want) {
    const auto got = expect_any(want.c_str());
    if (got != want) throw ValidationError("malformed hierarchy: expected '" + want + "', found '" + got + "'");
  }
  double number(const char* what) { return text::parse_number(expect_any(what), what); }

 private:
  std::istringstream in_;
};

Channel parse_channel(const std::string& tok) {
  if (tok == "Xposition") return Channel::Xposition;
  if (tok == "Yposition") return Channel::Yposition;
  if (tok == "Zposition") return Channel::Zposition;
  if (tok == "Xrotation") return Channel::Xrotation;
  if (tok == "Yrotation") return Channel::Yrotation;
  if (tok == "Zrotation") return Channel::Zrotation;
  throw ValidationError("malformed hierarchy: unknown channel '" + tok + "'");
}

Vec3 read_offset(Tokenizer& tk) {
  tk.expect("OFFSET");
  Vec3 v;
  v.x() = tk.number("OFFSET x");
  v.y() = tk.number("OFFSET y");
  v.z() = tk.number("OFFSET z");
  return v;
}

void read_joint_body(Tokenizer& tk, Rig& rig, int parent, const std::string& name) {
  tk.expect("{");
  Joint joint;
  joint.name = name;
  joint.parent = parent;
  joint.offset = read_offset(tk);
  tk.expect("CHANNELS");
  const double n = tk.number("channel count");
  if (n < 0 || n > 6 || n != std::floor(n)) throw ValidationError("malformed hierarchy: bad channel count");
  for (int i = 0; i < static_cast<int>(n); ++i) joint.channels.push_back(parse_channel(tk.expect_any("CHANNELS")));
  joint.first_channel = rig.channel_count;
  rig.channel_count += joint.channels.size();
  const int index = static_cast<int>(rig.joints.size());
  rig.joints.push_back(std::move(joint));

  for (;;) {
    const auto tok = tk.expect_any("joint body");
    if (tok == "}") return;
    if (tok == "JOINT") {
      read_joint_body(tk, rig, index, tk.expect_any("JOINT name"));
    } else if (tok == "End") {
      tk.expect("Site");
      tk.expect("{");
      rig.joints[static_cast<std::size_t>(index)].end_site = read_offset(tk);
      tk.expect("}");
    } else {
      throw ValidationError("malformed hierarchy: unexpected token '" + tok + "'");
    }
  }
}

Mat3 channel_rotation(Channel c, double degrees) {
  const double a = deg2rad(degrees);
  switch (c) {
    case Channel::Xrotation: return axis_rotation(Vec3::UnitX(), a);
    case Channel::Yrotation: return axis_rotation(Vec3::UnitY(), a);
    case Channel::Zrotation: return axis_rotation(Vec3::UnitZ(), a);
    default: return Mat3::Identity();
  }
}

const char* channel_name(Channel c) {
  switch (c) {
    case Channel::Xposition: return "Xposition";
    case Channel::Yposition: return "Yposition";
    case Channel::Zposition: return "Zposition";
    case Channel::Xrotation: return "Xrotation";
    case Channel::Yrotation: return "Yrotation";
    case Channel::Zrotation: return "Zrotation";
  }
  return "";
}

void write_vec(std::string& out, const Vec3& v) {
  out += text::format_number(v.x()) + ' ' + text::format_number(v.y()) + ' ' + text::format_number(v.z());
}

void write_joint(std::string& out, const Rig& rig, std::size_t index, int depth, std::size_t& next_channel) {
  const auto& j = rig.joints[index];
  if (j.first_channel != next_channel) throw ValidationError("write_bvh: joints are not in depth-first channel order");
  next_channel += j.channels.size();
  const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
  out += pad + (j.parent < 0 ? "ROOT " : "JOINT ") + j.name + "\n" + pad + "{\n";
  out += pad + "  OFFSET ";
  write_vec(out, j.offset);
  out += "\n" + pad + "  CHANNELS " + std::to_string(j.channels.size());
  for (auto c : j.channels) out += std::string(" ") + channel_name(c);
  out += "\n";
  for (std::size_t k = index + 1; k < rig.joints.size(); ++k)
    if (rig.joints[k].parent == static_cast<int>(index)) write_joint(out, rig, k, depth + 1, next_channel);
  if (j.end_site) {
    out += pad + "  End Site\n" + pad + "  {\n" + pad + "    OFFSET ";
    write_vec(out, *j.end_site);
    out += "\n" + pad + "  }\n";
  }
  out += pad + "}\n";
}

}  // namespace

std::string write_bvh(const Rig& rig) {
  if (rig.joints.empty() || rig.joints.front().parent != -1) throw ValidationError("write_bvh: rig has no root");
  if (rig.motion.size() != rig.frame_count * rig.channel_count)
    throw ValidationError("write_bvh: channel/value count mismatch");
  std::string out = "HIERARCHY\n";
  std::size_t next_channel = 0;
  write_joint(out, rig, 0, 0, next_channel);
  if (next_channel != rig.channel_count) throw ValidationError("write_bvh: unreachable joints");
  out += "MOTION\nFrames: " + std::to_string(rig.frame_count) + "\nFrame Time: " + text::format_number(rig.frame_time) + "\n";
  for (std::size_t f = 0; f < rig.frame_count; ++f) {
    for (std::size_t c = 0; c < rig.channel_count; ++c) {
      if (c) out += ' ';
      out += text::format_number(rig.motion[f * rig.channel_count + c]);
    }
    out += '\n';
  }
  return out;
}

std::span<const double> Rig::frame(std::size_t index) const {
  if (index >= frame_count)
    throw ValidationError("frame index " + std::to_string(index) + " out of range (" +
                          std::to_string(frame_count) + " frames)");
  return {motion.data() + index * channel_count, channel_count};
}

SkeletonTopology Rig::topology(const std::string& name) const {
  std::vector<std::string> names;
  std::vector<int> parents;
  for (const auto& j : joints) {
    names.push_back(j.name);
    parents.push_back(j.parent);
  }
  return SkeletonTopology(name, std::move(names), std::move(parents));
}

UnitScale::UnitScale(double file_to_meters) : factor_(file_to_meters) {
  if (!(factor_ > 0.0) || !std::isfinite(factor_))
    throw ValidationError("unit scale must be positive and finite");
}

Rig parse_bvh_text(const std::string& content) {
  Tokenizer tk(content);
  Rig rig;
  tk.expect("HIERARCHY");
  tk.expect("ROOT");
  read_joint_body(tk, rig, -1, tk.expect_any("ROOT name"));

  tk.expect("MOTION");
  auto tok = tk.expect_any("MOTION");
  if (tok == "Frames") tk.expect(":");
  else if (tok != "Frames:") throw ValidationError("malformed motion header: expected 'Frames:'");
  const double frames = tk.number("frame count");
  if (frames < 1 || frames != std::floor(frames)) throw ValidationError("frame count must be a positive integer");
  rig.frame_count = static_cast<std::size_t>(frames);
  tk.expect("Frame");
  tok = tk.expect_any("Frame Time");
  if (tok == "Time") tk.expect(":");
  else if (tok != "Time:") throw ValidationError("malformed motion header: expected 'Frame Time:'");
  rig.frame_time = tk.number("frame time");
  if (!(rig.frame_time > 0.0)) throw ValidationError("non-positive frame time");

  const std::size_t expected = rig.frame_count * rig.channel_count;
  rig.motion.reserve(expected);
  std::string value;
  while (tk.next(value)) {
    if (rig.motion.size() == expected)
      throw ValidationError("channel/value count mismatch: more motion values than " + std::to_string(expected));
    rig.motion.push_back(text::parse_number(value, "motion value"));
  }
  if (rig.motion.size() != expected)
    throw ValidationError("channel/value count mismatch: expected " + std::to_string(expected) + " motion values, found " +
                          std::to_string(rig.motion.size()));
  return rig;
}

Rig parse_bvh(const std::filesystem::path& path) { return parse_bvh_text(text::read_file(path)); }

PoseFrame forward_kinematics(const Rig& rig, std::size_t frame_index, const UnitScale& scale,
                             const RigidTransform& to_global) {
  const auto values = rig.frame(frame_index);
  std::vector<RigidTransform> world(rig.joints.size());
  PoseFrame out;
  out.timestamp = static_cast<double>(frame_index) * rig.frame_time;
  out.frame = CoordinateFrame::global;
  out.positions.resize(rig.joints.size());
  out.confidences.assign(rig.joints.size(), 1.0);

  for (std::size_t j = 0; j < rig.joints.size(); ++j) {
    const auto& joint = rig.joints[j];
    RigidTransform local;
    local.translation = joint.offset;
    for (std::size_t c = 0; c < joint.channels.size(); ++c) {
      const double v = values[joint.first_channel + c];
      switch (joint.channels[c]) {
        case Channel::Xposition: local.translation.x() += v; break;
        case Channel::Yposition: local.translation.y() += v; break;
        case Channel::Zposition: local.translation.z() += v; break;
        default: local.rotation = local.rotation * channel_rotation(joint.channels[c], v); break;
      }
    }
    world[j] = joint.parent < 0 ? local : world[static_cast<std::size_t>(joint.parent)] * local;
    out.positions[j] = to_global.apply(world[j].translation * scale.file_to_meters());
  }
  return out;
}

PoseSequence to_sequence(const Rig& rig, const UnitScale& scale, const RigidTransform& to_global,
                         const std::string& topology_name) {
  PoseSequence seq;
  seq.topology = rig.topology(topology_name);
  seq.rate_hz = rig.frame_rate();
  seq.frames.reserve(rig.frame_count);
  for (std::size_t f = 0; f < rig.frame_count; ++f) seq.frames.push_back(forward_kinematics(rig, f, scale, to_global));
  return seq;
}

}  // namespace worksight::bvh

namespace worksight {

PoseSequence resample(const PoseSequence& seq, double target_hz) {
  if (seq.frames.size() < 2) throw ValidationError("resample: need at least two frames");
  if (!(target_hz > 0.0)) throw ValidationError("resample: target rate must be positive");
  if (target_hz > seq.rate_hz * (1.0 + 1e-12))
    throw ValidationError("resample: upsampling from " + text::format_number(seq.rate_hz) + " Hz to " +
                          text::format_number(target_hz) + " Hz is not supported");
  if (target_hz == seq.rate_hz) return seq;

  PoseSequence out;
  out.topology = seq.topology;
  out.rate_hz = target_hz;
  const double t0 = seq.frames.front().timestamp;
  const double t_last = seq.frames.back().timestamp;
  const double step = 1.0 / target_hz;
  const std::size_t joints = seq.topology.expected_count();

  std::size_t src = 0;
  for (std::size_t k = 0;; ++k) {
    const double t = t0 + static_cast<double>(k) * step;
    if (t > t_last + 1e-9) break;
    while (src + 1 < seq.frames.size() && seq.frames[src + 1].timestamp <= t) ++src;
    const auto& a = seq.frames[src];
    PoseFrame f;
    f.timestamp = t;
    f.frame = a.frame;
    if (src + 1 >= seq.frames.size() || a.timestamp == t) {
      f.positions = a.positions;
      f.confidences = a.confidences;
    } else {
      const auto& b = seq.frames[src + 1];
      const double w = (t - a.timestamp) / (b.timestamp - a.timestamp);
      f.positions.resize(joints);
      f.confidences.resize(joints);
      for (std::size_t j = 0; j < joints; ++j) {
        f.positions[j] = a.positions[j] + w * (b.positions[j] - a.positions[j]);
        f.confidences[j] = a.confidences[j] + w * (b.confidences[j] - a.confidences[j]);
      }
    }
    out.frames.push_back(std::move(f));
  }
  return out;
}

}  // namespace worksight
