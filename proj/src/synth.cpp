#include "worksight/synth.hpp"

#include "worksight/annotations.hpp"
#include "worksight/bvh.hpp"
#include "worksight/error.hpp"
#include "worksight/image_io.hpp"
#include "worksight/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace worksight::synth {

namespace {

constexpr double kTrunkLength = 0.5;
constexpr double kNeckToHead = 0.2;
constexpr double kShoulderHalfWidth = 0.18;
constexpr double kHipHalfWidth = 0.1;
constexpr double kUpperArm = 0.3;
constexpr double kForearm = 0.27;
constexpr double kThigh = 0.45;
constexpr double kShank = 0.45;

constexpr double kRampSeconds = 0.5;
constexpr double kStationSpacing = 0.4;  // m between subgoal work positions
constexpr double kTransitionSpeed = 0.15;
constexpr double kWalkSpeed = 0.6;
constexpr double kWalkPhase = 1.5;  // s walking, then s standing

const Vec3 kCart(0.8, 0.7, 0.9);
const Vec3 kBystander(3.5, 2.5, 1.0);

double round_to(double v, double step) { return std::round(v / step) * step; }

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

// 0 outside the episode, 1 in its core, smooth ramps inside its ends.
double envelope(const Episode& e, double t) {
  if (t < e.start_s || t > e.end_s()) return 0.0;
  const double ramp = std::min(kRampSeconds, 0.5 * e.duration_s);
  return smoothstep((t - e.start_s) / ramp) * smoothstep((e.end_s() - t) / ramp);
}

// Walk forward, stand, walk back, stand: returns to the start every 4 phases.
double walking_offset(double tau) {
  const double cycle = 4.0 * kWalkPhase;
  const double r = tau - cycle * std::floor(tau / cycle);
  const double reach = kWalkSpeed * kWalkPhase;
  if (r < kWalkPhase) return kWalkSpeed * r;
  if (r < 2.0 * kWalkPhase) return reach;
  if (r < 3.0 * kWalkPhase) return reach - kWalkSpeed * (r - 2.0 * kWalkPhase);
  return 0.0;
}

std::vector<AnnotationSegment> make_subgoals(const ScenarioSpec& spec) {
  static const char* const kNames[] = {"Fixate carrier", "Mount hinge", "Route cable", "Fit seal",
                                       "Fasten bolts",   "Attach trim", "Check gaps",  "Release door"};
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u(spec.min_subgoal_s, spec.max_subgoal_s);
  const std::size_t n = spec.subgoal_count;
  std::vector<double> d(n);
  for (int attempt = 0;; ++attempt) {
    if (attempt == 1000) throw ValidationError("could not sample subgoal durations within bounds");
    double sum = 0.0;
    for (auto& v : d) sum += (v = u(rng));
    bool ok = true;
    for (auto& v : d) {
      v *= spec.cycle_duration_s / sum;
      ok = ok && v >= spec.min_subgoal_s && v <= spec.max_subgoal_s;
    }
    if (ok) break;
  }
  std::vector<AnnotationSegment> out;
  double t = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    AnnotationSegment s;
    s.kind = AnnotationKind::subgoal;
    s.label = k < std::size(kNames) ? kNames[k] : "Subgoal " + std::to_string(k + 1);
    s.start_s = round_to(t, 1e-3);
    t += d[k];
    s.end_s = k + 1 == n ? spec.cycle_duration_s : round_to(t, 1e-3);
    s.duration_s = s.end_s - s.start_s;
    out.push_back(s);
  }
  return out;
}

double station_x(const std::vector<AnnotationSegment>& subgoals, double t) {
  double x = 0.0;
  for (std::size_t k = 1; k < subgoals.size(); ++k) {
    const double start = subgoals[k].start_s;
    if (t <= start) break;
    x += std::min(kStationSpacing, kTransitionSpeed * (t - start));
  }
  return x;
}

double door_yaw_deg(const std::vector<AnnotationSegment>& subgoals, double t) {
  for (std::size_t k = 0; k < subgoals.size(); ++k)
    if (t < subgoals[k].end_s) return -20.0 + 10.0 * static_cast<double>(k);
  return -20.0 + 10.0 * static_cast<double>(subgoals.size() - 1);
}

Vec3 door_centroid(double t) { return kCart + Vec3(0.002 * t, 0.0, 0.0); }

std::vector<CameraDescriptor> make_cameras() {
  CameraDescriptor in;
  in.id = "In";
  in.side = "inside";
  in.intrinsics = {150.0, 150.0, 80.0, 60.0, 160, 120};
  in.extrinsic.rotation << 1, 0, 0, 0, 0, 1, 0, -1, 0;
  in.extrinsic.translation = Vec3(0.8, -3.0, 1.85);
  in.mount_height_m = 1.85;
  CameraDescriptor out = in;
  out.id = "Out";
  out.side = "outside";
  out.extrinsic.rotation << -1, 0, 0, 0, 0, -1, 0, -1, 0;
  out.extrinsic.translation = Vec3(0.8, 3.0, 1.85);
  return {in, out};
}

bool occluded(const ScenarioSpec& spec, const std::string& camera, double t) {
  for (const auto& o : spec.occlusions)
    if (o.camera_id == camera && t >= o.start_s && t < o.end_s) return true;
  return false;
}

}  // namespace

std::vector<Vec3> body15_positions(const BodyPose& p) {
  const Mat3 heading = axis_rotation(Vec3::UnitZ(), p.heading_rad);
  const Mat3 trunk = heading * axis_rotation(Vec3::UnitY(), deg2rad(p.flexion_deg)) *
                     axis_rotation(Vec3::UnitX(), deg2rad(p.lateral_deg)) *
                     axis_rotation(Vec3::UnitZ(), deg2rad(p.twist_deg));
  std::vector<Vec3> j(15);
  j[0] = p.root;
  j[1] = p.root + trunk * Vec3(0, 0, kTrunkLength);
  j[2] = j[1] + trunk * Vec3(0, 0, kNeckToHead);
  auto arm = [&](std::size_t shoulder, double side, double elevation_deg) {
    j[shoulder] = j[1] + trunk * Vec3(0, side * kShoulderHalfWidth, 0);
    const double e = deg2rad(elevation_deg);
    const Vec3 dir = heading * Vec3(std::sin(e), 0, -std::cos(e));
    j[shoulder + 1] = j[shoulder] + kUpperArm * dir;
    j[shoulder + 2] = j[shoulder + 1] + kForearm * dir;
  };
  arm(3, -1.0, p.arm_elevation_r_deg);
  arm(6, 1.0, p.arm_elevation_l_deg);
  auto leg = [&](std::size_t hip, double side) {
    j[hip] = p.root + heading * Vec3(0, side * kHipHalfWidth, 0);
    j[hip + 1] = j[hip] - Vec3(0, 0, kThigh);
    j[hip + 2] = j[hip + 1] - Vec3(0, 0, kShank);
  };
  leg(9, -1.0);
  leg(12, 1.0);
  return j;
}

void ScenarioSpec::validate() const {
  if (!(cycle_duration_s > 0.0)) throw ValidationError("scenario: cycle duration must be positive");
  if (subgoal_count == 0) throw ValidationError("scenario: need at least one subgoal");
  if (!(min_subgoal_s > 0.0) || max_subgoal_s < min_subgoal_s)
    throw ValidationError("scenario: bad subgoal duration bounds");
  const auto n = static_cast<double>(subgoal_count);
  if (n * min_subgoal_s > cycle_duration_s || n * max_subgoal_s < cycle_duration_s)
    throw ValidationError("scenario: subgoal bounds cannot fill the cycle");
  if (!(gt_rate_hz > 0.0) || !(camera_rate_hz > 0.0) || camera_rate_hz > gt_rate_hz)
    throw ValidationError("scenario: bad frame rates");
  if (!(jitter_sigma_m >= 0.0)) throw ValidationError("scenario: negative jitter");
  for (const auto& e : episodes) {
    if (!(e.duration_s > 0.0)) throw ValidationError("scenario: episode duration must be positive");
    if (e.start_s < 0.0 || e.end_s() > cycle_duration_s) throw ValidationError("scenario: episode outside the cycle");
  }
  auto bent = [](PostureClass c) {
    return c == PostureClass::P3_BentForward || c == PostureClass::P4_StronglyBentForward;
  };
  for (std::size_t a = 0; a < episodes.size(); ++a)
    for (std::size_t b = a + 1; b < episodes.size(); ++b) {
      const auto& x = episodes[a];
      const auto& y = episodes[b];
      if (bent(x.posture) && bent(y.posture) && x.posture != y.posture && x.start_s < y.end_s() &&
          y.start_s < x.end_s())
        throw ValidationError("scenario: overlapping mutually exclusive episodes (bent / strongly bent forward)");
    }
}

ScenarioSpec default_scenario(std::uint64_t seed) {
  ScenarioSpec s;
  s.seed = seed;
  using P = PostureClass;
  s.episodes = {
      {P::P3_BentForward, 12.0, 12.0},         {P::P5_ElbowAtAboveShoulder, 34.0, 10.0},
      {P::TrunkRotation, 56.0, 12.0},          {P::P1_StandingWalking, 78.0, 18.0},
      {P::P4_StronglyBentForward, 106.0, 12.0}, {P::P6_HandsAboveHead, 130.0, 10.0},
      {P::LateralBending, 152.0, 12.0},        {P::P3_BentForward, 176.0, 3.0},
      {P::P4_StronglyBentForward, 192.0, 14.0},
  };
  s.occlusions = {{"In", 60.0, 70.0}, {"Out", 140.0, 148.0}};
  return s;
}

BodyPose scripted_pose(const ScenarioSpec& spec, const std::vector<AnnotationSegment>& subgoals, double t) {
  BodyPose p;
  p.heading_rad = 0.5 * kPi;  // facing the cart (+Y)
  double x = station_x(subgoals, t);
  for (const auto& e : spec.episodes) {
    const double w = envelope(e, t);
    if (w <= 0.0 && e.posture != PostureClass::P1_StandingWalking) continue;
    switch (e.posture) {
      case PostureClass::P1_StandingWalking:
        if (t >= e.start_s && t <= e.end_s()) x += walking_offset(t - e.start_s);
        break;
      case PostureClass::P3_BentForward: p.flexion_deg = std::max(p.flexion_deg, 40.0 * w); break;
      case PostureClass::P4_StronglyBentForward: p.flexion_deg = std::max(p.flexion_deg, 75.0 * w); break;
      case PostureClass::P5_ElbowAtAboveShoulder:
        p.arm_elevation_l_deg = p.arm_elevation_r_deg = std::max(p.arm_elevation_l_deg, 8.0 + 102.0 * w);
        break;
      case PostureClass::P6_HandsAboveHead:
        p.arm_elevation_l_deg = p.arm_elevation_r_deg = std::max(p.arm_elevation_l_deg, 8.0 + 157.0 * w);
        break;
      case PostureClass::TrunkRotation: p.twist_deg = std::max(p.twist_deg, 40.0 * w); break;
      case PostureClass::LateralBending: p.lateral_deg = std::max(p.lateral_deg, 30.0 * w); break;
    }
  }
  p.root = Vec3(x, 0.0, 1.0);
  return p;
}

Scenario generate(const ScenarioSpec& spec) {
  spec.validate();
  Scenario sc;
  sc.spec = spec;
  sc.subgoals = make_subgoals(spec);
  sc.cameras = make_cameras();
  sc.cart_location = kCart;

  for (const auto& e : spec.episodes) {
    AnnotationSegment a;
    a.kind = AnnotationKind::posture;
    a.label = std::string(to_string(e.posture));
    a.start_s = e.start_s;
    a.end_s = e.end_s();
    a.duration_s = e.duration_s;
    a.valid = e.duration_s >= kMinValidPostureSeconds;
    sc.posture_intervals.push_back(a);
  }
  std::stable_sort(sc.posture_intervals.begin(), sc.posture_intervals.end(),
                   [](const auto& a, const auto& b) { return a.start_s < b.start_s; });

  const auto gt_frames = static_cast<std::size_t>(std::llround(spec.cycle_duration_s * spec.gt_rate_hz));
  sc.ground_truth.topology = body15_topology();
  sc.ground_truth.rate_hz = spec.gt_rate_hz;
  sc.ground_truth.frames.reserve(gt_frames);
  for (std::size_t i = 0; i < gt_frames; ++i) {
    PoseFrame f;
    f.timestamp = static_cast<double>(i) / spec.gt_rate_hz;
    f.positions = body15_positions(scripted_pose(spec, sc.subgoals, f.timestamp));
    for (auto& q : f.positions) q = q.unaryExpr([](double v) { return round_to(v, 1e-4); });
    f.confidences.assign(f.positions.size(), 1.0);
    sc.ground_truth.frames.push_back(std::move(f));
  }

  std::mt19937_64 rng(spec.seed ^ 0xC0FFEEULL);
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::uniform_real_distribution<double> conf_noise(-0.05, 0.05);
  const auto cam_frames = static_cast<std::size_t>(std::llround(spec.cycle_duration_s * spec.camera_rate_hz));
  BodyPose bystander_pose;
  bystander_pose.root = kBystander;
  bystander_pose.heading_rad = -0.5 * kPi;
  const auto bystander_global = body15_positions(bystander_pose);

  sc.camera_records.resize(sc.cameras.size());
  for (std::size_t i = 0; i < cam_frames; ++i) {
    const double t = static_cast<double>(i) / spec.camera_rate_hz;
    auto worker_global = body15_positions(scripted_pose(spec, sc.subgoals, t));
    for (auto& q : worker_global) q = q.unaryExpr([](double v) { return round_to(v, 1e-4); });
    for (std::size_t c = 0; c < sc.cameras.size(); ++c) {
      const auto& cam = sc.cameras[c];
      const RigidTransform to_cam = cam.extrinsic.inverse();
      auto observe_person = [&](const std::vector<Vec3>& global, double conf_base, int person) {
        PoseRecord r;
        r.camera_id = cam.id;
        r.person_id = person;
        r.pose.timestamp = t;
        r.pose.frame = CoordinateFrame::camera;
        for (const auto& g : global) {
          Vec3 p = to_cam.apply(g);
          // Noise-free streams stay unrounded so they map back onto the ground truth.
          if (spec.jitter_sigma_m > 0.0) {
            for (int a = 0; a < 3; ++a) p[a] += spec.jitter_sigma_m * jitter(rng);
            p = p.unaryExpr([](double v) { return round_to(v, 1e-4); });
          }
          r.pose.positions.push_back(p);
          r.pose.confidences.push_back(round_to(std::clamp(conf_base + conf_noise(rng), 0.0, 1.0), 1e-3));
        }
        return r;
      };
      const double worker_conf = occluded(spec, cam.id, t) ? spec.occluded_confidence : spec.base_confidence;
      // The bystander is listed first so that active-worker selection matters.
      if (spec.bystander) {
        sc.camera_records[c].push_back(observe_person(bystander_global, spec.base_confidence, 0));
        sc.camera_records[c].push_back(observe_person(worker_global, worker_conf, 1));
      } else {
        sc.camera_records[c].push_back(observe_person(worker_global, worker_conf, 0));
      }
    }
    DoorObservation d;
    d.timestamp = t;
    d.centroid_global = door_centroid(t).unaryExpr([](double v) { return round_to(v, 1e-4); });
    d.yaw_deg = door_yaw_deg(sc.subgoals, t);
    d.yaw_defined = true;
    sc.door.push_back(d);
  }
  return sc;
}

DoorFrame render_door(const CameraDescriptor& camera, const Vec3& centroid_global, double yaw_deg, double width_m,
                      double height_m) {
  const auto& k = camera.intrinsics;
  DoorFrame f{DepthImage(k.width, k.height, 0), MaskImage(k.width, k.height, 0)};
  const Vec3 axis(std::cos(deg2rad(yaw_deg)), std::sin(deg2rad(yaw_deg)), 0.0);
  const Vec3 up = Vec3::UnitZ();
  const Vec3 normal = axis.cross(up);
  const Vec3 origin = camera.extrinsic.translation;
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 ray_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      const Vec3 ray = camera.extrinsic.apply_direction(ray_cam);
      const double denom = normal.dot(ray);
      if (std::abs(denom) < 1e-12) continue;
      const double s = normal.dot(centroid_global - origin) / denom;  // camera z of the hit point
      if (s <= 0.0) continue;
      const Vec3 rel = origin + s * ray - centroid_global;
      if (std::abs(rel.dot(axis)) > 0.5 * width_m || std::abs(rel.dot(up)) > 0.5 * height_m) continue;
      f.mask.at(u, v) = 255;
      // sparse holes exercise depth repair
      f.depth.at(u, v) = (u * 7 + v * 13) % 53 == 0 ? 0 : static_cast<std::uint16_t>(std::lround(s * 1000.0));
    }
  }
  return f;
}

std::filesystem::path write_scenario(const Scenario& sc, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  DatasetManifest m;
  m.workstation = sc.spec.workstation;
  m.pose_topology = "body15";
  m.bvh_scale = 0.01;
  // BVH file axes are Y-up: (x, z, -y) in global terms.
  m.bvh_to_global.rotation << 1, 0, 0, 0, 0, -1, 0, 1, 0;
  m.cart_location = sc.cart_location;
  m.cameras = sc.cameras;
  m.base_dir = dir;

  for (std::size_t c = 0; c < sc.cameras.size(); ++c) {
    const std::string name = "poses_" + sc.cameras[c].id + ".csv";
    text::write_file(dir / name, write_pose_stream(sc.ground_truth.topology, sc.camera_records[c]));
    m.recordings.pose_streams[sc.cameras[c].id] = name;
  }

  // Ground truth as a position-channel rig in centimeters.
  bvh::Rig rig;
  const auto& topo = sc.ground_truth.topology;
  const RigidTransform global_to_file = m.bvh_to_global.inverse();
  for (std::size_t j = 0; j < topo.expected_count(); ++j) {
    bvh::Joint joint;
    joint.name = topo.joints()[j];
    joint.parent = topo.parent(j);
    joint.channels = {bvh::Channel::Xposition, bvh::Channel::Yposition, bvh::Channel::Zposition};
    joint.first_channel = 3 * j;
    bool leaf = true;
    for (std::size_t k = 0; k < topo.expected_count(); ++k) leaf = leaf && topo.parent(k) != static_cast<int>(j);
    if (leaf) joint.end_site = Vec3::Zero();
    rig.joints.push_back(joint);
  }
  rig.channel_count = 3 * topo.expected_count();
  rig.frame_count = sc.ground_truth.frames.size();
  rig.frame_time = 1.0 / sc.spec.gt_rate_hz;
  rig.motion.reserve(rig.frame_count * rig.channel_count);
  for (const auto& f : sc.ground_truth.frames) {
    for (std::size_t j = 0; j < topo.expected_count(); ++j) {
      const int parent = topo.parent(j);
      const Vec3 local = parent < 0 ? global_to_file.apply(f.positions[j])
                                    : global_to_file.apply_direction(f.positions[j] - f.positions[static_cast<std::size_t>(parent)]);
      for (int a = 0; a < 3; ++a) rig.motion.push_back(round_to(local[a] * 100.0, 1e-6));
    }
  }
  text::write_file(dir / "gt.bvh", bvh::write_bvh(rig));
  m.recordings.bvh = "gt.bvh";

  std::vector<AnnotationSegment> table;
  for (const auto& sub : sc.subgoals) {
    table.push_back(sub);
    for (auto c : kAllPostureClasses) {
      double d = 0.0;
      for (const auto& e : sc.spec.episodes)
        if (e.posture == c) d += std::max(0.0, std::min(e.end_s(), sub.end_s) - std::max(e.start_s, sub.start_s));
      if (d <= 0.0) continue;
      AnnotationSegment p;
      p.kind = AnnotationKind::posture;
      p.label = std::string(to_string(c));
      p.start_s = sub.start_s;
      p.end_s = sub.end_s;
      p.duration_s = round_to(d, 1e-6);
      p.subgoal = sub.label;
      p.valid = d >= kMinValidPostureSeconds;
      table.push_back(p);
    }
  }
  text::write_file(dir / "annotations.csv", write_annotations(table));
  m.recordings.annotations = "annotations.csv";
  text::write_file(dir / "postures.csv", write_posture_intervals(sc.posture_intervals));
  m.recordings.posture_intervals = "postures.csv";
  text::write_file(dir / "door.csv", write_door_series(sc.door));
  m.recordings.door_series = "door.csv";

  if (sc.spec.door_image_frames > 0) {
    for (const auto& cam : sc.cameras) {
      const fs::path depth_dir = fs::path("depth") / cam.id;
      const fs::path mask_dir = fs::path("masks") / cam.id;
      const std::size_t n = std::min(sc.spec.door_image_frames, sc.door.size());
      for (std::size_t i = 0; i < n; ++i) {
        const auto frame = render_door(cam, sc.door[i].centroid_global, sc.door[i].yaw_deg);
        char name[32];
        std::snprintf(name, sizeof name, "%06zu.pgm", i);
        write_depth_pgm(dir / depth_dir / name, frame.depth);
        write_mask_pgm(dir / mask_dir / name, frame.mask);
      }
      m.recordings.depth_dirs[cam.id] = depth_dir;
      m.recordings.mask_dirs[cam.id] = mask_dir;
    }
  }

  const fs::path manifest_path = dir / "manifest.json";
  text::write_file(manifest_path, serialize_manifest(m));
  return manifest_path;
}

std::vector<progress::TokenizedWindow> separable_windows(std::size_t count, std::size_t n_classes,
                                                         std::size_t n_tokens, std::size_t d_in, std::uint64_t seed,
                                                         double noise_sigma) {
  if (n_classes == 0 || n_tokens == 0 || d_in == 0) throw ValidationError("separable_windows: empty shape");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<nn::Matrix> prototypes;
  for (std::size_t c = 0; c < n_classes; ++c) {
    nn::Matrix p(n_tokens, d_in);
    for (double& v : p.data) v = normal(rng);
    prototypes.push_back(std::move(p));
  }
  std::vector<progress::TokenizedWindow> out;
  for (std::size_t i = 0; i < count; ++i) {
    progress::TokenizedWindow w;
    w.label = i % n_classes;
    w.tokens = prototypes[w.label];
    for (double& v : w.tokens.data) v += noise_sigma * normal(rng);
    w.start_s = 4.0 * static_cast<double>(i);
    w.end_s = w.start_s + 8.0;
    w.group = "g" + std::to_string(i / n_classes % 10);
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace worksight::synth
