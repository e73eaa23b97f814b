#include "worksight/manifest.hpp"

#include "worksight/error.hpp"
#include "worksight/text_io.hpp"
#include "worksight/types.hpp"

#include <json.hpp>

#include <cmath>
#include <set>

namespace worksight {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kFormatTag = "worksight-manifest/1";

json transform_to_json(const RigidTransform& t) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r) rot.push_back({t.rotation(r, 0), t.rotation(r, 1), t.rotation(r, 2)});
  return {{"rotation", rot}, {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

Vec3 vec_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("schema violation: " + what + " must be a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

RigidTransform transform_from_json(const json& j, const std::string& what) {
  RigidTransform t;
  const auto& rot = j.at("rotation");
  if (!rot.is_array() || rot.size() != 3) throw ValidationError("schema violation: " + what + ".rotation must be 3x3");
  for (int r = 0; r < 3; ++r) {
    const auto& row = rot[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != 3) throw ValidationError("schema violation: " + what + ".rotation must be 3x3");
    for (int c = 0; c < 3; ++c) t.rotation(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  t.translation = vec_from_json(j.at("translation"), what + ".translation");
  return t;
}

std::map<std::string, fs::path> path_map(const json& j) {
  std::map<std::string, fs::path> out;
  for (const auto& [key, value] : j.items()) out[key] = value.get<std::string>();
  return out;
}

json path_map_to_json(const std::map<std::string, fs::path>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = v.generic_string();
  return j;
}

std::optional<fs::path> optional_path(const json& rec, const char* key) {
  if (!rec.contains(key) || rec[key].is_null()) return std::nullopt;
  return fs::path(rec[key].get<std::string>());
}

}  // namespace

std::string to_string(Workstation ws) {
  switch (ws) {
    case Workstation::WS10: return "WS10";
    case Workstation::WS20: return "WS20";
    case Workstation::WS30: return "WS30";
  }
  return "unknown";
}

Workstation parse_workstation(const std::string& text) {
  if (text == "WS10") return Workstation::WS10;
  if (text == "WS20") return Workstation::WS20;
  if (text == "WS30") return Workstation::WS30;
  throw ValidationError("schema violation: unknown workstation '" + text + "'");
}

const CameraDescriptor& DatasetManifest::camera(const std::string& id) const {
  for (const auto& c : cameras)
    if (c.id == id) return c;
  throw ValidationError("manifest has no camera '" + id + "'");
}

bool DatasetManifest::operator==(const DatasetManifest& o) const {
  const bool cart_eq = cart_location.has_value() == o.cart_location.has_value() &&
                       (!cart_location || *cart_location == *o.cart_location);
  return workstation == o.workstation && pose_topology == o.pose_topology && bvh_scale == o.bvh_scale &&
         bvh_to_global == o.bvh_to_global && cart_eq && cameras == o.cameras && recordings == o.recordings;
}

void validate_manifest(const DatasetManifest& m, bool check_paths) {
  if (m.cameras.empty()) throw ValidationError("camera count: at least one camera is required");
  if (m.cameras.size() > kMaxCamerasPerWorkstation)
    throw ValidationError("camera count: " + std::to_string(m.cameras.size()) + " cameras declared for " +
                          to_string(m.workstation) + " (at most 2)");
  builtin_topology(m.pose_topology);
  if (!(m.bvh_scale > 0.0) || !std::isfinite(m.bvh_scale))
    throw ValidationError("schema violation: bvh_scale must be positive and finite");
  if (!m.bvh_to_global.is_rigid()) throw ValidationError("non-orthonormal extrinsics: bvh_to_global");

  std::set<std::string> ids;
  for (const auto& cam : m.cameras) {
    if (cam.id.empty()) throw ValidationError("schema violation: camera id is empty");
    if (!ids.insert(cam.id).second) throw ValidationError("schema violation: duplicate camera id '" + cam.id + "'");
    if (!(cam.intrinsics.fx > 0.0) || !(cam.intrinsics.fy > 0.0))
      throw ValidationError("schema violation: camera '" + cam.id + "' focal lengths must be positive");
    if (!cam.extrinsic.is_rigid(1e-6))
      throw ValidationError("non-orthonormal extrinsics: camera '" + cam.id + "'");
    if (!(cam.mount_height_m >= 0.0)) throw ValidationError("schema violation: negative mount height");
  }

  auto check_streams = [&](const std::map<std::string, fs::path>& streams, const char* what) {
    for (const auto& [id, _] : streams)
      if (!ids.count(id))
        throw ValidationError(std::string("schema violation: ") + what + " references unknown camera '" + id + "'");
  };
  check_streams(m.recordings.pose_streams, "pose_streams");
  check_streams(m.recordings.depth_dirs, "depth");
  check_streams(m.recordings.mask_dirs, "masks");

  if (!check_paths) return;
  auto check = [&](const fs::path& p) {
    if (!fs::exists(m.resolve(p))) throw ValidationError("dangling recording path: '" + p.generic_string() + "'");
  };
  for (const auto* streams : {&m.recordings.pose_streams, &m.recordings.depth_dirs, &m.recordings.mask_dirs})
    for (const auto& [_, p] : *streams) check(p);
  for (const auto* opt : {&m.recordings.bvh, &m.recordings.annotations, &m.recordings.posture_intervals,
                          &m.recordings.door_series})
    if (*opt) check(**opt);
}

DatasetManifest parse_manifest(const std::string& json_text, const fs::path& base_dir, bool check_paths) {
  DatasetManifest m;
  m.base_dir = base_dir;
  try {
    const json j = json::parse(json_text);
    if (!j.is_object()) throw ValidationError("schema violation: manifest must be a JSON object");
    if (j.contains("format") && j["format"].get<std::string>() != kFormatTag)
      throw ValidationError("schema violation: unsupported format '" + j["format"].get<std::string>() + "'");
    m.workstation = parse_workstation(j.at("workstation").get<std::string>());
    m.pose_topology = j.value("pose_topology", std::string("body15"));
    m.bvh_scale = j.value("bvh_scale", 0.01);
    if (j.contains("bvh_to_global")) m.bvh_to_global = transform_from_json(j["bvh_to_global"], "bvh_to_global");
    if (j.contains("cart_location") && !j["cart_location"].is_null())
      m.cart_location = vec_from_json(j["cart_location"], "cart_location");

    const auto& cams = j.at("cameras");
    if (!cams.is_array()) throw ValidationError("schema violation: cameras must be an array");
    for (const auto& c : cams) {
      CameraDescriptor cam;
      cam.id = c.at("id").get<std::string>();
      cam.side = c.value("side", std::string());
      const auto& in = c.at("intrinsics");
      cam.intrinsics.fx = in.at("fx").get<double>();
      cam.intrinsics.fy = in.at("fy").get<double>();
      cam.intrinsics.cx = in.at("cx").get<double>();
      cam.intrinsics.cy = in.at("cy").get<double>();
      cam.intrinsics.width = in.value("width", 0);
      cam.intrinsics.height = in.value("height", 0);
      cam.extrinsic = transform_from_json(c.at("extrinsic"), "camera '" + cam.id + "' extrinsic");
      cam.mount_height_m = c.value("mount_height_m", 0.0);
      m.cameras.push_back(std::move(cam));
    }

    if (j.contains("recordings")) {
      const auto& rec = j["recordings"];
      if (rec.contains("pose_streams")) m.recordings.pose_streams = path_map(rec["pose_streams"]);
      if (rec.contains("depth")) m.recordings.depth_dirs = path_map(rec["depth"]);
      if (rec.contains("masks")) m.recordings.mask_dirs = path_map(rec["masks"]);
      m.recordings.bvh = optional_path(rec, "bvh");
      m.recordings.annotations = optional_path(rec, "annotations");
      m.recordings.posture_intervals = optional_path(rec, "posture_intervals");
      m.recordings.door_series = optional_path(rec, "door_series");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("schema violation: ") + e.what());
  }
  validate_manifest(m, check_paths);
  return m;
}

DatasetManifest load_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("missing manifest file '" + path.string() + "'");
  return parse_manifest(text::read_file(path), path.parent_path(), true);
}

std::string serialize_manifest(const DatasetManifest& m) {
  json j;
  j["format"] = kFormatTag;
  j["workstation"] = to_string(m.workstation);
  j["pose_topology"] = m.pose_topology;
  j["bvh_scale"] = m.bvh_scale;
  j["bvh_to_global"] = transform_to_json(m.bvh_to_global);
  if (m.cart_location) j["cart_location"] = {m.cart_location->x(), m.cart_location->y(), m.cart_location->z()};
  j["cameras"] = json::array();
  for (const auto& c : m.cameras) {
    j["cameras"].push_back({{"id", c.id},
                            {"side", c.side},
                            {"intrinsics",
                             {{"fx", c.intrinsics.fx},
                              {"fy", c.intrinsics.fy},
                              {"cx", c.intrinsics.cx},
                              {"cy", c.intrinsics.cy},
                              {"width", c.intrinsics.width},
                              {"height", c.intrinsics.height}}},
                            {"extrinsic", transform_to_json(c.extrinsic)},
                            {"mount_height_m", c.mount_height_m}});
  }
  json rec;
  rec["pose_streams"] = path_map_to_json(m.recordings.pose_streams);
  rec["depth"] = path_map_to_json(m.recordings.depth_dirs);
  rec["masks"] = path_map_to_json(m.recordings.mask_dirs);
  auto put = [&](const char* key, const std::optional<fs::path>& p) {
    if (p) rec[key] = p->generic_string();
  };
  put("bvh", m.recordings.bvh);
  put("annotations", m.recordings.annotations);
  put("posture_intervals", m.recordings.posture_intervals);
  put("door_series", m.recordings.door_series);
  j["recordings"] = rec;
  return j.dump(2) + "\n";
}

}  // namespace worksight
