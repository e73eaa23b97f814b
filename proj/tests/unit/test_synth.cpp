#include "worksight/eaws.hpp"
#include "worksight/error.hpp"
#include "worksight/manifest.hpp"
#include "worksight/pose_stream.hpp"
#include "worksight/synth.hpp"
#include "worksight/text_io.hpp"

#include <doctest.h>

#include <filesystem>

using namespace worksight;
using namespace worksight::synth;

namespace {

ScenarioSpec short_spec(std::vector<Episode> episodes, double cycle = 60.0) {
  ScenarioSpec s;
  s.cycle_duration_s = cycle;
  s.subgoal_count = 2;
  s.min_subgoal_s = 22.0;
  s.max_subgoal_s = 38.0;
  s.episodes = std::move(episodes);
  return s;
}

std::vector<double> times_of(const PoseSequence& s) {
  std::vector<double> t;
  for (const auto& f : s.frames) t.push_back(f.timestamp);
  return t;
}

}  // namespace

TEST_CASE("an empty script yields an upright sequence with no rule labels") {
  const auto sc = generate(short_spec({}));
  const auto labels = eaws::rule_label_sequence(eaws::extract_features(sc.ground_truth), times_of(sc.ground_truth));
  for (const auto& l : labels) CHECK(l.none());
  CHECK(sc.posture_intervals.empty());
}

TEST_CASE("a 10 s strongly-bent episode keeps flexion above 60 degrees in its core") {
  const auto sc = generate(short_spec({{PostureClass::P4_StronglyBentForward, 20.0, 10.0}}));
  const auto f = eaws::extract_features(sc.ground_truth);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double t = sc.ground_truth.frames[i].timestamp;
    if (t >= 20.5 && t <= 29.5) CHECK(f[i].trunk_flexion_deg >= 60.0);
    if (t < 19.9 || t > 30.1) CHECK(f[i].trunk_flexion_deg < 1.0);
  }
}

TEST_CASE("generation is deterministic per seed") {
  const auto a = generate(default_scenario(3));
  const auto b = generate(default_scenario(3));
  const auto c = generate(default_scenario(4));
  REQUIRE(a.camera_records.size() == 2);
  CHECK(write_pose_stream(body15_topology(), a.camera_records[0]) ==
        write_pose_stream(body15_topology(), b.camera_records[0]));
  CHECK(write_pose_stream(body15_topology(), a.camera_records[1]) ==
        write_pose_stream(body15_topology(), b.camera_records[1]));
  CHECK(write_sequence(a.ground_truth) == write_sequence(b.ground_truth));
  CHECK(a.door == b.door);
  CHECK(write_pose_stream(body15_topology(), a.camera_records[0]) !=
        write_pose_stream(body15_topology(), c.camera_records[0]));
}

TEST_CASE("subgoal statistics") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto spec = default_scenario(seed);
    const auto sc = generate(spec);
    REQUIRE(sc.subgoals.size() == spec.subgoal_count);
    CHECK(sc.subgoals.front().start_s == 0.0);
    for (std::size_t k = 0; k < sc.subgoals.size(); ++k) {
      const auto& s = sc.subgoals[k];
      CHECK(s.end_s - s.start_s >= 22.0 - 1e-3);
      CHECK(s.end_s - s.start_s <= 67.0 + 1e-3);
      if (k > 0) CHECK(s.start_s == sc.subgoals[k - 1].end_s);
    }
    CHECK(std::abs(sc.subgoals.back().end_s - 216.0) <= 21.6);
  }
}

TEST_CASE("noise-free camera streams reproduce the ground truth") {
  auto spec = short_spec({{PostureClass::P3_BentForward, 10.0, 8.0}, {PostureClass::TrunkRotation, 30.0, 6.0}});
  spec.jitter_sigma_m = 0.0;
  spec.bystander = false;
  const auto sc = generate(spec);
  for (std::size_t c = 0; c < sc.cameras.size(); ++c) {
    const auto& recs = sc.camera_records[c];
    REQUIRE(recs.size() * 2 == sc.ground_truth.frames.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const auto global = camera_to_global(recs[i].pose, sc.cameras[c].extrinsic);
      const auto& gt = sc.ground_truth.frames[2 * i];
      CHECK(gt.timestamp == recs[i].pose.timestamp);
      for (std::size_t j = 0; j < 15; ++j) CHECK((global.positions[j] - gt.positions[j]).norm() < 1e-12);
    }
  }
}

TEST_CASE("rule-label majority recovers every scripted episode of at least 4 s") {
  const auto spec = default_scenario(1);
  const auto sc = generate(spec);
  const auto labels = eaws::rule_label_sequence(eaws::extract_features(sc.ground_truth), times_of(sc.ground_truth));
  std::size_t checked = 0;
  for (const auto& e : spec.episodes) {
    if (e.duration_s < kMinValidPostureSeconds) continue;
    std::size_t hits = 0, total = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double t = sc.ground_truth.frames[i].timestamp;
      if (t < e.start_s || t >= e.end_s()) continue;
      ++total;
      if (eaws::contains(labels[i], e.posture)) ++hits;
    }
    CHECK_MESSAGE(2 * hits > total, to_string(e.posture));
    ++checked;
  }
  CHECK(checked >= 7);
}

TEST_CASE("scenario validation") {
  CHECK_THROWS_AS(generate(short_spec({{PostureClass::P3_BentForward, 10.0, 10.0},
                                       {PostureClass::P4_StronglyBentForward, 15.0, 10.0}})),
                  ValidationError);
  CHECK_NOTHROW(generate(short_spec({{PostureClass::P3_BentForward, 10.0, 5.0},
                                     {PostureClass::P4_StronglyBentForward, 15.0, 10.0}})));
  CHECK_THROWS_AS(generate(short_spec({{PostureClass::P3_BentForward, 55.0, 10.0}})), ValidationError);
  CHECK_THROWS_AS(generate(short_spec({{PostureClass::P3_BentForward, 5.0, 0.0}})), ValidationError);
  auto bad = short_spec({});
  bad.subgoal_count = 5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = short_spec({});
  bad.camera_rate_hz = 120.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("occlusion lowers the worker's confidence in one camera only") {
  const auto spec = default_scenario(1);
  const auto sc = generate(spec);
  const auto& occ = spec.occlusions.front();
  for (std::size_t c = 0; c < sc.cameras.size(); ++c) {
    for (const auto& r : sc.camera_records[c]) {
      if (r.person_id != 1) continue;
      const double t = r.pose.timestamp;
      if (t < occ.start_s + 0.1 || t >= occ.end_s - 0.1) continue;
      const bool hidden = sc.cameras[c].id == occ.camera_id;
      CHECK(is_valid(r.pose) == !hidden);
    }
  }
}

TEST_CASE("separable windows are balanced and seeded") {
  const auto a = separable_windows(50, 5, 10, 6, 3);
  const auto b = separable_windows(50, 5, 10, 6, 3);
  REQUIRE(a.size() == 50);
  std::vector<int> counts(5, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].tokens == b[i].tokens);
    CHECK(a[i].tokens.rows == 10);
    CHECK(a[i].tokens.cols == 6);
    ++counts[a[i].label];
  }
  for (int c : counts) CHECK(c == 10);
}

TEST_CASE("written scenarios load as valid manifests") {
  auto spec = short_spec({{PostureClass::P5_ElbowAtAboveShoulder, 10.0, 6.0}});
  spec.door_image_frames = 2;
  const auto sc = generate(spec);
  const auto dir = std::filesystem::temp_directory_path() / "worksight_synth_write";
  std::filesystem::remove_all(dir);
  const auto path = write_scenario(sc, dir);
  const auto m = load_manifest(path);
  CHECK(m.cameras.size() == 2);
  CHECK(m.recordings.bvh.has_value());
  CHECK(m.recordings.depth_dirs.size() == 2);
  CHECK(std::filesystem::exists(dir / "depth" / "In" / "000001.pgm"));
  const auto recs = read_pose_stream(m.resolve(m.recordings.pose_streams.at("In")), body15_topology());
  CHECK(recs.size() == sc.camera_records[0].size());
  std::filesystem::remove_all(dir);
}
