#include "generators.hpp"
#include "skeletons.hpp"
#include "worksight/eaws.hpp"
#include "worksight/error.hpp"

#include <doctest.h>

#include <cmath>

using namespace worksight;
using namespace worksight::eaws;

namespace {

AnnotationSegment interval(std::string label, double start, double end, AnnotationKind kind) {
  AnnotationSegment a;
  a.label = std::move(label);
  a.start_s = start;
  a.end_s = end;
  a.kind = kind;
  return a;
}

PostureFeatures features_of(const synth::BodyPose& p) {
  const auto seq = testgen::sequence_of([&](double) { return p; }, 1.0);
  return extract_features(seq).front();
}

// Library with one walking-free constant-pose exemplar per class plus Neutral.
dtw::ExemplarLibrary shape_library() {
  dtw::ExemplarLibrary lib;
  for (auto c : kAllPostureClasses) {
    auto shape = testgen::posture_shape(c);
    std::function<synth::BodyPose(double)> at = [shape](double) { return shape; };
    if (c == PostureClass::P1_StandingWalking)
      at = [](double t) {
        synth::BodyPose p;
        p.root.x() = std::fmod(t, 4.0) < 2.0 ? 0.6 * std::fmod(t, 4.0) : 1.2;
        return p;
      };
    lib.add(std::string(to_string(c)), to_feature_sequence(extract_features(testgen::sequence_of(at, 8.0))).strided(3));
  }
  lib.add(kNeutralLabel, to_feature_sequence(extract_features(testgen::sequence_of(
                             [](double) { return synth::BodyPose{}; }, 8.0)))
                             .strided(3));
  return lib;
}

}  // namespace

TEST_CASE("flexion of constructed skeletons selects none, P3 and P4") {
  const std::vector<std::pair<double, PostureSet>> cases = {
      {10.0, PostureSet{}},
      {40.0, make_set({PostureClass::P3_BentForward})},
      {70.0, make_set({PostureClass::P4_StronglyBentForward})},
  };
  for (const auto& [flex, expected] : cases) {
    synth::BodyPose p;
    p.flexion_deg = flex;
    const auto f = features_of(p);
    CHECK(f.trunk_flexion_deg == doctest::Approx(flex).epsilon(1e-9));
    CHECK(rule_label(f) == expected);
  }
}

TEST_CASE("features of constructed skeletons match their construction angles") {
  testgen::Gen g(12);
  for (int trial = 0; trial < 30; ++trial) {
    synth::BodyPose p;
    p.heading_rad = g.uniform(-3, 3);
    p.root = Vec3(g.normal(), g.normal(), 1.0);
    const int which = static_cast<int>(g.index(0, 2));
    const double angle = g.uniform(0, 80);
    if (which == 0) p.flexion_deg = angle;
    if (which == 1) p.twist_deg = g.uniform(0, 80);
    if (which == 2) p.lateral_deg = g.uniform(0, 60);
    const auto f = features_of(p);
    if (which == 0) {
      CHECK(f.trunk_flexion_deg == doctest::Approx(p.flexion_deg).epsilon(1e-9));
      CHECK(f.trunk_rotation_deg < 1e-6);
      CHECK(f.lateral_bend_deg < 1e-6);
    }
    if (which == 1) {
      CHECK(f.trunk_rotation_deg == doctest::Approx(p.twist_deg).epsilon(1e-9));
      CHECK(f.trunk_flexion_deg < 1e-6);
    }
    if (which == 2) {
      CHECK(f.lateral_bend_deg == doctest::Approx(p.lateral_deg).epsilon(1e-9));
      CHECK(f.trunk_flexion_deg == doctest::Approx(p.lateral_deg).epsilon(1e-9));
    }
  }
}

TEST_CASE("arm elevation drives P5 and P6") {
  CHECK(rule_label(features_of(testgen::posture_shape(PostureClass::P5_ElbowAtAboveShoulder))) ==
        make_set({PostureClass::P5_ElbowAtAboveShoulder}));
  const auto p6 = rule_label(features_of(testgen::posture_shape(PostureClass::P6_HandsAboveHead)));
  CHECK(contains(p6, PostureClass::P6_HandsAboveHead));
  CHECK(rule_label(features_of(testgen::posture_shape(PostureClass::TrunkRotation))) ==
        make_set({PostureClass::TrunkRotation}));
  CHECK(rule_label(features_of(testgen::posture_shape(PostureClass::LateralBending))) ==
        make_set({PostureClass::P3_BentForward, PostureClass::LateralBending}));
}

TEST_CASE("threshold boundaries are inclusive") {
  PostureFeatures f;
  f.trunk_flexion_deg = 20.0;
  CHECK(rule_label(f) == make_set({PostureClass::P3_BentForward}));
  f.trunk_flexion_deg = 60.0;
  CHECK(rule_label(f) == make_set({PostureClass::P4_StronglyBentForward}));
  f.trunk_flexion_deg = 19.999;
  CHECK(rule_label(f).none());
  CHECK(rule_label(f, true) == make_set({PostureClass::P1_StandingWalking}));
  f.trunk_flexion_deg = 30.0;
  CHECK_FALSE(contains(rule_label(f, true), PostureClass::P1_StandingWalking));
}

TEST_CASE("walking alternation within the horizon labels P1") {
  std::vector<PostureFeatures> feats(100);
  std::vector<double> t(100);
  for (std::size_t i = 0; i < 100; ++i) {
    t[i] = 0.1 * static_cast<double>(i);
    feats[i].root_speed_mps = i >= 50 && i < 60 ? 0.6 : 0.0;
  }
  const auto labels = rule_label_sequence(feats, t);
  CHECK(contains(labels[55], PostureClass::P1_StandingWalking));
  CHECK(contains(labels[40], PostureClass::P1_StandingWalking));
  CHECK(labels[0].none());
  CHECK(labels[99].none());
  CHECK_THROWS_AS(rule_label_sequence(feats, {}), ValidationError);
}

TEST_CASE("root speed of a steady walk") {
  const auto seq = testgen::sequence_of(
      [](double t) {
        synth::BodyPose p;
        p.root = Vec3(0.6 * t, 0.0, 1.0);
        return p;
      },
      4.0);
  const auto f = extract_features(seq);
  for (const auto& x : f) CHECK(x.root_speed_mps == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("posture validity at the four-second boundary") {
  CHECK_FALSE(make_segment(PostureClass::P3_BentForward, 10.0, 13.9).valid);
  CHECK(make_segment(PostureClass::P3_BentForward, 10.0, 14.0).valid);
  CHECK(make_segment(PostureClass::P3_BentForward, 0.1, 4.1).valid);
  CHECK_THROWS_AS(make_segment(PostureClass::P3_BentForward, 2.0, 2.0), ValidationError);
}

TEST_CASE("window counts") {
  CHECK(window_count(216.0) == 53);
  CHECK(window_count(8.0) == 1);
  CHECK(window_count(7.99) == 0);
  CHECK(window_count(11.99) == 1);
  CHECK(window_count(12.0) == 2);
  for (double T = 8.0; T < 300.0; T += 0.37)
    CHECK(window_count(T) == static_cast<std::size_t>(std::floor((T - 8.0) / 4.0)) + 1);
  CHECK_THROWS_AS(window_count(10.0, 0.0, 4.0), ValidationError);
}

TEST_CASE("merge_segments is idempotent and joins touching runs") {
  testgen::Gen g(42);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<PostureSegment> segs;
    const std::size_t n = g.index(0, 12);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = g.uniform(0, 100);
      segs.push_back(make_segment(kAllPostureClasses[g.index(0, 2)], s, s + g.uniform(0.5, 10)));
    }
    const auto once = merge_segments(segs);
    CHECK(merge_segments(once) == once);
    for (std::size_t i = 0; i < once.size(); ++i)
      for (std::size_t j = i + 1; j < once.size(); ++j)
        if (once[i].posture == once[j].posture)
          CHECK((once[i].end_s < once[j].start_s || once[j].end_s < once[i].start_s));
    for (const auto& s : segs) {
      bool covered = false;
      for (const auto& m : once)
        covered = covered || (m.posture == s.posture && m.start_s <= s.start_s && m.end_s >= s.end_s);
      CHECK(covered);
    }
  }
  const auto joined = merge_segments({make_segment(PostureClass::P3_BentForward, 0, 2),
                                      make_segment(PostureClass::P3_BentForward, 2, 4)});
  REQUIRE(joined.size() == 1);
  CHECK(joined[0].valid);
}

TEST_CASE("report conserves valid duration on random segments") {
  testgen::Gen g(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<AnnotationSegment> subs;
    double t = g.uniform(0, 5);
    for (std::size_t k = 0, n = g.index(0, 5); k < n; ++k) {
      const double len = g.uniform(5, 40);
      subs.push_back(interval("S" + std::to_string(k), t, t + len, AnnotationKind::subgoal));
      t += len + (g.coin() ? g.uniform(0, 5) : 0.0);
    }
    std::vector<PostureSegment> segs;
    for (std::size_t k = 0, n = g.index(0, 15); k < n; ++k) {
      const double s = g.uniform(0, t + 10);
      segs.push_back(make_segment(kAllPostureClasses[g.index(0, 6)], s, s + g.uniform(0.5, 30)));
    }
    const auto rep = aggregate_report(segs, subs, 216.0);
    double valid_total = 0.0;
    for (const auto& s : segs)
      if (s.valid) valid_total += s.duration();
    CHECK(std::abs(rep.apportioned_total() - valid_total) <= 1e-9);
    double totals = 0.0;
    for (std::size_t c = 0; c < kPostureClassCount; ++c) {
      totals += rep.totals[c].duration_s;
      CHECK(rep.seconds_per_minute[c] == doctest::Approx(rep.totals[c].duration_s / 3.6).epsilon(1e-12));
    }
    CHECK(std::abs(totals - valid_total) <= 1e-9);
  }
}

TEST_CASE("report apportions by intersection and counts touched subgoals") {
  const std::vector<AnnotationSegment> subs = {interval("A", 0, 30, AnnotationKind::subgoal),
                                               interval("B", 30, 60, AnnotationKind::subgoal)};
  const std::vector<PostureSegment> segs = {make_segment(PostureClass::P4_StronglyBentForward, 25, 40),
                                            make_segment(PostureClass::P3_BentForward, 50, 52),
                                            make_segment(PostureClass::P3_BentForward, 58, 66)};
  const auto rep = aggregate_report(segs, subs, 60.0);
  const auto p4 = index_of(PostureClass::P4_StronglyBentForward);
  const auto p3 = index_of(PostureClass::P3_BentForward);
  CHECK(rep.rows[0].tallies[p4] == ClassTally{1, 5.0});
  CHECK(rep.rows[1].tallies[p4] == ClassTally{1, 10.0});
  CHECK(rep.rows[1].tallies[p3] == ClassTally{1, 2.0});
  CHECK(rep.unassigned.tallies[p3] == ClassTally{1, 6.0});
  CHECK(rep.totals[p3] == ClassTally{1, 8.0});
  CHECK(rep.seconds_per_minute[p4] == 15.0);
  const auto csv = write_report(rep);
  CHECK(csv.find("(unassigned)") != std::string::npos);
  CHECK(csv.find("Task cycle") != std::string::npos);
  CHECK_THROWS_AS(aggregate_report(segs, subs, 0.0), ValidationError);
  CHECK_THROWS_AS(aggregate_report(segs, {interval("A", 0, 30, AnnotationKind::subgoal), interval("B", 20, 40, AnnotationKind::subgoal)}, 60.0), ValidationError);
}

TEST_CASE("segments from windows use window cores") {
  std::vector<WindowResult> w;
  for (int i = 0; i < 6; ++i) {
    WindowResult r;
    r.start_s = 4.0 * i;
    r.end_s = r.start_s + 8.0;
    r.label = (i >= 2 && i <= 3) ? "P4_StronglyBentForward" : kNeutralLabel;
    r.active = {r.label};
    w.push_back(r);
  }
  const auto segs = segments_from_windows(w, 0.0, 28.0, 8.0, 4.0);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].posture == PostureClass::P4_StronglyBentForward);
  CHECK(segs[0].start_s == 10.0);
  CHECK(segs[0].end_s == 18.0);
  CHECK(segs[0].valid);
}

TEST_CASE("detection recovers a scripted bend") {
  const auto lib = shape_library();
  const auto seq = testgen::sequence_of(
      [](double t) { return t >= 12.0 && t < 28.0 ? testgen::posture_shape(PostureClass::P4_StronglyBentForward)
                                                  : synth::BodyPose{}; },
      40.0);
  const auto det = detect_postures(seq, lib);
  CHECK(det.windows.size() == window_count(40.0));
  std::size_t found = 0;
  for (const auto& s : det.segments) {
    if (s.posture != PostureClass::P4_StronglyBentForward) continue;
    ++found;
    CHECK(std::abs(s.start_s - 12.0) <= 4.0);
    CHECK(std::abs(s.end_s - 28.0) <= 4.0);
  }
  CHECK(found == 1);
  CHECK(write_windows(det.windows).find("P4_StronglyBentForward") != std::string::npos);
  CHECK(write_segments(det.segments).find("P4_StronglyBentForward") != std::string::npos);
}

TEST_CASE("detection argument errors") {
  auto lib = shape_library();
  const auto short_seq = testgen::sequence_of([](double) { return synth::BodyPose{}; }, 5.0);
  CHECK_THROWS_AS(detect_postures(short_seq, lib), ValidationError);
  dtw::ExemplarLibrary partial;
  partial.add("P3_BentForward", lib.exemplars[1].sequence);
  const auto seq = testgen::sequence_of([](double) { return synth::BodyPose{}; }, 10.0);
  CHECK_THROWS_AS(detect_postures(seq, partial), ValidationError);
}

TEST_CASE("exemplar cutting yields posture and neutral windows") {
  const auto seq = testgen::sequence_of(
      [](double t) { return t >= 10.0 && t < 30.0 ? testgen::posture_shape(PostureClass::P3_BentForward)
                                                  : synth::BodyPose{}; },
      60.0);
  std::vector<AnnotationSegment> iv = {interval("P3_BentForward", 10, 30, AnnotationKind::posture),
                                       interval("P4_StronglyBentForward", 40, 43, AnnotationKind::posture)};
  dtw::ExemplarLibrary lib;
  add_exemplars(lib, seq, iv);
  CHECK(lib.count("P3_BentForward") == 4);  // starts 10, 14, 18, 22
  CHECK(lib.count("P4_StronglyBentForward") == 0);
  CHECK(lib.count(kNeutralLabel) >= 1);
  for (const auto& e : lib.exemplars) CHECK(e.sequence.dim() == PostureFeatures::kDim);
}
