#include "generators.hpp"
#include "oracles.hpp"
#include "worksight/error.hpp"
#include "worksight/metrics.hpp"

#include <doctest.h>

#include <cmath>

using namespace worksight;
using namespace worksight::metrics;

TEST_CASE("MPJPE and PCK match naive recomputation") {
  testgen::Gen g(55);
  const auto& topo = body15_topology();
  for (int trial = 0; trial < 20; ++trial) {
    const auto gt = g.pose_sequence(topo, g.index(1, 30), 30.0);
    auto pred = gt;
    for (auto& f : pred.frames)
      for (auto& p : f.positions) p += g.vec3(0.1);
    const auto table = evaluate_poses(pred, gt, JointMap::identity(topo));
    CHECK(std::abs(table.mean_mpjpe_mm - oracle::naive_mpjpe_mm(pred, gt)) <= 1e-9);
    CHECK(std::abs(table.mean_pck - oracle::naive_pck(pred, gt, 150.0)) <= 1e-9);
    CHECK(std::abs(mpjpe(pred, gt, JointMap::identity(topo)).mean_mpjpe_mm - table.mean_mpjpe_mm) <= 1e-12);
    for (double thr : {50.0, 150.0, 300.0})
      CHECK(std::abs(pck(pred, gt, JointMap::identity(topo), thr).overall - oracle::naive_pck(pred, gt, thr)) <= 1e-9);
  }
}

TEST_CASE("PCK threshold boundary") {
  const auto& topo = body15_topology();
  PoseSequence gt;
  gt.topology = topo;
  PoseFrame f;
  f.positions.assign(15, Vec3::Zero());
  f.confidences.assign(15, 1.0);
  gt.frames = {f};
  auto pred = gt;
  pred.frames[0].positions[0] = Vec3(0.1499, 0, 0);
  pred.frames[0].positions[1] = Vec3(0, 0.1501, 0);
  const auto r = pck(pred, gt, JointMap::identity(topo));
  CHECK(r.per_joint[0].second == 1.0);
  CHECK(r.per_joint[1].second == 0.0);
  CHECK(r.overall == doctest::Approx(14.0 / 15.0));
}

TEST_CASE("left/right joints are averaged into pairs") {
  const auto& topo = body15_topology();
  PoseSequence gt;
  gt.topology = topo;
  PoseFrame f;
  f.positions.assign(15, Vec3::Zero());
  f.confidences.assign(15, 1.0);
  gt.frames = {f};
  auto pred = gt;
  pred.frames[0].positions[topo.require("l_wrist")] = Vec3(0.1, 0, 0);
  pred.frames[0].positions[topo.require("r_wrist")] = Vec3(0.3, 0, 0);
  const auto t = evaluate_poses(pred, gt, JointMap::identity(topo));
  bool seen = false;
  for (const auto& p : t.pairs)
    if (p.joint.find("wrist") != std::string::npos) {
      seen = true;
      CHECK(p.mpjpe_mm == doctest::Approx(200.0));
      CHECK(p.pck == doctest::Approx(0.5));
    }
  CHECK(seen);
  CHECK(t.pairs.size() < t.joints.size());
  CHECK(write_joint_table(t).find("wrist") != std::string::npos);
}

TEST_CASE("joint maps") {
  const auto m = JointMap::for_topologies(body15_topology(), mocap24_topology());
  CHECK(m.pairs.size() == 15);
  CHECK(JointMap::for_topologies(body15_topology(), body15_topology()).pairs.size() == 15);
  CHECK_THROWS_AS(JointMap::for_topologies(body25_topology(), mocap24_topology()), ValidationError);
  const auto parsed = JointMap::parse("# c\nhip,Hips\nneck , Neck\n");
  REQUIRE(parsed.pairs.size() == 2);
  CHECK(parsed.pairs[1].second == "Neck");
  CHECK_THROWS_AS(JointMap::parse("hip\n"), ValidationError);
  testgen::Gen g(1);
  const auto a = g.pose_sequence(body15_topology(), 3, 30.0);
  CHECK_THROWS_AS(evaluate_poses(a, a, JointMap::parse("hip,tail\n")), ValidationError);
  CHECK_THROWS_AS(evaluate_poses(a, g.pose_sequence(body15_topology(), 2, 30.0), JointMap::identity(body15_topology())),
                  ValidationError);
}

TEST_CASE("time alignment picks the nearest ground-truth frame") {
  testgen::Gen g(2);
  const auto gt = g.pose_sequence(body15_topology(), 60, 60.0);
  auto pred = g.pose_sequence(body15_topology(), 30, 30.0);
  for (auto& f : pred.frames) f.timestamp += 0.004;
  const auto pairs = align_by_time(pred, gt, 0.01);
  REQUIRE(pairs.size() == 30);
  for (const auto& [p, q] : pairs) CHECK(q == 2 * p);
  CHECK(align_by_time(pred, gt, 0.001).empty());
  const auto [a, b] = time_aligned(pred, gt, 0.01);
  CHECK(a.frames.size() == b.frames.size());
}

TEST_CASE("root alignment removes translation") {
  testgen::Gen g(3);
  auto a = g.pose_sequence(body15_topology(), 5, 30.0);
  auto b = a;
  for (auto& f : b.frames)
    for (auto& p : f.positions) p += Vec3(1, 2, 3);
  const auto t = evaluate_poses(root_align(a, "hip"), root_align(b, "hip"), JointMap::identity(body15_topology()));
  CHECK(t.mean_mpjpe_mm < 1e-9);
  CHECK_THROWS_AS(root_align(a, "tail"), ValidationError);
}

TEST_CASE("classification scores on a hand-built confusion") {
  // truth:     0 0 0 1 1 2
  // predicted: 0 0 1 1 2 2
  const auto s = classification_scores({0, 0, 1, 1, 2, 2}, {0, 0, 0, 1, 1, 2}, 3);
  CHECK(s.confusion.at(0, 1) == 1);
  CHECK(s.confusion.row_sum(0) == 3);
  CHECK(s.confusion.col_sum(2) == 2);
  CHECK(s.confusion.total() == 6);
  CHECK(s.recall[0] == doctest::Approx(2.0 / 3.0));
  CHECK(s.precision[1] == doctest::Approx(0.5));
  CHECK(s.recall[2] == doctest::Approx(1.0));
  CHECK(s.f1[2] == doctest::Approx(2.0 * 0.5 * 1.0 / 1.5));
  CHECK(s.overall_accuracy == doctest::Approx(4.0 / 6.0));
  CHECK(s.macro_recall == doctest::Approx((2.0 / 3.0 + 0.5 + 1.0) / 3.0));
  CHECK(s.accuracy[0] == doctest::Approx(5.0 / 6.0));
  const auto absent = classification_scores({0, 0}, {0, 0}, 2);
  CHECK(absent.recall[1] == 0.0);
  CHECK(absent.precision[1] == 0.0);
  CHECK_THROWS_AS(classification_scores({0}, {0, 1}, 2), ValidationError);
  CHECK_THROWS_AS(classification_scores({3}, {0}, 2), ValidationError);
  CHECK(write_confusion(s.confusion).size() > 0);
  CHECK(write_classification_table(s).size() > 0);
}

TEST_CASE("AUC on separated scores is 1") {
  std::vector<std::vector<double>> scores;
  std::vector<int> labels;
  for (int i = 0; i < 20; ++i) {
    const int y = i % 2;
    const double s = y ? 0.6 + 0.01 * i : 0.4 - 0.01 * i;
    scores.push_back({1.0 - s, s});
    labels.push_back(y);
  }
  const auto r = roc_auc_macro(scores, labels, 2);
  CHECK(r.macro_auc == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.curves.size() == 2);
  CHECK(r.curves[0].points.front() == std::pair<double, double>{0.0, 0.0});
  CHECK(r.curves[0].points.back() == std::pair<double, double>{1.0, 1.0});
}

TEST_CASE("AUC on random balanced scores matches the rank statistic") {
  testgen::Gen g(19);
  std::vector<std::vector<double>> scores;
  std::vector<int> labels;
  std::vector<double> pos_score;
  for (int i = 0; i < 200; ++i) {
    const double s = std::round(g.uniform(0, 1) * 50.0) / 50.0;  // forces ties
    scores.push_back({1.0 - s, s});
    labels.push_back(i % 2);
    pos_score.push_back(s);
  }
  const auto r = roc_auc_macro(scores, labels, 2);
  CHECK(r.curves[1].auc == doctest::Approx(oracle::mann_whitney_auc(pos_score, labels)).epsilon(1e-12));
  CHECK(r.macro_auc >= 0.4);
  CHECK(r.macro_auc <= 0.6);
}

TEST_CASE("AUC skips classes without positives") {
  const auto r = roc_auc_macro({{0.9, 0.1, 0.0}, {0.2, 0.8, 0.0}}, {0, 1}, 3);
  CHECK(r.skipped == std::vector<std::size_t>{2});
  CHECK(r.macro_auc == 1.0);
  const auto none = roc_auc_macro({{1.0}}, {0}, 1);
  CHECK(std::isnan(none.macro_auc));
  CHECK(write_roc(none).find("nan") != std::string::npos);
  CHECK_THROWS_AS(roc_auc_macro({{0.5}}, {0, 1}, 1), ValidationError);
  CHECK_THROWS_AS(roc_auc_macro({{std::nan("")}}, {0}, 1), ValidationError);
}
