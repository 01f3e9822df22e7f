#include <cmath>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include "densepack/errors.hpp"
#include "densepack/eval.hpp"
#include "densepack/io_util.hpp"

using namespace densepack;

namespace {

Dataset one_box_gt() {
  Dataset d;
  d.categories.push_back({1, "object"});
  d.images.push_back({1, "img.png", {640, 480}});
  const BBox box{0, 0, 10, 10};
  d.annotations.push_back({1, 1, 1, box, box.area(), false});
  return d;
}

void check_against_reference(const Dataset& gt,
                             const std::vector<Detection>& dets,
                             double tol = 1e-6) {
  const EvalResult got = evaluate(gt, dets);
  const oracles::EvalReference want = oracles::evaluate_reference(gt, dets);
  CHECK(got.map == doctest::Approx(want.map).epsilon(0).scale(1).epsilon(0));
  CHECK(std::abs(got.map - want.map) < tol);
  CHECK(std::abs(got.ap50 - want.ap50) < tol);
  CHECK(std::abs(got.ap75 - want.ap75) < tol);
  REQUIRE(got.ar_at_max_dets.size() == want.ar_at_max_dets.size());
  for (std::size_t i = 0; i < want.ar_at_max_dets.size(); ++i) {
    CHECK(std::abs(got.ar_at_max_dets[i] - want.ar_at_max_dets[i]) < tol);
  }
}

}  // namespace

TEST_CASE("a perfect detection scores 1.0 everywhere") {
  const Dataset gt = one_box_gt();
  const std::vector<Detection> dets = {{1, 1, {0, 0, 10, 10}, 1.0}};
  const EvalResult r = evaluate(gt, dets);
  CHECK(r.map == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.ap50 == doctest::Approx(1.0).epsilon(1e-9));
  REQUIRE(r.ar_at_max_dets.size() == 3);
  CHECK(r.ar_at_max_dets[0] == doctest::Approx(1.0).epsilon(1e-9));  // AR@1
}

TEST_CASE("no detections scores 0") {
  const EvalResult r = evaluate(one_box_gt(), {});
  CHECK(r.map == 0.0);
  CHECK(r.ap50 == 0.0);
  CHECK(r.ar_at_max_dets[2] == 0.0);
}

TEST_CASE("an IoU-0.8 detection passes 7 of 10 thresholds") {
  const Dataset gt = one_box_gt();
  // (0,0,10,8) vs (0,0,10,10): IoU = 80/100
  const std::vector<Detection> dets = {{1, 1, {0, 0, 10, 8}, 0.9}};
  const EvalResult r = evaluate(gt, dets);
  CHECK(r.map == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(r.ap50 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.ap75 == doctest::Approx(1.0).epsilon(1e-9));
  check_against_reference(gt, dets);
}

TEST_CASE("random scenes agree with the naive reference") {
  for (int trial = 0; trial < 50; ++trial) {
    const auto seed = static_cast<std::uint64_t>(101 + trial);
    const Dataset gt = oracles::make_random_scenes(3, 8, seed, trial % 3 == 0,
                                                   trial % 2 == 0 ? 1 : 2);
    const auto dets = oracles::make_random_detections(gt, 0.8, 2, seed * 7 + 1);
    check_against_reference(gt, dets);
  }
}

TEST_CASE("appending a weakest false positive never raises AP") {
  oracles::Rng rng(131);
  for (int trial = 0; trial < 20; ++trial) {
    const Dataset gt = oracles::make_random_scenes(2, 6, 131 + trial);
    auto dets = oracles::make_random_detections(gt, 0.9, 1, 777 + trial);
    if (dets.empty() || gt.annotations.empty()) continue;
    const EvalResult before = evaluate(gt, dets);
    double weakest = 1.0;
    for (const auto& det : dets) weakest = std::min(weakest, det.score);
    dets.push_back({gt.images[0].id, gt.categories[0].id,
                    {600, 400, 620, 420}, weakest * 0.5});
    const EvalResult after = evaluate(gt, dets);
    CHECK(after.map <= before.map + 1e-12);
    CHECK(after.ap50 <= before.ap50 + 1e-12);
  }
}

TEST_CASE("duplicating a true positive at lower score never raises AP") {
  const Dataset gt = one_box_gt();
  std::vector<Detection> dets = {{1, 1, {0, 0, 10, 10}, 0.9}};
  const EvalResult before = evaluate(gt, dets);
  dets.push_back({1, 1, {0, 0, 10, 10}, 0.4});
  const EvalResult after = evaluate(gt, dets);
  CHECK(after.map <= before.map + 1e-12);
}

TEST_CASE("AR grows with the detection budget") {
  for (int trial = 0; trial < 10; ++trial) {
    const Dataset gt = oracles::make_random_scenes(3, 8, 137 + trial);
    const auto dets = oracles::make_random_detections(gt, 0.9, 3, 911 + trial);
    const EvalResult r = evaluate(gt, dets);
    REQUIRE(r.ar_at_max_dets.size() == 3);
    CHECK(r.ar_at_max_dets[0] <= r.ar_at_max_dets[1] + 1e-12);
    CHECK(r.ar_at_max_dets[1] <= r.ar_at_max_dets[2] + 1e-12);
  }
}

TEST_CASE("metrics depend on score ranking only") {
  const Dataset gt = oracles::make_random_scenes(3, 8, 139);
  auto dets = oracles::make_random_detections(gt, 0.8, 2, 913);
  const EvalResult before = evaluate(gt, dets);
  for (auto& det : dets) det.score *= 0.5;
  const EvalResult after = evaluate(gt, dets);
  CHECK(before.map == after.map);
  CHECK(before.ap50 == after.ap50);
  CHECK(before.ar_at_max_dets == after.ar_at_max_dets);
}

TEST_CASE("crowd ground truth is an ignore region") {
  Dataset gt;
  gt.categories.push_back({1, "object"});
  gt.images.push_back({1, "img.png", {640, 480}});
  const BBox real{0, 0, 10, 10}, crowd{100, 100, 200, 200};
  gt.annotations.push_back({1, 1, 1, real, real.area(), false});
  gt.annotations.push_back({2, 1, 1, crowd, crowd.area(), true});

  // one TP plus one detection swallowed by the crowd region
  const std::vector<Detection> dets = {{1, 1, {0, 0, 10, 10}, 0.9},
                                       {1, 1, {120, 120, 180, 180}, 0.8}};
  const EvalResult r = evaluate(gt, dets);
  CHECK(r.map == doctest::Approx(1.0).epsilon(1e-9));  // crowd match is not a FP
  check_against_reference(gt, dets);
}

TEST_CASE("empty ground truth gives a defined all-zero result with a warning") {
  Dataset gt;
  gt.categories.push_back({1, "object"});
  gt.images.push_back({1, "img.png", {640, 480}});
  const EvalResult r = evaluate(gt, {});
  CHECK(r.map == 0.0);
  CHECK(r.ap50 == 0.0);
  CHECK(!r.warnings.empty());
}

TEST_CASE("unknown ids are rejected with the id in the message") {
  const Dataset gt = one_box_gt();
  CHECK_THROWS_WITH_AS(evaluate(gt, {{5, 1, {0, 0, 1, 1}, 0.5}}),
                       doctest::Contains("5"), ValidationError);
  CHECK_THROWS_AS(evaluate(gt, {{1, 9, {0, 0, 1, 1}, 0.5}}), ValidationError);
}

TEST_CASE("evaluate_files matches the stored golden result") {
  const auto fixtures = testsup::fixtures_dir();
  const EvalResult r = evaluate_files(fixtures / "golden_gt.json",
                                      fixtures / "golden_dets.json");

  const auto golden =
      nlohmann::json::parse(read_text_file(fixtures / "golden_eval.json"));
  CHECK(r.map == doctest::Approx(golden["mAP"].get<double>()).epsilon(1e-9));
  CHECK(r.ap50 == doctest::Approx(golden["AP50"].get<double>()).epsilon(1e-9));
  CHECK(r.ap75 == doctest::Approx(golden["AP75"].get<double>()).epsilon(1e-9));
  const auto ar = golden["AR_at_max_dets"].get<std::vector<double>>();
  REQUIRE(r.ar_at_max_dets.size() == ar.size());
  for (std::size_t i = 0; i < ar.size(); ++i) {
    CHECK(r.ar_at_max_dets[i] == doctest::Approx(ar[i]).epsilon(1e-9));
  }

  // the reference evaluator reproduces the same golden numbers
  const Dataset gt = load_dataset(fixtures / "golden_gt.json");
  const auto dets = load_detections(fixtures / "golden_dets.json", gt);
  const oracles::EvalReference ref = oracles::evaluate_reference(gt, dets);
  CHECK(ref.map == doctest::Approx(golden["mAP"].get<double>()).epsilon(1e-6));
}

TEST_CASE("per-threshold PR curves are retained and monotone on average") {
  const Dataset gt = oracles::make_random_scenes(3, 8, 149);
  const auto dets = oracles::make_random_detections(gt, 0.8, 2, 919);
  const EvalResult r = evaluate(gt, dets);
  REQUIRE(r.pr_curves.size() == 10);
  for (const auto& curve : r.pr_curves) {
    REQUIRE(curve.size() == 101);
    for (std::size_t i = 1; i < curve.size(); ++i) {
      CHECK(curve[i] <= curve[i - 1] + 1e-12);  // interpolated precision
    }
  }
}

TEST_CASE("threads do not change the result") {
  const Dataset gt = oracles::make_random_scenes(6, 8, 151);
  const auto dets = oracles::make_random_detections(gt, 0.8, 2, 921);
  const EvalResult a = evaluate(gt, dets, {}, 1);
  const EvalResult b = evaluate(gt, dets, {}, 8);
  CHECK(a.map == b.map);
  CHECK(a.ar_at_max_dets == b.ar_at_max_dets);
  CHECK(a.pr_curves == b.pr_curves);
}
