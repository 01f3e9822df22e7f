#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

#include "densepack/errors.hpp"
#include "densepack/suppression.hpp"

using namespace densepack;

namespace {

Detection det(double x0, double y0, double x1, double y1, double score,
              std::int64_t image = 1, std::int64_t cat = 1) {
  return {image, cat, {x0, y0, x1, y1}, score};
}

std::vector<Detection> random_instance(oracles::Rng& rng, int max_boxes) {
  std::vector<Detection> dets;
  const int n = rng.uniform_int(0, max_boxes);
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(0, 80), y = rng.uniform(0, 80);
    const double w = rng.uniform(5, 40), h = rng.uniform(5, 40);
    dets.push_back(det(x, y, x + w, y + h, rng.uniform(0.05, 1.0)));
  }
  return dets;
}

bool same_keep(const std::vector<Detection>& got,
               const std::vector<oracles::KeptBox>& want,
               const std::vector<Detection>& input) {
  if (got.size() != want.size()) return false;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const Detection& expected = input[want[i].input_index];
    if (got[i].box != expected.box) return false;
    if (std::abs(got[i].score - want[i].score) > 1e-9) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("hard nms keeps the stronger of two overlapping boxes") {
  // IoU((0,0,10,10),(0,0,10,8)) = 80/100 = 0.8
  const std::vector<Detection> dets = {det(0, 0, 10, 10, 0.9),
                                       det(0, 0, 10, 8, 0.8)};
  SuppressionConfig cfg;
  const auto kept = suppress(dets, cfg);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].score == 0.9);
}

TEST_CASE("disjoint boxes survive any method unchanged") {
  const std::vector<Detection> dets = {det(0, 0, 10, 10, 0.9),
                                       det(50, 50, 60, 60, 0.3)};
  for (const auto method : {NmsMethod::hard_nms, NmsMethod::soft_nms_linear,
                            NmsMethod::soft_nms_gaussian}) {
    SuppressionConfig cfg;
    cfg.method = method;
    const auto kept = suppress(dets, cfg);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].score == 0.9);
    CHECK(kept[1].score == 0.3);
  }
}

TEST_CASE("soft nms linear decay") {
  // IoU = 75/100 = 0.75
  const std::vector<Detection> dets = {det(0, 0, 10, 10, 0.9),
                                       det(0, 0, 10, 7.5, 0.8)};
  SuppressionConfig cfg;
  cfg.method = NmsMethod::soft_nms_linear;
  const auto kept = suppress(dets, cfg);
  REQUIRE(kept.size() == 2);
  CHECK(kept[1].score == doctest::Approx(0.8 * (1.0 - 0.75)).epsilon(1e-12));
}

TEST_CASE("soft nms gaussian decay") {
  // IoU = 60/100 = 0.6, decay exp(-0.36/0.5) = exp(-0.72)
  const std::vector<Detection> dets = {det(0, 0, 10, 10, 0.9),
                                       det(0, 0, 10, 6, 0.8)};
  SuppressionConfig cfg;
  cfg.method = NmsMethod::soft_nms_gaussian;
  const auto kept = suppress(dets, cfg);
  REQUIRE(kept.size() == 2);
  CHECK(kept[1].score ==
        doctest::Approx(0.8 * std::exp(-0.72)).epsilon(1e-12));
  CHECK(0.8 * std::exp(-0.72) == doctest::Approx(0.8 * 0.4868).epsilon(1e-4));
}

TEST_CASE("all methods agree with the re-sorting reference") {
  oracles::Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const auto dets = random_instance(rng, 12);
    for (const auto method : {NmsMethod::hard_nms, NmsMethod::soft_nms_linear,
                              NmsMethod::soft_nms_gaussian}) {
      SuppressionConfig cfg;
      cfg.method = method;
      cfg.iou_threshold = 0.5;
      const auto got = suppress(dets, cfg);
      const auto want = oracles::suppress_reference(dets, cfg);
      CHECK(same_keep(got, want, dets));
    }
  }
}

TEST_CASE("hard nms output is pairwise non-overlapping above the threshold") {
  oracles::Rng rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const auto dets = random_instance(rng, 12);
    SuppressionConfig cfg;
    const auto kept = suppress(dets, cfg);
    for (std::size_t i = 0; i < kept.size(); ++i)
      for (std::size_t j = i + 1; j < kept.size(); ++j)
        CHECK(iou(kept[i].box, kept[j].box) <= cfg.iou_threshold);
  }
}

TEST_CASE("permuting the input leaves the surviving set unchanged") {
  oracles::Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    auto dets = random_instance(rng, 10);
    SuppressionConfig cfg;
    cfg.method = NmsMethod::soft_nms_gaussian;
    auto canon = [](std::vector<Detection> v) {
      std::sort(v.begin(), v.end(), [](const Detection& a, const Detection& b) {
        return std::tie(a.box.x_min, a.box.y_min, a.box.x_max, a.box.y_max) <
               std::tie(b.box.x_min, b.box.y_min, b.box.x_max, b.box.y_max);
      });
      return v;
    };
    const auto before = canon(suppress(dets, cfg));
    std::shuffle(dets.begin(), dets.end(), rng.gen);
    const auto after = canon(suppress(dets, cfg));
    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
      CHECK(before[i].box == after[i].box);
      CHECK(before[i].score == doctest::Approx(after[i].score).epsilon(1e-12));
    }
  }
}

TEST_CASE("soft nms with zero floor preserves cardinality") {
  oracles::Rng rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    const auto dets = random_instance(rng, 12);
    for (const auto method :
         {NmsMethod::soft_nms_linear, NmsMethod::soft_nms_gaussian}) {
      SuppressionConfig cfg;
      cfg.method = method;
      cfg.score_floor = 0.0;
      CHECK(suppress(dets, cfg).size() == dets.size());
    }
  }
}

TEST_CASE("hard nms at threshold 1 is the identity without exact duplicates") {
  oracles::Rng rng(41);
  const auto dets = random_instance(rng, 12);
  SuppressionConfig cfg;
  cfg.iou_threshold = 1.0;
  CHECK(suppress(dets, cfg).size() == dets.size());
}

TEST_CASE("normalized area scoring") {
  const std::vector<Detection> dets = {det(0, 0, 10, 10, 0.1),
                                       det(30, 30, 50, 50, 0.9)};
  SuppressionConfig cfg;
  cfg.scoring = ScoreSource::normalized_area;

  SUBCASE("image basis orders by area and reports area fractions") {
    const auto kept = suppress(dets, cfg, 1000.0);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].box == dets[1].box);  // 400 px^2 outranks 100 px^2
    CHECK(kept[0].score == 400.0 / 1000.0);
    CHECK(kept[1].score == 100.0 / 1000.0);
  }
  SUBCASE("image basis requires the image area") {
    CHECK_THROWS_AS(suppress(dets, cfg), ValidationError);
  }
  SUBCASE("max_box basis normalizes by the largest box") {
    cfg.area_basis = AreaBasis::max_box;
    const auto kept = suppress(dets, cfg);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].score == 1.0);
    CHECK(kept[1].score == 0.25);
  }
}

TEST_CASE("input from several images or categories is rejected") {
  SuppressionConfig cfg;
  CHECK_THROWS_AS(
      suppress({det(0, 0, 1, 1, 0.5, 1), det(0, 0, 1, 1, 0.5, 2)}, cfg),
      ValidationError);
  CHECK_THROWS_AS(
      suppress({det(0, 0, 1, 1, 0.5, 1, 1), det(0, 0, 1, 1, 0.5, 1, 2)}, cfg),
      ValidationError);
}

TEST_CASE("max_output caps the kept list") {
  oracles::Rng rng(43);
  const auto dets = random_instance(rng, 12);
  SuppressionConfig cfg;
  cfg.iou_threshold = 1.0;
  cfg.max_output = 3;
  CHECK(suppress(dets, cfg).size() == std::min<std::size_t>(3, dets.size()));
}

TEST_CASE("merge_tiled resolves cross-tile duplicates") {
  // two tiles of a 1000x1000 frame, overlap strip x in [444, 556]
  const std::vector<TileManifestEntry> manifest = {
      {101, "f_r0c0.png", 1, 0, 0, 556, 1000},
      {102, "f_r0c1.png", 1, 444, 0, 556, 1000},
  };
  // the same physical object seen by both tiles
  std::vector<Detection> dets = {
      det(460, 100, 540, 180, 0.90, 101),  // frame coords 460..540
      det(16, 100, 96, 180, 0.88, 102),    // frame coords 460..540 too
      det(10, 10, 60, 60, 0.70, 101),      // interior of tile 0
      det(400, 400, 460, 460, 0.60, 102),  // interior of tile 1
  };
  SuppressionConfig cfg;
  const auto merged = merge_tiled(dets, manifest, cfg);
  REQUIRE(merged.size() == 3);
  for (const auto& m : merged) CHECK(m.image_id == 1);
  CHECK(merged[0].score == 0.9);
  CHECK(merged[0].box == BBox{460, 100, 540, 180});

  // frame-coordinate detections pass through untouched
  const auto merged2 =
      merge_tiled({det(5, 5, 25, 25, 0.5, 1)}, manifest, cfg);
  REQUIRE(merged2.size() == 1);
  CHECK(merged2[0].box == BBox{5, 5, 25, 25});
}
