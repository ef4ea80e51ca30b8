#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "fcrseg/metrics.hpp"
#include "oracles/oracles.hpp"
#include "test_util.hpp"

using namespace fcrseg;

namespace {

LabelImage from_rows(const std::vector<std::string>& rows) {
  LabelImage l(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()), 0);
  for (int y = 0; y < l.height(); ++y)
    for (int x = 0; x < l.width(); ++x) {
      const char c = rows[y][x];
      l(y, x) = c == '.' ? 0 : c - '0';
    }
  return l;
}

// Perturbs a label map: shifts, erases or merges objects.
LabelImage perturb(std::mt19937& rng, const LabelImage& gt) {
  LabelImage p = gt;
  std::uniform_int_distribution<int> op(0, 3);
  std::uniform_int_distribution<int> id(1, 10);
  const int kind = op(rng);
  const int a = id(rng), b = id(rng);
  for (auto& v : p.pixels()) {
    if (kind == 0 && v == a) v = 0;
    if (kind == 1 && v == a) v = b;
  }
  if (kind == 2) {
    LabelImage s(gt.height(), gt.width(), 0);
    for (int y = 0; y < gt.height(); ++y)
      for (int x = 1; x < gt.width(); ++x) s(y, x) = gt(y, x - 1);
    p = s;
  }
  if (kind == 3) {
    std::uniform_int_distribution<int> py(0, gt.height() - 1), px(0, gt.width() - 1);
    for (int i = 0; i < 30; ++i) p(py(rng), px(rng)) = id(rng);
  }
  return p;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("identity and empty predictions") {
  std::mt19937 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const LabelImage gt = oracle::random_rects(rng, 12, 12, 6);
    if (oracle::ids_of(gt).empty()) continue;
    CHECK(aggregated_jaccard(gt, gt) == 1.0);
    CHECK(dice2(gt, gt) == 1.0);
    CHECK(panoptic_quality(gt, gt) == 1.0);
    CHECK(f1_score(match_instances(gt, gt)) == 1.0);
    const LabelImage empty(12, 12, 0);
    CHECK(aggregated_jaccard(empty, gt) == 0.0);
    CHECK(panoptic_quality(empty, gt) == 0.0);
    CHECK(dice2(empty, gt) == 0.0);
    CHECK(f1_score(match_instances(empty, gt)) == 0.0);
  }
  const LabelImage none(4, 4, 0);
  CHECK(aggregated_jaccard(none, none) == 1.0);
  CHECK(f1_score(match_instances(none, none)) == 1.0);
}

TEST_CASE("metrics match definitional oracles") {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const LabelImage gt = oracle::random_rects(rng, 10, 12, 10);
    const LabelImage pred = trial % 4 == 0 ? oracle::random_rects(rng, 10, 12, 10) : perturb(rng, gt);
    CHECK(std::abs(aggregated_jaccard(pred, gt) - oracle::aji(pred, gt)) < 1e-9);
    CHECK(std::abs(dice2(pred, gt) - oracle::dice2(pred, gt)) < 1e-9);
    CHECK(std::abs(panoptic_quality(pred, gt) - oracle::pq(pred, gt)) < 1e-9);
    CHECK(std::abs(f1_score(match_instances(pred, gt)) - oracle::f1(pred, gt)) < 1e-9);
  }
}

TEST_CASE("PQ = 0.6 on the 4-pixel fixture") {
  const LabelImage gt = from_rows({"....", ".11.", ".11.", "...."});
  const LabelImage pred = from_rows({"....", ".11.", ".1..", ".1.."});
  const Matching m = match_instances(pred, gt);
  REQUIRE(m.pairs.size() == 1);
  CHECK(m.pairs[0].iou == doctest::Approx(0.6));
  CHECK(panoptic_quality(pred, gt) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("F1 with TP=2, FP=1, FN=1") {
  const LabelImage gt = from_rows({"11..22..", "11..22..", "........", "33......"});
  const LabelImage pred = from_rows({"11..22..", "11..22..", "........", "......44"});
  const Matching m = match_instances(pred, gt);
  CHECK(m.true_positives() == 2);
  CHECK(m.false_positives() == 1);
  CHECK(m.false_negatives() == 1);
  CHECK(f1_score(m) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("matching equals the exhaustive optimal assignment") {
  // 3 gt, 2 predictions on 8x8.
  const LabelImage gt = from_rows({"111.....", "111.....", "111..222", ".....222",
                                   ".....222", "........", "33......", "33......"});
  const LabelImage pred = from_rows({"11......", "11......", "11...222", ".....222",
                                     ".....22.", "........", "........", "......11"});
  const Matching m = match_instances(pred, gt);
  // Brute force: try every injective map gt -> pred or nothing, keep IoU > 0.5 pairs,
  // maximise the number of pairs then the IoU sum.
  const auto g_ids = oracle::ids_of(gt);
  const auto p_ids = oracle::ids_of(pred);
  int best_n = -1;
  double best_sum = -1;
  std::vector<int> choice(g_ids.size(), -1);
  std::function<void(std::size_t, std::vector<bool>&)> rec = [&](std::size_t i, std::vector<bool>& used) {
    if (i == g_ids.size()) {
      int n = 0;
      double s = 0;
      for (std::size_t g = 0; g < g_ids.size(); ++g) {
        if (choice[g] < 0) continue;
        const double v = oracle::iou(pred, gt, p_ids[choice[g]], g_ids[g]);
        if (v <= 0.5) return;
        ++n;
        s += v;
      }
      if (n > best_n || (n == best_n && s > best_sum)) {
        best_n = n;
        best_sum = s;
      }
      return;
    }
    choice[i] = -1;
    rec(i + 1, used);
    for (std::size_t p = 0; p < p_ids.size(); ++p) {
      if (used[p]) continue;
      used[p] = true;
      choice[i] = static_cast<int>(p);
      rec(i + 1, used);
      used[p] = false;
    }
    choice[i] = -1;
  };
  std::vector<bool> used(p_ids.size(), false);
  rec(0, used);
  double sum = 0;
  for (const auto& p : m.pairs) sum += p.iou;
  CHECK(m.true_positives() == best_n);
  CHECK(sum == doctest::Approx(best_sum));
  CHECK(best_n == 2);
}

TEST_CASE("merged prediction: AJI and Dice2 against the oracle") {
  const LabelImage gt = from_rows({"11..22..", "11..22..", "11..22..", "........",
                                   "........", "........", "........", "........"});
  const LabelImage merged = from_rows({"11111...", "11111...", "11111...", "........",
                                       "........", "........", "........", "........"});
  CHECK(aggregated_jaccard(merged, gt) == doctest::Approx(oracle::aji(merged, gt)).epsilon(1e-12));
  // gt1 picks the merge (IoU 6/15); gt2 overlaps it by 3 of 6 -> IoU 3/18 also the merge.
  CHECK(aggregated_jaccard(merged, gt) == doctest::Approx((6.0 + 3.0) / (15.0 + 18.0)));
  const LabelImage half = from_rows({"11......", "11......", "........", "........",
                                     "........", "........", "........", "........"});
  LabelImage one = from_rows({"11......", "11......", "11......", "........",
                              "........", "........", "........", "........"});
  CHECK(dice2(half, one) == doctest::Approx(oracle::dice2(half, one)));
  CHECK(dice2(half, one) == doctest::Approx(2.0 * 4 / (4 + 6)));
}

TEST_CASE("metric properties") {
  std::mt19937 rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    const LabelImage gt = oracle::random_rects(rng, 10, 10, 8);
    const LabelImage pred = perturb(rng, gt);
    // Relabeling invariance. Overlap ties go to the lowest id, so the map keeps id order.
    LabelImage shuffled = pred;
    for (auto& v : shuffled.pixels())
      if (v != 0) v = 3 * v + 7;
    CHECK(aggregated_jaccard(shuffled, gt) == doctest::Approx(aggregated_jaccard(pred, gt)));
    CHECK(dice2(shuffled, gt) == doctest::Approx(dice2(pred, gt)));
    CHECK(panoptic_quality(shuffled, gt) == doctest::Approx(panoptic_quality(pred, gt)));
    for (double v : {aggregated_jaccard(pred, gt), dice2(pred, gt), panoptic_quality(pred, gt),
                     f1_score(match_instances(pred, gt))}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    const Matching m = match_instances(pred, gt);
    if (m.true_positives() > 0 && m.false_positives() == 0 && m.false_negatives() == 0) {
      double mean_iou = 0;
      for (const auto& p : m.pairs) mean_iou += p.iou;
      mean_iou /= m.true_positives();
      CHECK(aggregated_jaccard(pred, gt) <= mean_iou + 1e-12);
    }
  }
  CHECK_THROWS_AS(match_instances(LabelImage(2, 2), LabelImage(2, 2), 1.0), ConfigError);
  CHECK_THROWS_AS(aggregated_jaccard(LabelImage(2, 2), LabelImage(2, 3)), ShapeError);
}

TEST_CASE("EvalReport means and CSV round trip") {
  std::mt19937 rng(44);
  EvalReport r;
  for (int i = 0; i < 5; ++i) {
    const LabelImage gt = oracle::random_rects(rng, 10, 10, 5);
    r.add("img" + std::to_string(i), perturb(rng, gt), gt);
  }
  double aji = 0;
  for (const auto& s : r.per_image) aji += s.aji;
  CHECK(std::abs(r.means.aji - aji / 5) < 1e-9);

  testing_util::TempDir dir("csv");
  write_report_csv(dir.path() / "r.csv", r);
  const EvalReport back = read_report_csv(dir.path() / "r.csv");
  REQUIRE(back.per_image.size() == 5);
  CHECK(back.per_image[2].image == "img2");
  CHECK(std::abs(back.means.aji - r.means.aji) < 5e-5);
}

}  // TEST_SUITE
