#include <doctest.h>

#include <cmath>

#include "bas/metrics.hpp"
#include "bas/numeric.hpp"
#include "bas/rng.hpp"
#include "test_util.hpp"

using namespace bas;

namespace {

// Pixel-counting IoU for integer boxes on a finite grid.
double rasterized_iou(const BBox &a, const BBox &b, int grid) {
  long long inter = 0, uni = 0;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const bool in_a = j >= a.x1 && j < a.x2 && i >= a.y1 && i < a.y2;
      const bool in_b = j >= b.x1 && j < b.x2 && i >= b.y1 && i < b.y2;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

BBox random_int_box(Rng &rng, int grid) {
  const int x1 = rng.uniform_int(grid - 1);
  const int y1 = rng.uniform_int(grid - 1);
  const int x2 = x1 + 1 + rng.uniform_int(grid - x1 - 1);
  const int y2 = y1 + 1 + rng.uniform_int(grid - y1 - 1);
  return BBox{static_cast<double>(x1), static_cast<double>(y1), static_cast<double>(x2),
              static_cast<double>(y2)};
}

// Direct per-threshold loop, the independent route for peak_metrics.
PeakResult naive_peak(const Tensor &map01, const Tensor &mask) {
  PeakResult out;
  out.peak_iou = -1.0;
  for (int t = 0; t < 256; ++t) {
    long long inter = 0, uni = 0;
    for (std::size_t i = 0; i < map01.size(); ++i) {
      const bool pred = map01.data[i] * 255.0 > t;
      const bool gt = mask.data[i] > 0.5;
      inter += pred && gt;
      uni += pred || gt;
    }
    out.curve[t] = uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
    if (out.curve[t] > out.peak_iou) {
      out.peak_iou = out.curve[t];
      out.peak_t = t;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("iou fixtures") {
  const BBox a{0, 0, 10, 10};
  CHECK(iou(a, a) == doctest::Approx(1.0));
  CHECK(iou(a, BBox{20, 20, 30, 30}) == doctest::Approx(0.0));
  // 5x5 overlap, union 100 + 100 - 25
  CHECK(iou(a, BBox{5, 5, 15, 15}) == doctest::Approx(25.0 / 175.0));
  CHECK(iou(a, BBox{5, 5, 15, 15}) == doctest::Approx(rasterized_iou(a, BBox{5, 5, 15, 15}, 20)));
  // touching edges do not intersect under half-open semantics
  CHECK(iou(a, BBox{10, 0, 20, 10}) == doctest::Approx(0.0));
}

TEST_CASE("iou matches the pixel-counting oracle on random integer boxes") {
  Rng rng(2024);
  const int grid = 32;
  for (int it = 0; it < 1000; ++it) {
    const BBox a = random_int_box(rng, grid);
    const BBox b = random_int_box(rng, grid);
    const double fast = iou(a, b);
    const double slow = rasterized_iou(a, b, grid);
    CHECK(fast == doctest::Approx(slow).epsilon(1e-12));
    CHECK(fast == doctest::Approx(iou(b, a)));
    CHECK(fast >= 0.0);
    CHECK(fast <= 1.0);
  }
}

TEST_CASE("loc accuracies: hand-enumerated fixture and the 0.5 edge") {
  std::vector<ImageRecord> recs(3);
  recs[0].iou = 0.6;
  recs[0].top1_hit = true;
  recs[0].top5_hit = true;
  recs[1].iou = 0.6;
  recs[1].top1_hit = false;
  recs[1].top5_hit = true;
  recs[2].iou = 0.4;
  recs[2].top1_hit = true;
  recs[2].top5_hit = true;
  const LocAccuracy acc = loc_accuracies(recs);
  CHECK(acc.gt_known == doctest::Approx(200.0 / 3.0));
  CHECK(acc.top1 == doctest::Approx(100.0 / 3.0));
  CHECK(acc.top5 == doctest::Approx(200.0 / 3.0));

  // IoU exactly 0.5 counts as incorrect (strict inequality)
  std::vector<ImageRecord> edge(1);
  edge[0].iou = 0.5;
  edge[0].top1_hit = true;
  edge[0].top5_hit = true;
  const LocAccuracy edge_acc = loc_accuracies(edge);
  CHECK(edge_acc.gt_known == doctest::Approx(0.0));
  CHECK(edge_acc.top1 == doctest::Approx(0.0));

  SUBCASE("perfect predictions give 100 everywhere") {
    for (auto &r : recs) {
      r.iou = 1.0;
      r.top1_hit = true;
      r.top5_hit = true;
    }
    const LocAccuracy all = loc_accuracies(recs);
    CHECK(all.gt_known == doctest::Approx(100.0));
    CHECK(all.top1 == doctest::Approx(100.0));
    CHECK(all.top5 == doctest::Approx(100.0));
  }
}

TEST_CASE("loc accuracy ordering invariant on random fixtures") {
  Rng rng(7);
  for (int it = 0; it < 50; ++it) {
    std::vector<ImageRecord> recs(20);
    for (auto &r : recs) {
      r.iou = rng.uniform();
      r.top1_hit = rng.coin();
      r.top5_hit = r.top1_hit || rng.coin();
    }
    const LocAccuracy acc = loc_accuracies(recs);
    CHECK(acc.top1 <= acc.top5 + 1e-12);
    CHECK(acc.top5 <= acc.gt_known + 1e-12);
  }
}

TEST_CASE("peak metrics: binary map equal to mask") {
  Tensor mask(1, 1, 8, 8);
  for (int i = 2; i < 6; ++i)
    for (int j = 3; j < 7; ++j) mask.at(0, 0, i, j) = 1.0;
  const PeakResult r = peak_metrics(mask, mask);
  CHECK(r.peak_iou == doctest::Approx(1.0));
  CHECK(r.peak_t == 0);  // smallest maximizing threshold
  CHECK(r.curve[255] == doctest::Approx(0.0));
}

TEST_CASE("peak metrics: uniform map against a quarter mask") {
  Tensor map = Tensor::full(1, 1, 16, 16, 1.0);
  Tensor mask(1, 1, 16, 16);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) mask.at(0, 0, i, j) = 1.0;
  const PeakResult r = peak_metrics(map, mask);
  CHECK(r.peak_iou == doctest::Approx(0.25));
  CHECK(r.peak_t == 0);
}

TEST_CASE("peak metrics equals the naive 256-threshold oracle exactly") {
  Rng rng(99);
  for (int it = 0; it < 50; ++it) {
    Tensor map = bas::test::random_tensor(1, 1, 12, 12, 1000 + it);
    Tensor mask(1, 1, 12, 12);
    for (double &v : mask.data) v = rng.coin() ? 1.0 : 0.0;
    const PeakResult fast = peak_metrics(map, mask);
    const PeakResult slow = naive_peak(map, mask);
    CHECK(fast.peak_t == slow.peak_t);
    CHECK(fast.peak_iou == slow.peak_iou);
    for (int t = 0; t < 256; ++t) CHECK(fast.curve[t] == slow.curve[t]);
  }
}

TEST_CASE("size buckets: boundaries closed on the left") {
  std::vector<ImageRecord> recs(3);
  recs[0].gt_area_fraction = 0.5;
  recs[0].iou = 0.9;
  recs[1].gt_area_fraction = 0.2;  // exactly 0.2 lands in the middle bucket
  recs[1].iou = 0.2;
  recs[2].gt_area_fraction = 0.8;  // exactly 0.8 lands in the last bucket
  recs[2].iou = 0.9;
  const auto buckets = size_bucket_analysis(recs);
  CHECK(buckets[0].total == 0);
  CHECK(buckets[1].total == 2);
  CHECK(buckets[1].correct == 1);
  CHECK(buckets[1].gt_known == doctest::Approx(50.0));
  CHECK(buckets[2].total == 1);
  CHECK(buckets[2].gt_known == doctest::Approx(100.0));
}

TEST_CASE("size buckets: mixed hand-computed fixture") {
  std::vector<ImageRecord> recs(6);
  const double fractions[6] = {0.05, 0.1, 0.3, 0.6, 0.85, 0.95};
  const double ious[6] = {0.6, 0.3, 0.7, 0.4, 0.9, 0.51};
  for (int i = 0; i < 6; ++i) {
    recs[i].gt_area_fraction = fractions[i];
    recs[i].iou = ious[i];
  }
  const auto buckets = size_bucket_analysis(recs);
  CHECK(buckets[0].total == 2);
  CHECK(buckets[0].gt_known == doctest::Approx(50.0));
  CHECK(buckets[1].total == 2);
  CHECK(buckets[1].gt_known == doctest::Approx(50.0));
  CHECK(buckets[2].total == 2);
  CHECK(buckets[2].gt_known == doctest::Approx(100.0));
}

TEST_CASE("correct-iou statistics") {
  std::vector<ImageRecord> recs(4);
  recs[0].iou = 0.6;
  recs[1].iou = 0.7;
  recs[2].iou = 0.8;
  recs[3].iou = 0.4;  // excluded, below the correctness threshold
  const IoUStats s = correct_iou_stats(recs);
  CHECK_FALSE(s.empty);
  CHECK(s.count == 3);
  CHECK(s.median == doctest::Approx(0.7));
  CHECK(s.q1 == doctest::Approx(0.65));
  CHECK(s.q3 == doctest::Approx(0.75));

  std::vector<ImageRecord> none(2);
  none[0].iou = 0.2;
  none[1].iou = 0.5;  // exactly 0.5 is not correct
  const IoUStats empty = correct_iou_stats(none);
  CHECK(empty.empty);
  CHECK(empty.count == 0);
}

TEST_CASE("spearman rank correlation") {
  CHECK(spearman({1, 2, 3, 4}, {2, 4, 6, 8}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {8, 6, 4, 2}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx(0.8));
  CHECK(spearman({1, 1, 1}, {1, 2, 3}) == doctest::Approx(0.0));  // constant side
}

TEST_CASE("report json carries the headline numbers") {
  EvalReport r;
  r.num_images = 10;
  r.gt_known = 80.0;
  r.top1_loc = 60.0;
  r.top5_loc = 70.0;
  const std::string js = r.to_json();
  CHECK(js.find("\"gt_known_loc\": 80.0") != std::string::npos);
  CHECK(js.find("\"num_images\": 10") != std::string::npos);
}
