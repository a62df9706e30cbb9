#include <doctest.h>

#include <cstring>

#include "bas/errors.hpp"
#include "bas/inference.hpp"
#include "bas/numeric.hpp"
#include "test_util.hpp"

using namespace bas;

TEST_CASE("top-k fusion selection rules") {
  Tensor maps(1, 3, 2, 2);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 4; ++i) maps.data[c * 4 + i] = c + 0.1 * i;

  SUBCASE("k=1 without inclusion is the argmax map, bitwise") {
    const Tensor fused = fuse_topk(maps, {0.2, 0.7, 0.1}, 1);
    CHECK(std::memcmp(fused.data.data(), maps.data.data() + 4, 4 * sizeof(double)) == 0);
  }
  SUBCASE("k=C averages everything") {
    const Tensor fused = fuse_topk(maps, {0.2, 0.7, 0.1}, 3);
    for (int i = 0; i < 4; ++i)
      CHECK(fused.data[i] == doctest::Approx((maps.data[i] + maps.data[4 + i] + maps.data[8 + i]) / 3.0));
  }
  SUBCASE("absent include category replaces the k-th selection") {
    const Tensor fused = fuse_topk(maps, {0.5, 0.3, 0.2}, 2, 2);
    for (int i = 0; i < 4; ++i)
      CHECK(fused.data[i] == doctest::Approx(0.5 * (maps.data[i] + maps.data[8 + i])));
  }
  SUBCASE("present include category leaves the selection alone") {
    const Tensor fused = fuse_topk(maps, {0.5, 0.3, 0.2}, 2, 1);
    for (int i = 0; i < 4; ++i)
      CHECK(fused.data[i] == doctest::Approx(0.5 * (maps.data[i] + maps.data[4 + i])));
  }
  SUBCASE("k out of range is a config error") {
    CHECK_THROWS_AS(fuse_topk(maps, {0.5, 0.3, 0.2}, 0), ConfigError);
    CHECK_THROWS_AS(fuse_topk(maps, {0.5, 0.3, 0.2}, 4), ConfigError);
  }
}

TEST_CASE("k=1 fusion is bitwise-identical to the argmax map on random sets") {
  for (int it = 0; it < 20; ++it) {
    const Tensor maps = bas::test::random_tensor(1, 6, 5, 7, 313 + it);
    Rng rng(99 + it);
    std::vector<double> scores(6);
    for (double &s : scores) s = rng.uniform();
    const std::vector<int> top = topk_indices(scores, 1);
    const Tensor fused = fuse_topk(maps, scores, 1);
    CHECK(std::memcmp(fused.data.data(),
                      maps.data.data() + static_cast<std::size_t>(top[0]) * 35,
                      35 * sizeof(double)) == 0);
  }
}

TEST_CASE("box extraction") {
  SUBCASE("a binary mask maps to its tight box for any threshold") {
    Tensor map(1, 1, 10, 10);
    for (int i = 2; i < 7; ++i)
      for (int j = 4; j < 9; ++j) map.at(0, 0, i, j) = 1.0;
    for (double tau : {0.1, 0.2, 0.5, 0.9})
      CHECK(extract_box(map, tau) == BBox{4, 2, 9, 7});
  }
  SUBCASE("the larger of two components wins") {
    Tensor map(1, 1, 20, 20);
    for (int i = 1; i < 11; ++i)
      for (int j = 1; j < 11; ++j) map.at(0, 0, i, j) = 1.0;  // 100 px
    for (int i = 14; i < 18; ++i)
      for (int j = 14; j < 19; ++j) map.at(0, 0, i, j) = 1.0;  // 20 px
    CHECK(extract_box(map, 0.2) == BBox{1, 1, 11, 11});
  }
  SUBCASE("empty binarization falls back to the full image") {
    CHECK(extract_box(Tensor::zeros(1, 1, 6, 8), 0.2) == BBox{0, 0, 8, 6});
    CHECK(extract_box(Tensor::full(1, 1, 6, 8, 0.0), 0.5) == BBox{0, 0, 8, 6});
  }
  SUBCASE("tau domain is validated") {
    CHECK_THROWS_AS(extract_box(Tensor::zeros(1, 1, 4, 4), 0.0), ConfigError);
    CHECK_THROWS_AS(extract_box(Tensor::zeros(1, 1, 4, 4), 1.0), ConfigError);
  }
  SUBCASE("diagonal touch is not 4-connected") {
    Tensor map(1, 1, 4, 4);
    map.at(0, 0, 0, 0) = 1.0;
    map.at(0, 0, 1, 1) = 1.0;
    map.at(0, 0, 2, 2) = 1.0;
    const BBox b = extract_box(map, 0.5);
    CHECK(b.area() == doctest::Approx(1.0));
  }
}

TEST_CASE("box extraction is translation-equivariant away from borders") {
  Rng rng(17);
  for (int it = 0; it < 25; ++it) {
    Tensor map(1, 1, 24, 24);
    const int h = 3 + rng.uniform_int(5);
    const int w = 3 + rng.uniform_int(5);
    const int y0 = 2 + rng.uniform_int(6);
    const int x0 = 2 + rng.uniform_int(6);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        map.at(0, 0, y0 + i, x0 + j) = 0.5 + 0.5 * rng.uniform();
    const int dy = rng.uniform_int(6);
    const int dx = rng.uniform_int(6);
    Tensor shifted(1, 1, 24, 24);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        shifted.at(0, 0, y0 + dy + i, x0 + dx + j) = map.at(0, 0, y0 + i, x0 + j);
    const BBox a = extract_box(map, 0.3);
    const BBox b = extract_box(shifted, 0.3);
    CHECK(b.x1 == a.x1 + dx);
    CHECK(b.y1 == a.y1 + dy);
    CHECK(b.x2 == a.x2 + dx);
    CHECK(b.y2 == a.y2 + dy);
  }
}

TEST_CASE("min-max rescaling is invariant to increasing affine maps") {
  Rng rng(23);
  for (int it = 0; it < 25; ++it) {
    const Tensor map = bas::test::random_tensor(1, 1, 16, 16, 400 + it);
    const double a = rng.uniform(0.2, 5.0);
    const double b = rng.uniform(-3.0, 3.0);
    Tensor scaled = map;
    for (double &v : scaled.data) v = a * v + b;

    const Tensor n1 = minmax01(map);
    const Tensor n2 = minmax01(scaled);
    std::size_t argmax1 = 0, argmax2 = 0;
    for (std::size_t i = 0; i < n1.size(); ++i) {
      if (n1.data[i] > n1.data[argmax1]) argmax1 = i;
      if (n2.data[i] > n2.data[argmax2]) argmax2 = i;
    }
    CHECK(argmax1 == argmax2);
    CHECK(extract_box(n1, 0.2) == extract_box(n2, 0.2));
  }
}

TEST_CASE("constant map min-max rescales to zero") {
  const Tensor flat = minmax01(Tensor::full(1, 1, 5, 5, 3.0));
  CHECK(flat.max_value() == 0.0);
}

TEST_CASE("localize composes a full result") {
  BASModel model(bas::test::toy_spec(), 21);
  const Tensor image = bas::test::random_tensor(1, 3, 16, 16, 5);
  const LocalizationResult res = localize(model, image, Protocol::GtKnown, 1, 0.2, 0);
  CHECK(res.fused_map.h == 16);
  CHECK(res.fused_map.w == 16);
  CHECK(res.fused_map.min_value() >= 0.0);
  CHECK(res.fused_map.max_value() <= 1.0);
  CHECK(res.predicted_box.valid());
  CHECK(res.predicted_box.x2 <= 16.0);
  CHECK(res.predicted_box.y2 <= 16.0);
  double sum = 0.0;
  for (double s : res.class_scores) sum += s;
  CHECK(sum == doctest::Approx(1.0));
  CHECK(res.topk_categories.size() == 1);

  CHECK_THROWS_AS(localize(model, image, Protocol::GtKnown, 1, 0.2, std::nullopt),
                  ContractError);
  const LocalizationResult free_run = localize(model, image, Protocol::Top1, 1, 0.2);
  CHECK(free_run.predicted_box.valid());
}

TEST_CASE("protocol names round-trip") {
  CHECK(protocol_from_string("gt_known") == Protocol::GtKnown);
  CHECK(protocol_from_string("top1") == Protocol::Top1);
  CHECK(protocol_to_string(Protocol::Top5) == "top5");
  CHECK_THROWS_AS(protocol_from_string("bogus"), ConfigError);
}
