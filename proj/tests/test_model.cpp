#include <doctest.h>

#include <cmath>
#include <cstring>

#include "bas/errors.hpp"
#include "bas/model.hpp"
#include "test_util.hpp"

using namespace bas;

TEST_CASE("spec validation and split naming") {
  BackboneSpec spec;
  spec.num_categories = 5;
  CHECK(spec.split_index() == 3);
  CHECK(spec.stride_at_split() == 8);
  CHECK(spec.channels_at_split() == 128);

  spec.split_point = "stage9";
  CHECK_THROWS_WITH_AS(
      (void)BASModel(spec, 1),
      doctest::Contains("valid names: stage1 stage2 stage3"), ConfigError);

  BackboneSpec last;
  last.num_categories = 5;
  last.split_point = "stage4";  // the head would be empty
  CHECK_THROWS_AS((void)BASModel(last, 1), ConfigError);

  BackboneSpec tiny;
  tiny.widths = {8};
  tiny.num_categories = 2;
  CHECK_THROWS_AS((void)BASModel(tiny, 1), ConfigError);
}

TEST_CASE("deterministic initialization under a seed") {
  BackboneSpec spec = bas::test::toy_spec();
  BASModel a(spec, 42);
  BASModel b(spec, 42);
  BASModel c(spec, 43);
  CHECK(a.param_checksum() == b.param_checksum());
  CHECK(a.param_checksum() != c.param_checksum());
}

TEST_CASE("feature map shape follows the cumulative stride") {
  SUBCASE("default backbone at 224 splits to 28x28") {
    BackboneSpec spec;  // widths 32..256, split after stage3
    spec.num_categories = 5;
    BASModel model(spec, 7);
    Graph g;
    const ValueId f =
        model.extract(g, g.constant(bas::test::random_tensor(1, 3, 224, 224, 1)), false);
    CHECK(g.value(f).h == 28);
    CHECK(g.value(f).w == 28);
    CHECK(g.value(f).c == 128);
  }
  SUBCASE("toy backbone at 8 splits to 4x4") {
    BASModel model(bas::test::toy_spec(), 7);
    Graph g;
    const ValueId f =
        model.extract(g, g.constant(bas::test::random_tensor(2, 3, 8, 8, 1)), false);
    CHECK(g.value(f).h == 4);
    CHECK(g.value(f).c == 4);
  }
  SUBCASE("channel mismatch is a contract error") {
    BASModel model(bas::test::toy_spec(), 7);
    Graph g;
    CHECK_THROWS_AS(model.extract(g, g.constant(Tensor(1, 4, 8, 8)), false), ContractError);
  }
}

TEST_CASE("generator output width equals the category count") {
  BackboneSpec spec = bas::test::toy_spec(200);
  BASModel model(spec, 7);
  Graph g;
  const ValueId f = model.extract(g, g.constant(bas::test::random_tensor(1, 3, 8, 8, 2)), false);
  const ValueId maps = model.generate_maps(g, f, false);
  CHECK(g.value(maps).c == 200);
  CHECK(g.value(maps).h == g.value(f).h);
  CHECK(g.value(maps).w == g.value(f).w);
}

TEST_CASE("zeroed generator emits one-half maps; outputs stay inside (0,1)") {
  BASModel model(bas::test::toy_spec(), 7);
  for (Param *p : model.generator_params())
    std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
  Graph g;
  const ValueId f = model.extract(g, g.constant(bas::test::random_tensor(1, 3, 8, 8, 2)), false);
  const ValueId maps = model.generate_maps(g, f, false);
  for (double v : g.value(maps).data) CHECK(v == doctest::Approx(0.5));

  BASModel fresh(bas::test::toy_spec(), 8);
  Graph g2;
  const ValueId f2 =
      fresh.extract(g2, g2.constant(bas::test::random_tensor(2, 3, 8, 8, 5)), false);
  const ValueId maps2 = fresh.generate_maps(g2, f2, false);
  CHECK(g2.value(maps2).min_value() > 0.0);
  CHECK(g2.value(maps2).max_value() < 1.0);
}

TEST_CASE("foreground and background maps are exact complements") {
  BASModel model(bas::test::toy_spec(), 9);
  for (int it = 0; it < 10; ++it) {
    Graph g;
    const AMCValues amc =
        model.amc_forward(g, g.constant(bas::test::random_tensor(2, 3, 8, 8, 100 + it)), {0, 1});
    const Tensor &fg = g.value(amc.map_fg);
    const Tensor &bg = g.value(amc.map_bg);
    for (std::size_t i = 0; i < fg.size(); ++i) CHECK(fg.data[i] + bg.data[i] == 1.0);
  }
}

TEST_CASE("masking identities in the activation-constraint wiring") {
  BASModel model(bas::test::toy_spec(), 10);
  const Tensor images = bas::test::random_tensor(2, 3, 8, 8, 55);
  const std::vector<int> labels{1, 2};

  SUBCASE("saturated-high generator: background path sees zeros, guided logits equal plain") {
    Param *bias = model.find_param("generator.bias");
    REQUIRE(bias != nullptr);
    std::fill(bias->value.data.begin(), bias->value.data.end(), 50.0);
    Param *wgen = model.find_param("generator.weight");
    std::fill(wgen->value.data.begin(), wgen->value.data.end(), 0.0);
    Graph g;
    const AMCValues amc = model.amc_forward(g, g.constant(images), labels);
    CHECK(g.value(amc.map_fg).min_value() == 1.0);  // logistic saturates in float64
    const Tensor &y = g.value(amc.logits);
    const Tensor &y_fg = g.value(amc.logits_fg);
    for (std::size_t i = 0; i < y.size(); ++i)
      CHECK(y_fg.data[i] == doctest::Approx(y.data[i]).epsilon(1e-12));
    // background feature is exactly zero, so both background logits rows agree
    const Tensor &y_bg = g.value(amc.logits_bg);
    Graph g2;
    const ValueId zeros = g2.constant(Tensor::zeros(2, 3, 8, 8));
    (void)zeros;
    CHECK(y_bg.all_finite());
  }

  SUBCASE("half maps scale the masked feature by exactly one half") {
    for (Param *p : model.generator_params())
      std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
    Graph g;
    const AMCValues amc = model.amc_forward(g, g.constant(images), labels);
    const Tensor &f = g.value(amc.feature);
    // recompute the masked feature: map_bg is exactly 0.5 everywhere
    Graph g2;
    const ValueId fid = g2.constant(f);
    const ValueId half = g2.constant(Tensor::full(f.n, 1, f.h, f.w, 0.5));
    const Tensor &masked = g2.value(g2.mul_mask(fid, half));
    for (std::size_t i = 0; i < f.size(); ++i)
      CHECK(masked.data[i] == 0.5 * f.data[i]);  // exact in binary floating point
  }
}

TEST_CASE("head applications share weights") {
  BASModel model(bas::test::toy_spec(), 12);
  const Tensor images = bas::test::random_tensor(1, 3, 8, 8, 77);
  auto run = [&]() {
    Graph g;
    const AMCValues amc = model.amc_forward(g, g.constant(images), {0});
    return std::make_pair(g.value(amc.logits), g.value(amc.logits_bg));
  };
  const auto before = run();
  Param *w = model.head_params().front();
  w->value.data[0] += 0.25;
  const auto after = run();
  CHECK(before.first.data[0] != after.first.data[0]);
  CHECK(before.second.data[0] != after.second.data[0]);
}

TEST_CASE("global average pooling") {
  Graph g;
  SUBCASE("constant channel") {
    const ValueId v = g.global_avg_pool(g.constant(Tensor::full(1, 2, 3, 3, 3.5)));
    CHECK(g.value(v).data[0] == doctest::Approx(3.5));
    CHECK(g.value(v).data[1] == doctest::Approx(3.5));
  }
  SUBCASE("2x2 mean") {
    Tensor t(1, 1, 2, 2);
    t.data = {1, 2, 3, 4};
    CHECK(g.value(g.global_avg_pool(g.constant(t))).item() == doctest::Approx(2.5));
  }
  SUBCASE("linearity") {
    const Tensor x = bas::test::random_tensor(1, 2, 4, 4, 9);
    const Tensor y = bas::test::random_tensor(1, 2, 4, 4, 10);
    const double a = 0.7, b = -1.3;
    Tensor mix(1, 2, 4, 4);
    for (std::size_t i = 0; i < mix.size(); ++i) mix.data[i] = a * x.data[i] + b * y.data[i];
    const Tensor gx = g.value(g.global_avg_pool(g.constant(x)));
    const Tensor gy = g.value(g.global_avg_pool(g.constant(y)));
    const Tensor gm = g.value(g.global_avg_pool(g.constant(mix)));
    for (int c = 0; c < 2; ++c)
      CHECK(gm.data[c] == doctest::Approx(a * gx.data[c] + b * gy.data[c]).epsilon(1e-12));
  }
}

TEST_CASE("non-finite activations carry the batch index") {
  BASModel model(bas::test::toy_spec(), 13);
  Param *w = model.head_params().front();
  w->value.data[0] = std::numeric_limits<double>::quiet_NaN();
  Graph g;
  try {
    model.amc_forward(g, g.constant(bas::test::random_tensor(2, 3, 8, 8, 1)), {0, 1});
    FAIL("expected NumericError");
  } catch (const NumericError &e) {
    CHECK(std::string(e.what()).find("batch index") != std::string::npos);
  }
}

TEST_CASE("eval forward returns maps and pooled scores") {
  BASModel model(bas::test::toy_spec(), 14);
  const auto fwd = model.forward_eval(bas::test::random_tensor(3, 3, 8, 8, 4));
  CHECK(fwd.maps.n == 3);
  CHECK(fwd.maps.c == 3);
  CHECK(fwd.maps.h == 4);
  CHECK(fwd.logits.n == 3);
  CHECK(fwd.logits.c == 3);
  CHECK(fwd.logits.h == 1);
}
