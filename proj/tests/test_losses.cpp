#include <doctest.h>

#include <cmath>

#include "bas/errors.hpp"
#include "bas/losses.hpp"
#include "grad_check.hpp"
#include "test_util.hpp"

using namespace bas;
using namespace bas::test;

namespace {

double bas_via_graph(double score_bg, double score, double eps) {
  Graph g;
  const ValueId sbg = g.constant(Tensor::scalar(score_bg));
  const ValueId s = g.constant(Tensor::scalar(score));
  return g.value(loss_bas(g, sbg, s, eps)).item();
}

double ce_via_graph(const std::vector<double> &logits, int gt) {
  Graph g;
  Tensor t(1, static_cast<int>(logits.size()), 1, 1);
  t.data = logits;
  return g.value(loss_classification(g, g.constant(t), {gt})).item();
}

}  // namespace

TEST_CASE("suppression ratio fixtures") {
  CHECK(loss_bas_value(0.0, 2.0, 1e-8) == doctest::Approx(0.0));
  // direct arithmetic: 0.5 / (1 + 1e-8)
  CHECK(loss_bas_value(0.5, 1.0, 1e-8) == doctest::Approx(0.5 / (1.0 + 1e-8)).epsilon(1e-15));
  CHECK(loss_bas_value(0.5, 1.0, 1e-8) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(loss_bas_value(3.0, 1.0, 1e-8) == doctest::Approx(1.0));  // upper clamp
  CHECK(loss_bas_value(-2.0, 1.0, 1e-8) == doctest::Approx(0.0)); // lower clamp
  // negative denominator is not special-cased, the clamp bounds the result
  CHECK(loss_bas_value(1.0, -2.0, 1e-8) == doctest::Approx(0.0));
  CHECK(loss_bas_value(-1.0, -2.0, 1e-8) == doctest::Approx(1.0));
  CHECK(bas_via_graph(0.5, 1.0, 1e-8) == doctest::Approx(loss_bas_value(0.5, 1.0, 1e-8)));
  CHECK_THROWS_AS(loss_bas_value(std::nan(""), 1.0, 1e-8), NumericError);
}

TEST_CASE("suppression ratio is nondecreasing in the numerator on the open region") {
  Rng rng(5);
  for (int it = 0; it < 200; ++it) {
    const double s = rng.uniform(0.5, 4.0);
    const double a = rng.uniform(0.0, s);
    const double b = rng.uniform(a, s);  // b >= a, both below s so the ratio stays unclamped
    CHECK(loss_bas_value(a, s, 1e-8) <= loss_bas_value(b, s, 1e-8) + 1e-15);
  }
}

TEST_CASE("per-sample clamp happens before batch averaging") {
  Graph g;
  Tensor sbg(2, 1, 1, 1);
  sbg.data = {0.5, 3.0};
  Tensor s = Tensor::full(2, 1, 1, 1, 1.0);
  const double v = g.value(loss_bas(g, g.constant(sbg), g.constant(s), 0.0)).item();
  CHECK(v == doctest::Approx(0.75));  // (0.5 + 1) / 2
}

TEST_CASE("clamp is a hard cutoff for gradients") {
  Tensor x(3, 1, 1, 1);
  x.data = {0.4, 1.7, -0.3};
  Graph g;
  const ValueId in = g.variable(x);
  const ValueId c = g.clamp01(in);
  const Tensor &v = g.value(c);
  CHECK(v.data[0] == doctest::Approx(0.4));
  CHECK(v.data[1] == doctest::Approx(1.0));
  CHECK(v.data[2] == doctest::Approx(0.0));

  g.backward(g.mean_all(c));
  const Tensor &dx = g.grad(in);
  CHECK(dx.data[0] == doctest::Approx(1.0 / 3.0));  // interior value passes
  CHECK(dx.data[1] == doctest::Approx(0.0));        // beyond the cut
  CHECK(dx.data[2] == doctest::Approx(0.0));

  // gradients of the ratio itself
  Graph g2;
  const ValueId num = g2.variable(Tensor::scalar(0.5));
  const ValueId den = g2.variable(Tensor::scalar(2.0));
  g2.backward(g2.clamp01(g2.ratio(num, den, 0.0)));
  CHECK(g2.grad(num).data[0] == doctest::Approx(0.5));          // 1/den
  CHECK(g2.grad(den).data[0] == doctest::Approx(-0.5 / 4.0));   // -num/den^2
}

TEST_CASE("area loss fixtures and linearity") {
  CHECK(loss_area_value(Tensor::full(1, 1, 4, 4, 1.0)) == doctest::Approx(1.0));
  CHECK(loss_area_value(Tensor::zeros(1, 1, 4, 4)) == doctest::Approx(0.0));
  Tensor quarter(1, 1, 2, 2);
  quarter.data = {1.0, 0.0, 0.0, 0.0};
  CHECK(loss_area_value(quarter) == doctest::Approx(0.25));

  Rng rng(11);
  Tensor m = bas::test::random_tensor(1, 1, 6, 6, 42);
  for (int it = 0; it < 20; ++it) {
    const double a = rng.uniform();
    Tensor scaled = m;
    for (double &v : scaled.data) v *= a;
    CHECK(loss_area_value(scaled) == doctest::Approx(a * loss_area_value(m)).epsilon(1e-12));
  }
}

TEST_CASE("cross-entropy fixtures") {
  CHECK(ce_via_graph({0, 0, 0, 0}, 1) == doctest::Approx(std::log(4.0)));
  CHECK(ce_via_graph({2, 0}, 0) == doctest::Approx(std::log(1.0 + std::exp(-2.0))));
  // monotone decreasing in the target logit
  double prev = ce_via_graph({0.0, 0.0}, 0);
  for (double z = 1.0; z < 10.0; z += 1.0) {
    const double cur = ce_via_graph({z, 0.0}, 0);
    CHECK(cur < prev);
    prev = cur;
  }
  CHECK(prev < 1e-4);
}

TEST_CASE("total loss assembly") {
  BASModel model(toy_spec(), 11);
  const Tensor images = bas::test::random_tensor(2, 3, 8, 8, 3);
  const std::vector<int> labels{0, 2};

  SUBCASE("zero weights reduce the total to the classification term") {
    Graph g;
    const AMCValues amc = model.amc_forward(g, g.constant(images), labels);
    LossWeights w;
    w.alpha = w.beta = w.lambda = 0.0;
    const LossBundle b = total_loss(g, amc, labels, w);
    CHECK(b.total == doctest::Approx(b.l_cls));
  }
  SUBCASE("suppression-only weights scale as lambda times the clamped term") {
    Graph g;
    const AMCValues amc = model.amc_forward(g, g.constant(images), labels);
    LossWeights w;
    w.alpha = w.beta = 0.0;
    w.lambda = 0.6;
    const LossBundle b = total_loss(g, amc, labels, w);
    CHECK(b.total == doctest::Approx(b.l_cls + 0.6 * b.l_bas_clamped));
  }
  SUBCASE("full weighting matches the sum of recorded addends") {
    Graph g;
    const AMCValues amc = model.amc_forward(g, g.constant(images), labels);
    LossWeights w;
    w.alpha = 0.3;
    w.beta = 0.7;
    w.lambda = 1.0;
    const LossBundle b = total_loss(g, amc, labels, w);
    CHECK(b.total ==
          doctest::Approx(b.l_cls + 0.3 * b.l_frg + 0.7 * b.l_ac + 1.0 * b.l_bas_clamped));
    CHECK(b.l_bas_clamped <= 1.0);
    CHECK(b.l_bas_clamped >= 0.0);
  }
  SUBCASE("invalid weights are rejected") {
    LossWeights w;
    w.epsilon = 0.0;
    CHECK_THROWS_AS(w.validate(), ConfigError);
    LossWeights w2;
    w2.alpha = -0.1;
    CHECK_THROWS_AS(w2.validate(), ConfigError);
  }
}

TEST_CASE("analytic gradients match central finite differences on a toy model") {
  BASModel model(toy_spec(), 11);
  const Tensor images = bas::test::random_tensor(2, 3, 8, 8, 3);
  const std::vector<int> labels{0, 2};
  LossWeights w;
  w.alpha = 0.5;
  w.beta = 0.7;
  w.lambda = 1.0;

  // precondition: sampled away from the clamp boundaries
  {
    Graph g;
    const AMCValues amc = model.amc_forward(g, g.constant(images), labels);
    const Tensor &sbg = g.value(amc.score_bg);
    const Tensor &s = g.value(amc.score);
    for (int n = 0; n < sbg.n; ++n) {
      const double raw = sbg.data[n] / (s.data[n] + w.epsilon);
      CHECK(raw > 0.05);
      CHECK(raw < 0.95);
    }
  }

  for (const LossKind kind :
       {LossKind::Cls, LossKind::Frg, LossKind::Ac, LossKind::Bas, LossKind::Total}) {
    const GradCheckResult r = check_gradients(model, images, labels, w, kind, 1e-3, 7);
    INFO(loss_kind_name(kind), " worst: ", r.worst);
    CHECK(r.checked > 100);
    CHECK(r.max_rel < 1e-3);
  }
}

TEST_CASE("frozen-head contract") {
  BASModel model(toy_spec(), 17);
  const Tensor images = bas::test::random_tensor(2, 3, 8, 8, 23);
  const std::vector<int> labels{1, 0};
  LossWeights w;

  // analytic suppression gradients
  analytic_gradients(model, images, labels, w, LossKind::Bas);
  std::vector<std::vector<double>> frozen_grads;
  for (Param *p : model.head_params()) frozen_grads.push_back(p->grad.data);

  // the same objective with the background score replaced by a constant
  Tensor sbg_const;
  {
    Graph g;
    const AMCValues amc = model.amc_forward(g, g.constant(images), labels);
    sbg_const = g.value(amc.score_bg);
  }
  for (Param *p : model.params()) p->zero_grad();
  {
    Graph g;
    const AMCValues amc = model.amc_forward(g, g.constant(images), labels);
    g.backward(loss_bas(g, g.constant(sbg_const), amc.score, w.epsilon));
  }

  const auto head = model.head_params();
  for (std::size_t pi = 0; pi < head.size(); ++pi) {
    for (std::size_t i = 0; i < head[pi]->grad.size(); ++i) {
      const double a = frozen_grads[pi][i];
      const double b = head[pi]->grad.data[i];
      CHECK(std::abs(a - b) <= 1e-5 * std::max({std::abs(a), std::abs(b), 1e-12}));
    }
  }

  // generator still receives gradient through the inverted map
  analytic_gradients(model, images, labels, w, LossKind::Bas);
  double generator_grad_norm = 0.0;
  for (Param *p : model.generator_params())
    for (double v : p->grad.data) generator_grad_norm += v * v;
  CHECK(generator_grad_norm > 0.0);
}
