#include "bas/losses.hpp"

#include <algorithm>
#include <cmath>

#include "bas/errors.hpp"

namespace bas {

void LossWeights::validate() const {
  if (epsilon <= 0.0) throw ConfigError("loss epsilon must be > 0");
  if (alpha < 0.0 || beta < 0.0 || lambda < 0.0)
    throw ConfigError("loss weights must be >= 0");
}

ValueId loss_bas(Graph &g, ValueId score_bg, ValueId score, double epsilon) {
  const Tensor &num = g.value(score_bg);
  const Tensor &den = g.value(score);
  if (!num.all_finite() || !den.all_finite())
    throw NumericError("non-finite activation scores in suppression loss");
  const ValueId raw = g.ratio(score_bg, score, epsilon);
  return g.mean_all(g.clamp01(raw));
}

ValueId loss_area(Graph &g, ValueId map_fg) { return g.mean_all(map_fg); }

ValueId loss_foreground(Graph &g, ValueId logits_fg, const std::vector<int> &labels) {
  return g.mean_all(g.softmax_cross_entropy(logits_fg, labels));
}

ValueId loss_classification(Graph &g, ValueId logits, const std::vector<int> &labels) {
  return g.mean_all(g.softmax_cross_entropy(logits, labels));
}

LossBundle total_loss(Graph &g, const AMCValues &amc, const std::vector<int> &labels,
                      const LossWeights &w) {
  w.validate();
  LossBundle out;
  out.l_cls_id = loss_classification(g, amc.logits, labels);
  out.l_frg_id = loss_foreground(g, amc.logits_fg, labels);
  out.l_ac_id = loss_area(g, amc.map_fg);

  const ValueId raw = g.ratio(amc.score_bg, amc.score, w.epsilon);
  out.l_bas_id = g.mean_all(g.clamp01(raw));
  out.l_bas_raw = g.value(raw).mean_value();

  ValueId total = out.l_cls_id;
  total = g.axpy(w.alpha, out.l_frg_id, total);
  total = g.axpy(w.beta, out.l_ac_id, total);
  total = g.axpy(w.lambda, out.l_bas_id, total);
  out.total_id = total;

  out.l_cls = g.value(out.l_cls_id).item();
  out.l_frg = g.value(out.l_frg_id).item();
  out.l_ac = g.value(out.l_ac_id).item();
  out.l_bas_clamped = g.value(out.l_bas_id).item();
  out.total = g.value(out.total_id).item();
  return out;
}

double loss_bas_value(double score_bg, double score, double epsilon) {
  if (!std::isfinite(score_bg) || !std::isfinite(score))
    throw NumericError("non-finite activation scores in suppression loss");
  const double raw = score_bg / (score + epsilon);
  return std::min(std::max(raw, 0.0), 1.0);
}

double loss_area_value(const Tensor &map_fg) { return map_fg.mean_value(); }

}  // namespace bas
