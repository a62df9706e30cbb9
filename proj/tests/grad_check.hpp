#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bas/graph.hpp"
#include "bas/losses.hpp"
#include "bas/model.hpp"

namespace bas::test {

enum class LossKind { Cls, Frg, Ac, Bas, Total };

inline const char *loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::Cls: return "l_cls";
    case LossKind::Frg: return "l_frg";
    case LossKind::Ac: return "l_ac";
    case LossKind::Bas: return "l_bas";
    default: return "total";
  }
}

/// Scalar objective value for one loss component. When score_bg_const is
/// given the suppression numerator is held at that value, which is how the
/// frozen-head objective reads for finite differencing over head weights.
inline double eval_loss(BASModel &model, const Tensor &images, const std::vector<int> &labels,
                        const LossWeights &w, LossKind kind, const Tensor *score_bg_const) {
  Graph g;
  const AMCValues amc = model.amc_forward(g, g.constant(images), labels);
  const ValueId sbg = score_bg_const ? g.constant(*score_bg_const) : amc.score_bg;
  switch (kind) {
    case LossKind::Cls: return g.value(loss_classification(g, amc.logits, labels)).item();
    case LossKind::Frg: return g.value(loss_foreground(g, amc.logits_fg, labels)).item();
    case LossKind::Ac: return g.value(loss_area(g, amc.map_fg)).item();
    case LossKind::Bas: return g.value(loss_bas(g, sbg, amc.score, w.epsilon)).item();
    case LossKind::Total: {
      const double cls = g.value(loss_classification(g, amc.logits, labels)).item();
      const double frg = g.value(loss_foreground(g, amc.logits_fg, labels)).item();
      const double ac = g.value(loss_area(g, amc.map_fg)).item();
      const double bas = g.value(loss_bas(g, sbg, amc.score, w.epsilon)).item();
      return cls + w.alpha * frg + w.beta * ac + w.lambda * bas;
    }
  }
  return 0.0;
}

/// Analytic gradients of one loss component into the parameter .grad slots.
inline void analytic_gradients(BASModel &model, const Tensor &images,
                               const std::vector<int> &labels, const LossWeights &w,
                               LossKind kind) {
  for (Param *p : model.params()) p->zero_grad();
  Graph g;
  const AMCValues amc = model.amc_forward(g, g.constant(images), labels);
  ValueId loss = -1;
  switch (kind) {
    case LossKind::Cls: loss = loss_classification(g, amc.logits, labels); break;
    case LossKind::Frg: loss = loss_foreground(g, amc.logits_fg, labels); break;
    case LossKind::Ac: loss = loss_area(g, amc.map_fg); break;
    case LossKind::Bas: loss = loss_bas(g, amc.score_bg, amc.score, w.epsilon); break;
    case LossKind::Total: loss = total_loss(g, amc, labels, w).total_id; break;
  }
  g.backward(loss);
}

struct GradCheckResult {
  double max_rel = 0.0;
  int checked = 0;
  std::string worst;
};

/// Central finite differences against the analytic gradients, honoring the
/// frozen-head reading of the suppression term. stride>1 checks every
/// stride-th element of each parameter.
inline GradCheckResult check_gradients(BASModel &model, const Tensor &images,
                                       const std::vector<int> &labels, const LossWeights &w,
                                       LossKind kind, double h, int stride,
                                       double rel_floor = 1e-6) {
  const bool uses_bas = kind == LossKind::Bas || kind == LossKind::Total;

  analytic_gradients(model, images, labels, w, kind);
  std::vector<std::vector<double>> saved;
  for (Param *p : model.params()) saved.push_back(p->grad.data);

  Tensor sbg_center;
  if (uses_bas) {
    Graph g;
    const AMCValues amc = model.amc_forward(g, g.constant(images), labels);
    sbg_center = g.value(amc.score_bg);
  }
  const auto head = model.head_params();
  auto is_head = [&](Param *p) {
    return std::find(head.begin(), head.end(), p) != head.end();
  };

  GradCheckResult out;
  const auto params = model.params();
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param *p = params[pi];
    const Tensor *sbg = (uses_bas && is_head(p)) ? &sbg_center : nullptr;
    for (std::size_t i = 0; i < p->value.size(); i += stride) {
      const double orig = p->value.data[i];
      p->value.data[i] = orig + h;
      const double fplus = eval_loss(model, images, labels, w, kind, sbg);
      p->value.data[i] = orig - h;
      const double fminus = eval_loss(model, images, labels, w, kind, sbg);
      p->value.data[i] = orig;
      const double fd = (fplus - fminus) / (2.0 * h);
      const double ana = saved[pi][i];
      const double rel = std::abs(fd - ana) / std::max({std::abs(fd), std::abs(ana), rel_floor});
      if (rel > out.max_rel) {
        out.max_rel = rel;
        out.worst = p->name + "[" + std::to_string(i) + "] ana=" + std::to_string(ana) +
                    " fd=" + std::to_string(fd);
      }
      ++out.checked;
    }
  }
  return out;
}

}  // namespace bas::test
