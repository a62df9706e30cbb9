#pragma once

#include <vector>

#include "bas/graph.hpp"
#include "bas/model.hpp"

namespace bas {

struct LossWeights {
  double alpha = 0.0;    // foreground-guidance weight
  double beta = 0.7;     // area-constraint weight
  double lambda = 1.0;   // background-suppression weight
  double epsilon = 1e-8; // denominator guard

  void validate() const;
};

/// All loss components of one batch, batch-averaged. `total` follows
/// l_cls + alpha*l_frg + beta*l_ac + lambda*l_bas_clamped and is the
/// only value meant for backward().
struct LossBundle {
  double l_cls = 0.0;
  double l_frg = 0.0;
  double l_ac = 0.0;
  double l_bas_raw = 0.0;
  double l_bas_clamped = 0.0;
  double total = 0.0;

  ValueId total_id = -1;
  ValueId l_cls_id = -1;
  ValueId l_frg_id = -1;
  ValueId l_ac_id = -1;
  ValueId l_bas_id = -1;  // clamped mean
};

/// Ratio suppression term for one batch: per-sample score_bg/(score+eps),
/// clamped to [0,1] (hard cutoff, no gradient beyond the cut), then
/// batch-averaged.
ValueId loss_bas(Graph &g, ValueId score_bg, ValueId score, double epsilon);

/// Mean foreground-map area, batch-averaged: mean over all entries of
/// the (n,1,h,w) foreground map.
ValueId loss_area(Graph &g, ValueId map_fg);

/// Softmax cross-entropy of the masked-foreground logits, batch-averaged.
ValueId loss_foreground(Graph &g, ValueId logits_fg, const std::vector<int> &labels);

/// Softmax cross-entropy of the full-image logits, batch-averaged.
ValueId loss_classification(Graph &g, ValueId logits, const std::vector<int> &labels);

/// Assembles the complete objective from one AMC forward pass.
LossBundle total_loss(Graph &g, const AMCValues &amc, const std::vector<int> &labels,
                      const LossWeights &w);

// Scalar helpers mirroring the graph ops for direct evaluation.
double loss_bas_value(double score_bg, double score, double epsilon);
double loss_area_value(const Tensor &map_fg);

}  // namespace bas
