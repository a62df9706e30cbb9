#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bas/bbox.hpp"
#include "bas/model.hpp"
#include "bas/tensor.hpp"

namespace bas {

enum class Protocol { GtKnown, Top1, Top5 };

Protocol protocol_from_string(const std::string &name);
std::string protocol_to_string(Protocol p);

struct LocalizationResult {
  Tensor fused_map;                 // (1,1,H,W) at image resolution, min-max scaled
  BBox predicted_box;
  std::vector<int> topk_categories; // descending by score
  std::vector<double> class_scores; // softmax over categories
};

/// Average the prediction maps of the k highest-scoring categories.
/// When include_category is set and missing from the top-k it replaces the
/// k-th entry. maps is (1,C,h,w); the result is (1,1,h,w), bitwise equal to
/// the selected map when a single map is chosen.
Tensor fuse_topk(const Tensor &maps, const std::vector<double> &class_scores, int k,
                 std::optional<int> include_category = std::nullopt);

/// Threshold at tau * max, keep the largest 4-connected component, return
/// its tight box. An empty binarization yields the full-image box.
BBox extract_box(const Tensor &map, double tau);

/// Single forward pass on one image (1,3,H,W): fuse, upsample to image
/// resolution, min-max rescale, extract the box.
LocalizationResult localize(BASModel &model, const Tensor &image, Protocol protocol, int k,
                            double tau, std::optional<int> gt_category = std::nullopt);

}  // namespace bas
