#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bas/tensor.hpp"

namespace bas {

/// Numerically stable softmax of a score vector.
std::vector<double> softmax(const std::vector<double> &logits);

/// -log softmax(logits)[target].
double cross_entropy(const std::vector<double> &logits, int target);

/// Indices of the k largest values, descending; ties broken by lower index.
std::vector<int> topk_indices(const std::vector<double> &scores, int k);

/// Rescale to [0,1] by min-max; a constant input maps to all zeros.
Tensor minmax01(const Tensor &map);

/// Pure bilinear resize of every plane (matches the graph op, inference use).
Tensor bilinear_resize(const Tensor &x, int out_h, int out_w);

/// Nearest-neighbor resize of every plane (used for masks).
Tensor nearest_resize(const Tensor &x, int out_h, int out_w);

/// Spearman rank correlation with average ranks for ties.
/// Returns 0 when either side is constant.
double spearman(const std::vector<double> &xs, const std::vector<double> &ys);

/// Linear-interpolation quantile (q in [0,1]) of an unsorted sample.
double quantile(std::vector<double> values, double q);

/// FNV-1a content hash, for run provenance records.
std::uint64_t fnv1a(const std::string &bytes);
std::string fnv1a_hex(const std::string &bytes);

}  // namespace bas
