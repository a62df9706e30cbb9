#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bas/tensor.hpp"

namespace bas {

/// A learnable tensor with its gradient accumulator and optimizer state.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor momentum;
  double lr_mult = 1.0;

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

using ValueId = int;

/// Reverse-mode tape. Op builders append nodes in topological order;
/// backward() replays their closures in reverse. One Graph per forward pass.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph &) = delete;
  Graph &operator=(const Graph &) = delete;

  ValueId constant(Tensor v);
  /// Gradient-carrying leaf; its gradient is readable after backward().
  ValueId variable(Tensor v);

  // ------- ops -------
  /// 2-d convolution. Weight shape (out_ch, in_ch, k, k), bias (out_ch).
  /// When param_grads is false the weights are treated as constants in
  /// backward (input gradients still flow).
  ValueId conv2d(ValueId x, Param &weight, Param &bias, int stride, int pad, bool param_grads);
  ValueId relu(ValueId x);
  ValueId maxpool2(ValueId x);
  /// Spatial mean per channel: (n,c,h,w) -> (n,c,1,1).
  ValueId global_avg_pool(ValueId x);
  ValueId sigmoid(ValueId x);
  /// Elementwise product with a single-channel map broadcast over channels:
  /// x (n,c,h,w) * m (n,1,h,w).
  ValueId mul_mask(ValueId x, ValueId m);
  ValueId one_minus(ValueId x);
  ValueId bilinear_resize(ValueId x, int out_h, int out_w);
  /// Gather the per-sample category channel: maps (n,C,h,w) -> (n,1,h,w).
  ValueId select_map(ValueId maps, const std::vector<int> &category);
  /// Gather per-sample scores: vec (n,C,1,1) -> (n,1,1,1).
  ValueId pick(ValueId vec, const std::vector<int> &category);
  /// Per-sample softmax cross-entropy against integer labels: -> (n,1,1,1).
  ValueId softmax_cross_entropy(ValueId logits, const std::vector<int> &labels);
  /// Elementwise num / (den + eps).
  ValueId ratio(ValueId num, ValueId den, double eps);
  /// Clamp to [0,1]; gradient passes only strictly inside the interval.
  ValueId clamp01(ValueId x);
  ValueId mean_all(ValueId x);
  ValueId add(ValueId a, ValueId b);
  ValueId scale(ValueId x, double k);
  /// k * x + y, elementwise (same shapes).
  ValueId axpy(double k, ValueId x, ValueId y);

  // ------- execution -------
  void backward(ValueId loss);

  const Tensor &value(ValueId id) const { return nodes_[id].value; }
  Tensor &grad(ValueId id);
  bool needs_grad(ValueId id) const { return nodes_[id].needs_grad; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated only when needs_grad
    bool needs_grad = false;
    std::function<void()> backward;
  };

  ValueId emit(Tensor value, bool needs_grad, std::function<void()> bw);
  std::vector<Node> nodes_;
};

}  // namespace bas
