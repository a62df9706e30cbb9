#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace bas {

/// Dense 4-d array in NCHW order. Score vectors are stored as (n, c, 1, 1).
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0) {}

  static Tensor zeros(int n, int c, int h, int w) { return Tensor(n, c, h, w); }
  static Tensor full(int n, int c, int h, int w, double v) {
    Tensor t(n, c, h, w);
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor scalar(double v) { return full(1, 1, 1, 1, v); }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  int plane() const { return h * w; }

  std::size_t index(int in, int ic, int ih, int iw) const {
    return ((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw;
  }
  double &at(int in, int ic, int ih, int iw) { return data[index(in, ic, ih, iw)]; }
  double at(int in, int ic, int ih, int iw) const { return data[index(in, ic, ih, iw)]; }

  double item() const;  // value of a 1-element tensor

  bool same_shape(const Tensor &o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  std::string shape_str() const;
  bool all_finite() const;
  double min_value() const;
  double max_value() const;
  double mean_value() const;
};

/// Stacks single-sample tensors (all shaped (1,c,h,w)) into one batch.
Tensor stack_batch(const std::vector<Tensor> &items);

/// Slice one sample out of a batch, keeping n = 1.
Tensor slice_sample(const Tensor &batch, int index);

}  // namespace bas
