#include "bas/graph.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>

#include "bas/errors.hpp"

namespace bas {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using ConstMapRow = Eigen::Map<const RowMat>;

ValueId Graph::emit(Tensor value, bool needs_grad, std::function<void()> bw) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = needs_grad;
  if (needs_grad) {
    node.grad = Tensor::zeros(node.value.n, node.value.c, node.value.h, node.value.w);
    node.backward = std::move(bw);
  }
  nodes_.push_back(std::move(node));
  return static_cast<ValueId>(nodes_.size()) - 1;
}

Tensor &Graph::grad(ValueId id) {
  if (!nodes_[id].needs_grad) throw ContractError("grad() on node without gradient");
  return nodes_[id].grad;
}

ValueId Graph::constant(Tensor v) { return emit(std::move(v), false, nullptr); }

ValueId Graph::variable(Tensor v) {
  return emit(std::move(v), true, []() {});
}

void Graph::backward(ValueId loss) {
  if (nodes_[loss].value.size() != 1)
    throw ContractError("backward() requires a scalar loss, got " + nodes_[loss].value.shape_str());
  if (!nodes_[loss].needs_grad) return;
  nodes_[loss].grad.data[0] = 1.0;
  for (int i = loss; i >= 0; --i) {
    if (nodes_[i].needs_grad && nodes_[i].backward) nodes_[i].backward();
  }
}

// --------------------------------------------------------------------------
// convolution

namespace {

// Writes one sample's patch matrix into the batched column buffer. The
// buffer is row-major (in_ch*k*k) x (n*ho*wo); ld is its row pitch and the
// sample's columns start at column offset n*ho*wo.
void im2col_sample(const Tensor &x, int n, int k, int stride, int pad, int ho, int wo,
                   double *cols, std::size_t ld) {
  const int plane = x.h * x.w;
  const int opix = ho * wo;
  double *base = cols + static_cast<std::size_t>(n) * opix;
  for (int ci = 0; ci < x.c; ++ci) {
    const double *src = x.data.data() + (static_cast<std::size_t>(n) * x.c + ci) * plane;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        double *dst = base + (static_cast<std::size_t>(ci) * k * k + ki * k + kj) * ld;
        for (int oi = 0; oi < ho; ++oi) {
          const int ii = oi * stride - pad + ki;
          if (ii < 0 || ii >= x.h) {
            std::fill(dst + oi * wo, dst + (oi + 1) * wo, 0.0);
            continue;
          }
          const double *srow = src + ii * x.w;
          double *drow = dst + oi * wo;
          int oj = 0;
          for (; oj < wo; ++oj) {
            const int jj = oj * stride - pad + kj;
            if (jj >= 0) break;
            drow[oj] = 0.0;
          }
          if (stride == 1) {
            const int jj0 = oj - pad + kj;
            const int valid = std::min(wo - oj, x.w - jj0);
            if (valid > 0) std::copy_n(srow + jj0, valid, drow + oj);
            for (oj += std::max(valid, 0); oj < wo; ++oj) drow[oj] = 0.0;
          } else {
            for (; oj < wo; ++oj) {
              const int jj = oj * stride - pad + kj;
              drow[oj] = jj < x.w ? srow[jj] : 0.0;
            }
          }
        }
      }
    }
  }
}

// Scatter-add of one sample's patch gradients back to the input layout.
void col2im_sample(const double *cols, std::size_t ld, int n, int c, int hh, int ww, int k,
                   int stride, int pad, int ho, int wo, Tensor &dx) {
  const int plane = hh * ww;
  const int opix = ho * wo;
  const double *base = cols + static_cast<std::size_t>(n) * opix;
  for (int ci = 0; ci < c; ++ci) {
    double *dst = dx.data.data() + (static_cast<std::size_t>(n) * c + ci) * plane;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const double *src = base + (static_cast<std::size_t>(ci) * k * k + ki * k + kj) * ld;
        for (int oi = 0; oi < ho; ++oi) {
          const int ii = oi * stride - pad + ki;
          if (ii < 0 || ii >= hh) continue;
          double *drow = dst + ii * ww;
          const double *srow = src + oi * wo;
          for (int oj = 0; oj < wo; ++oj) {
            const int jj = oj * stride - pad + kj;
            if (jj >= 0 && jj < ww) drow[jj] += srow[oj];
          }
        }
      }
    }
  }
}

}  // namespace

ValueId Graph::conv2d(ValueId x, Param &weight, Param &bias, int stride, int pad,
                      bool param_grads) {
  const Tensor &in = value(x);
  const int co = weight.value.n;
  const int ci = weight.value.c;
  const int k = weight.value.h;
  if (weight.value.w != k) throw ContractError("conv kernel must be square");
  if (in.c != ci)
    throw ContractError("conv2d channel mismatch: input " + in.shape_str() + " vs weight " +
                        weight.value.shape_str());
  const int ho = (in.h + 2 * pad - k) / stride + 1;
  const int wo = (in.w + 2 * pad - k) / stride + 1;
  if (ho <= 0 || wo <= 0) throw ContractError("conv2d output collapses to zero size");

  const int ck = ci * k * k;
  const int opix = ho * wo;
  auto cols = std::make_shared<RowMat>(ck, static_cast<long>(in.n) * opix);
  const std::size_t ld = static_cast<std::size_t>(in.n) * opix;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int n = 0; n < in.n; ++n)
    im2col_sample(in, n, k, stride, pad, ho, wo, cols->data(), ld);

  ConstMapRow wmat(weight.value.data.data(), co, ck);
  Eigen::Map<const Eigen::VectorXd> bvec(bias.value.data.data(), co);

  Tensor out(in.n, co, ho, wo);
  {
    RowMat prod(co, static_cast<long>(in.n) * opix);
    prod.noalias() = wmat * (*cols);
    for (int n = 0; n < in.n; ++n) {
      MapRow out_n(out.data.data() + static_cast<std::size_t>(n) * co * opix, co, opix);
      out_n = prod.middleCols(static_cast<long>(n) * opix, opix);
      out_n.colwise() += bvec;
    }
  }

  const bool x_needs = needs_grad(x);
  const bool needs = x_needs || param_grads;
  ValueId out_id = emit(std::move(out), needs, nullptr);
  if (!needs) return out_id;

  Graph *g = this;
  nodes_[out_id].backward = [g, out_id, x, &weight, &bias, cols, stride, pad, k, ci, co, opix, ho,
                             wo, x_needs, param_grads]() {
    const Tensor &dy = g->nodes_[out_id].grad;
    const int nn = dy.n;
    const int ck = ci * k * k;
    RowMat dymat(co, static_cast<long>(nn) * opix);
    for (int n = 0; n < nn; ++n) {
      ConstMapRow dy_n(dy.data.data() + static_cast<std::size_t>(n) * co * opix, co, opix);
      dymat.middleCols(static_cast<long>(n) * opix, opix) = dy_n;
    }
    if (param_grads) {
      MapRow dw(weight.grad.data.data(), co, ck);
      dw.noalias() += dymat * cols->transpose();
      Eigen::Map<Eigen::VectorXd> db(bias.grad.data.data(), co);
      db.noalias() += dymat.rowwise().sum();
    }
    if (x_needs) {
      Tensor &dx = g->grad(x);
      ConstMapRow wmat(weight.value.data.data(), co, ck);
      RowMat dcols(ck, static_cast<long>(nn) * opix);
      dcols.noalias() = wmat.transpose() * dymat;
      const std::size_t ld = static_cast<std::size_t>(nn) * opix;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
      for (int n = 0; n < nn; ++n)
        col2im_sample(dcols.data(), ld, n, dx.c, dx.h, dx.w, k, stride, pad, ho, wo, dx);
    }
  };
  return out_id;
}

// --------------------------------------------------------------------------
// pointwise / pooling ops

ValueId Graph::relu(ValueId x) {
  const Tensor &in = value(x);
  Tensor out = in;
  for (double &v : out.data) v = v > 0.0 ? v : 0.0;
  const bool needs = needs_grad(x);
  ValueId out_id = emit(std::move(out), needs, nullptr);
  if (!needs) return out_id;
  Graph *g = this;
  nodes_[out_id].backward = [g, out_id, x]() {
    const Tensor &dy = g->nodes_[out_id].grad;
    const Tensor &in = g->value(x);
    Tensor &dx = g->grad(x);
    for (std::size_t i = 0; i < dy.size(); ++i)
      if (in.data[i] > 0.0) dx.data[i] += dy.data[i];
  };
  return out_id;
}

ValueId Graph::maxpool2(ValueId x) {
  const Tensor &in = value(x);
  const int ho = in.h / 2;
  const int wo = in.w / 2;
  if (ho == 0 || wo == 0) throw ContractError("maxpool2 on degenerate spatial size");
  Tensor out(in.n, in.c, ho, wo);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  const int planes = in.n * in.c;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int p = 0; p < planes; ++p) {
    const double *src = in.data.data() + static_cast<std::size_t>(p) * in.h * in.w;
    double *dst = out.data.data() + static_cast<std::size_t>(p) * ho * wo;
    std::size_t *amax = argmax->data() + static_cast<std::size_t>(p) * ho * wo;
    for (int oi = 0; oi < ho; ++oi) {
      for (int oj = 0; oj < wo; ++oj) {
        std::size_t best = static_cast<std::size_t>(2 * oi) * in.w + 2 * oj;
        double bv = src[best];
        const std::size_t cand[3] = {best + 1, best + in.w, best + in.w + 1};
        for (std::size_t idx : cand) {
          if (src[idx] > bv) {
            bv = src[idx];
            best = idx;
          }
        }
        dst[oi * wo + oj] = bv;
        amax[oi * wo + oj] = static_cast<std::size_t>(p) * in.h * in.w + best;
      }
    }
  }
  const bool needs = needs_grad(x);
  ValueId out_id = emit(std::move(out), needs, nullptr);
  if (!needs) return out_id;
  Graph *g = this;
  nodes_[out_id].backward = [g, out_id, x, argmax]() {
    const Tensor &dy = g->nodes_[out_id].grad;
    Tensor &dx = g->grad(x);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.data[(*argmax)[i]] += dy.data[i];
  };
  return out_id;
}

ValueId Graph::global_avg_pool(ValueId x) {
  const Tensor &in = value(x);
  const int plane = in.plane();
  Tensor out(in.n, in.c, 1, 1);
  for (int p = 0; p < in.n * in.c; ++p) {
    const double *src = in.data.data() + static_cast<std::size_t>(p) * plane;
    double s = 0.0;
    for (int i = 0; i < plane; ++i) s += src[i];
    out.data[p] = s / plane;
  }
  const bool needs = needs_grad(x);
  ValueId out_id = emit(std::move(out), needs, nullptr);
  if (!needs) return out_id;
  Graph *g = this;
  nodes_[out_id].backward = [g, out_id, x, plane]() {
    const Tensor &dy = g->nodes_[out_id].grad;
    Tensor &dx = g->grad(x);
    for (int p = 0; p < dy.n * dy.c; ++p) {
      const double gv = dy.data[p] / plane;
      double *dst = dx.data.data() + static_cast<std::size_t>(p) * plane;
      for (int i = 0; i < plane; ++i) dst[i] += gv;
    }
  };
  return out_id;
}

ValueId Graph::sigmoid(ValueId x) {
  const Tensor &in = value(x);
  Tensor out = in;
  for (double &v : out.data) {
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  const bool needs = needs_grad(x);
  ValueId out_id = emit(std::move(out), needs, nullptr);
  if (!needs) return out_id;
  Graph *g = this;
  nodes_[out_id].backward = [g, out_id, x]() {
    const Tensor &dy = g->nodes_[out_id].grad;
    const Tensor &y = g->value(out_id);
    Tensor &dx = g->grad(x);
    for (std::size_t i = 0; i < dy.size(); ++i)
      dx.data[i] += dy.data[i] * y.data[i] * (1.0 - y.data[i]);
  };
  return out_id;
}

ValueId Graph::mul_mask(ValueId x, ValueId m) {
  const Tensor &xv = value(x);
  const Tensor &mv = value(m);
  if (mv.c != 1 || mv.n != xv.n || mv.h != xv.h || mv.w != xv.w)
    throw ContractError("mul_mask expects mask (n,1,h,w) matching " + xv.shape_str());
  const int plane = xv.plane();
  Tensor out(xv.n, xv.c, xv.h, xv.w);
  for (int n = 0; n < xv.n; ++n) {
    const double *mp = mv.data.data() + static_cast<std::size_t>(n) * plane;
    for (int c = 0; c < xv.c; ++c) {
      const double *xp = xv.data.data() + (static_cast<std::size_t>(n) * xv.c + c) * plane;
      double *op = out.data.data() + (static_cast<std::size_t>(n) * xv.c + c) * plane;
      for (int i = 0; i < plane; ++i) op[i] = xp[i] * mp[i];
    }
  }
  const bool needs = needs_grad(x) || needs_grad(m);
  ValueId out_id = emit(std::move(out), needs, nullptr);
  if (!needs) return out_id;
  Graph *g = this;
  nodes_[out_id].backward = [g, out_id, x, m, plane]() {
    const Tensor &dy = g->nodes_[out_id].grad;
    const Tensor &xv = g->value(x);
    const Tensor &mv = g->value(m);
    if (g->needs_grad(x)) {
      Tensor &dx = g->grad(x);
      for (int n = 0; n < xv.n; ++n) {
        const double *mp = mv.data.data() + static_cast<std::size_t>(n) * plane;
        for (int c = 0; c < xv.c; ++c) {
          const std::size_t base = (static_cast<std::size_t>(n) * xv.c + c) * plane;
          for (int i = 0; i < plane; ++i) dx.data[base + i] += dy.data[base + i] * mp[i];
        }
      }
    }
    if (g->needs_grad(m)) {
      Tensor &dm = g->grad(m);
      for (int n = 0; n < xv.n; ++n) {
        double *dmp = dm.data.data() + static_cast<std::size_t>(n) * plane;
        for (int c = 0; c < xv.c; ++c) {
          const std::size_t base = (static_cast<std::size_t>(n) * xv.c + c) * plane;
          for (int i = 0; i < plane; ++i) dmp[i] += dy.data[base + i] * xv.data[base + i];
        }
      }
    }
  };
  return out_id;
}

ValueId Graph::one_minus(ValueId x) {
  const Tensor &in = value(x);
  Tensor out = in;
  for (double &v : out.data) v = 1.0 - v;
  const bool needs = needs_grad(x);
  ValueId out_id = emit(std::move(out), needs, nullptr);
  if (!needs) return out_id;
  Graph *g = this;
  nodes_[out_id].backward = [g, out_id, x]() {
    const Tensor &dy = g->nodes_[out_id].grad;
    Tensor &dx = g->grad(x);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.data[i] -= dy.data[i];
  };
  return out_id;
}

namespace {

struct BilinearTap {
  int lo, hi;
  double frac;
};

BilinearTap bilinear_tap(int out_idx, int in_size, int out_size) {
  const double src = (out_idx + 0.5) * static_cast<double>(in_size) / out_size - 0.5;
  double fl = std::floor(src);
  double frac = src - fl;
  int lo = static_cast<int>(fl);
  int hi = lo + 1;
  if (lo < 0) {
    lo = 0;
    hi = 0;
    frac = 0.0;
  } else if (hi >= in_size) {
    lo = in_size - 1;
    hi = in_size - 1;
    frac = 0.0;
  }
  return {lo, hi, frac};
}

}  // namespace

ValueId Graph::bilinear_resize(ValueId x, int out_h, int out_w) {
  const Tensor &in = value(x);
  Tensor out(in.n, in.c, out_h, out_w);
  std::vector<BilinearTap> ys(out_h), xs(out_w);
  for (int i = 0; i < out_h; ++i) ys[i] = bilinear_tap(i, in.h, out_h);
  for (int j = 0; j < out_w; ++j) xs[j] = bilinear_tap(j, in.w, out_w);
  for (int p = 0; p < in.n * in.c; ++p) {
    const double *src = in.data.data() + static_cast<std::size_t>(p) * in.plane();
    double *dst = out.data.data() + static_cast<std::size_t>(p) * out_h * out_w;
    for (int i = 0; i < out_h; ++i) {
      for (int j = 0; j < out_w; ++j) {
        const auto &ty = ys[i];
        const auto &tx = xs[j];
        const double v00 = src[ty.lo * in.w + tx.lo];
        const double v01 = src[ty.lo * in.w + tx.hi];
        const double v10 = src[ty.hi * in.w + tx.lo];
        const double v11 = src[ty.hi * in.w + tx.hi];
        dst[i * out_w + j] = (1.0 - ty.frac) * ((1.0 - tx.frac) * v00 + tx.frac * v01) +
                             ty.frac * ((1.0 - tx.frac) * v10 + tx.frac * v11);
      }
    }
  }
  const bool needs = needs_grad(x);
  ValueId out_id = emit(std::move(out), needs, nullptr);
  if (!needs) return out_id;
  Graph *g = this;
  auto ys_p = std::make_shared<std::vector<BilinearTap>>(std::move(ys));
  auto xs_p = std::make_shared<std::vector<BilinearTap>>(std::move(xs));
  nodes_[out_id].backward = [g, out_id, x, out_h, out_w, ys_p, xs_p]() {
    const Tensor &dy = g->nodes_[out_id].grad;
    Tensor &dx = g->grad(x);
    for (int p = 0; p < dy.n * dy.c; ++p) {
      const double *src = dy.data.data() + static_cast<std::size_t>(p) * out_h * out_w;
      double *dst = dx.data.data() + static_cast<std::size_t>(p) * dx.plane();
      for (int i = 0; i < out_h; ++i) {
        for (int j = 0; j < out_w; ++j) {
          const auto &ty = (*ys_p)[i];
          const auto &tx = (*xs_p)[j];
          const double gv = src[i * out_w + j];
          dst[ty.lo * dx.w + tx.lo] += (1.0 - ty.frac) * (1.0 - tx.frac) * gv;
          dst[ty.lo * dx.w + tx.hi] += (1.0 - ty.frac) * tx.frac * gv;
          dst[ty.hi * dx.w + tx.lo] += ty.frac * (1.0 - tx.frac) * gv;
          dst[ty.hi * dx.w + tx.hi] += ty.frac * tx.frac * gv;
        }
      }
    }
  };
  return out_id;
}

ValueId Graph::select_map(ValueId maps, const std::vector<int> &category) {
  const Tensor &in = value(maps);
  if (static_cast<int>(category.size()) != in.n)
    throw ContractError("select_map needs one category per sample");
  Tensor out(in.n, 1, in.h, in.w);
  const int plane = in.plane();
  for (int n = 0; n < in.n; ++n) {
    const int cat = category[n];
    if (cat < 0 || cat >= in.c)
      throw ContractError("category " + std::to_string(cat) + " out of range [0," +
                          std::to_string(in.c) + ")");
    std::copy_n(in.data.data() + (static_cast<std::size_t>(n) * in.c + cat) * plane, plane,
                out.data.data() + static_cast<std::size_t>(n) * plane);
  }
  const bool needs = needs_grad(maps);
  ValueId out_id = emit(std::move(out), needs, nullptr);
  if (!needs) return out_id;
  Graph *g = this;
  auto cats = std::make_shared<std::vector<int>>(category);
  nodes_[out_id].backward = [g, out_id, maps, cats, plane]() {
    const Tensor &dy = g->nodes_[out_id].grad;
    Tensor &dx = g->grad(maps);
    for (int n = 0; n < dy.n; ++n) {
      double *dst = dx.data.data() + (static_cast<std::size_t>(n) * dx.c + (*cats)[n]) * plane;
      const double *src = dy.data.data() + static_cast<std::size_t>(n) * plane;
      for (int i = 0; i < plane; ++i) dst[i] += src[i];
    }
  };
  return out_id;
}

ValueId Graph::pick(ValueId vec, const std::vector<int> &category) {
  const Tensor &in = value(vec);
  if (in.h != 1 || in.w != 1) throw ContractError("pick expects (n,c,1,1)");
  if (static_cast<int>(category.size()) != in.n)
    throw ContractError("pick needs one category per sample");
  Tensor out(in.n, 1, 1, 1);
  for (int n = 0; n < in.n; ++n) {
    const int cat = category[n];
    if (cat < 0 || cat >= in.c) throw ContractError("pick category out of range");
    out.data[n] = in.data[static_cast<std::size_t>(n) * in.c + cat];
  }
  const bool needs = needs_grad(vec);
  ValueId out_id = emit(std::move(out), needs, nullptr);
  if (!needs) return out_id;
  Graph *g = this;
  auto cats = std::make_shared<std::vector<int>>(category);
  nodes_[out_id].backward = [g, out_id, vec, cats]() {
    const Tensor &dy = g->nodes_[out_id].grad;
    Tensor &dx = g->grad(vec);
    for (int n = 0; n < dy.n; ++n)
      dx.data[static_cast<std::size_t>(n) * dx.c + (*cats)[n]] += dy.data[n];
  };
  return out_id;
}

ValueId Graph::softmax_cross_entropy(ValueId logits, const std::vector<int> &labels) {
  const Tensor &in = value(logits);
  if (in.h != 1 || in.w != 1) throw ContractError("softmax_cross_entropy expects (n,c,1,1)");
  if (static_cast<int>(labels.size()) != in.n)
    throw ContractError("softmax_cross_entropy needs one label per sample");
  Tensor out(in.n, 1, 1, 1);
  for (int n = 0; n < in.n; ++n) {
    const double *row = in.data.data() + static_cast<std::size_t>(n) * in.c;
    const int gt = labels[n];
    if (gt < 0 || gt >= in.c) throw ContractError("label out of range");
    double m = row[0];
    for (int c = 1; c < in.c; ++c) m = std::max(m, row[c]);
    double lse = 0.0;
    for (int c = 0; c < in.c; ++c) lse += std::exp(row[c] - m);
    out.data[n] = m + std::log(lse) - row[gt];
  }
  const bool needs = needs_grad(logits);
  ValueId out_id = emit(std::move(out), needs, nullptr);
  if (!needs) return out_id;
  Graph *g = this;
  auto labs = std::make_shared<std::vector<int>>(labels);
  nodes_[out_id].backward = [g, out_id, logits, labs]() {
    const Tensor &dy = g->nodes_[out_id].grad;
    const Tensor &in = g->value(logits);
    Tensor &dx = g->grad(logits);
    for (int n = 0; n < in.n; ++n) {
      const double *row = in.data.data() + static_cast<std::size_t>(n) * in.c;
      double *drow = dx.data.data() + static_cast<std::size_t>(n) * in.c;
      double m = row[0];
      for (int c = 1; c < in.c; ++c) m = std::max(m, row[c]);
      double lse = 0.0;
      for (int c = 0; c < in.c; ++c) lse += std::exp(row[c] - m);
      const double gv = dy.data[n];
      for (int c = 0; c < in.c; ++c) {
        const double p = std::exp(row[c] - m) / lse;
        drow[c] += gv * (p - (c == (*labs)[n] ? 1.0 : 0.0));
      }
    }
  };
  return out_id;
}

ValueId Graph::ratio(ValueId num, ValueId den, double eps) {
  const Tensor &nv = value(num);
  const Tensor &dv = value(den);
  if (!nv.same_shape(dv)) throw ContractError("ratio shape mismatch");
  Tensor out = nv;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = nv.data[i] / (dv.data[i] + eps);
  const bool needs = needs_grad(num) || needs_grad(den);
  ValueId out_id = emit(std::move(out), needs, nullptr);
  if (!needs) return out_id;
  Graph *g = this;
  nodes_[out_id].backward = [g, out_id, num, den, eps]() {
    const Tensor &dy = g->nodes_[out_id].grad;
    const Tensor &nv = g->value(num);
    const Tensor &dv = g->value(den);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      const double d = dv.data[i] + eps;
      if (g->needs_grad(num)) g->grad(num).data[i] += dy.data[i] / d;
      if (g->needs_grad(den)) g->grad(den).data[i] -= dy.data[i] * nv.data[i] / (d * d);
    }
  };
  return out_id;
}

ValueId Graph::clamp01(ValueId x) {
  const Tensor &in = value(x);
  Tensor out = in;
  for (double &v : out.data) v = std::min(std::max(v, 0.0), 1.0);
  const bool needs = needs_grad(x);
  ValueId out_id = emit(std::move(out), needs, nullptr);
  if (!needs) return out_id;
  Graph *g = this;
  nodes_[out_id].backward = [g, out_id, x]() {
    const Tensor &dy = g->nodes_[out_id].grad;
    const Tensor &in = g->value(x);
    Tensor &dx = g->grad(x);
    for (std::size_t i = 0; i < dy.size(); ++i)
      if (in.data[i] > 0.0 && in.data[i] < 1.0) dx.data[i] += dy.data[i];
  };
  return out_id;
}

ValueId Graph::mean_all(ValueId x) {
  const Tensor &in = value(x);
  Tensor out = Tensor::scalar(in.mean_value());
  const bool needs = needs_grad(x);
  ValueId out_id = emit(std::move(out), needs, nullptr);
  if (!needs) return out_id;
  Graph *g = this;
  nodes_[out_id].backward = [g, out_id, x]() {
    const double gv = g->nodes_[out_id].grad.data[0];
    Tensor &dx = g->grad(x);
    const double k = gv / static_cast<double>(dx.size());
    for (double &v : dx.data) v += k;
  };
  return out_id;
}

ValueId Graph::add(ValueId a, ValueId b) {
  const Tensor &av = value(a);
  const Tensor &bv = value(b);
  if (!av.same_shape(bv)) throw ContractError("add shape mismatch");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
  const bool needs = needs_grad(a) || needs_grad(b);
  ValueId out_id = emit(std::move(out), needs, nullptr);
  if (!needs) return out_id;
  Graph *g = this;
  nodes_[out_id].backward = [g, out_id, a, b]() {
    const Tensor &dy = g->nodes_[out_id].grad;
    if (g->needs_grad(a))
      for (std::size_t i = 0; i < dy.size(); ++i) g->grad(a).data[i] += dy.data[i];
    if (g->needs_grad(b))
      for (std::size_t i = 0; i < dy.size(); ++i) g->grad(b).data[i] += dy.data[i];
  };
  return out_id;
}

ValueId Graph::scale(ValueId x, double k) {
  const Tensor &in = value(x);
  Tensor out = in;
  for (double &v : out.data) v *= k;
  const bool needs = needs_grad(x);
  ValueId out_id = emit(std::move(out), needs, nullptr);
  if (!needs) return out_id;
  Graph *g = this;
  nodes_[out_id].backward = [g, out_id, x, k]() {
    const Tensor &dy = g->nodes_[out_id].grad;
    Tensor &dx = g->grad(x);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.data[i] += k * dy.data[i];
  };
  return out_id;
}

ValueId Graph::axpy(double k, ValueId x, ValueId y) {
  const Tensor &xv = value(x);
  const Tensor &yv = value(y);
  if (!xv.same_shape(yv)) throw ContractError("axpy shape mismatch");
  Tensor out = yv;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += k * xv.data[i];
  const bool needs = needs_grad(x) || needs_grad(y);
  ValueId out_id = emit(std::move(out), needs, nullptr);
  if (!needs) return out_id;
  Graph *g = this;
  nodes_[out_id].backward = [g, out_id, x, y, k]() {
    const Tensor &dy = g->nodes_[out_id].grad;
    if (g->needs_grad(x))
      for (std::size_t i = 0; i < dy.size(); ++i) g->grad(x).data[i] += k * dy.data[i];
    if (g->needs_grad(y))
      for (std::size_t i = 0; i < dy.size(); ++i) g->grad(y).data[i] += dy.data[i];
  };
  return out_id;
}

}  // namespace bas
