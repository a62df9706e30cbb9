#include "bas/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bas/errors.hpp"

namespace bas {

std::vector<double> softmax(const std::vector<double> &logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double &v : out) v /= sum;
  return out;
}

double cross_entropy(const std::vector<double> &logits, int target) {
  if (target < 0 || target >= static_cast<int>(logits.size()))
    throw ContractError("cross_entropy target out of range");
  const double m = *std::max_element(logits.begin(), logits.end());
  double lse = 0.0;
  for (double v : logits) lse += std::exp(v - m);
  return m + std::log(lse) - logits[target];
}

std::vector<int> topk_indices(const std::vector<double> &scores, int k) {
  if (k < 1 || k > static_cast<int>(scores.size()))
    throw ConfigError("top-k out of range: k=" + std::to_string(k) + ", C=" +
                      std::to_string(scores.size()));
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  idx.resize(k);
  return idx;
}

Tensor minmax01(const Tensor &map) {
  Tensor out = map;
  const double lo = map.min_value();
  const double hi = map.max_value();
  if (hi <= lo) {
    std::fill(out.data.begin(), out.data.end(), 0.0);
    return out;
  }
  const double inv = 1.0 / (hi - lo);
  for (double &v : out.data) v = (v - lo) * inv;
  return out;
}

namespace {

struct Tap {
  int lo, hi;
  double frac;
};

Tap tap_at(int out_idx, int in_size, int out_size) {
  const double src = (out_idx + 0.5) * static_cast<double>(in_size) / out_size - 0.5;
  double fl = std::floor(src);
  double frac = src - fl;
  int lo = static_cast<int>(fl);
  int hi = lo + 1;
  if (lo < 0) {
    lo = hi = 0;
    frac = 0.0;
  } else if (hi >= in_size) {
    lo = hi = in_size - 1;
    frac = 0.0;
  }
  return {lo, hi, frac};
}

}  // namespace

Tensor bilinear_resize(const Tensor &x, int out_h, int out_w) {
  Tensor out(x.n, x.c, out_h, out_w);
  std::vector<Tap> ys(out_h), xs(out_w);
  for (int i = 0; i < out_h; ++i) ys[i] = tap_at(i, x.h, out_h);
  for (int j = 0; j < out_w; ++j) xs[j] = tap_at(j, x.w, out_w);
  for (int p = 0; p < x.n * x.c; ++p) {
    const double *src = x.data.data() + static_cast<std::size_t>(p) * x.plane();
    double *dst = out.data.data() + static_cast<std::size_t>(p) * out_h * out_w;
    for (int i = 0; i < out_h; ++i) {
      for (int j = 0; j < out_w; ++j) {
        const Tap &ty = ys[i];
        const Tap &tx = xs[j];
        const double v00 = src[ty.lo * x.w + tx.lo];
        const double v01 = src[ty.lo * x.w + tx.hi];
        const double v10 = src[ty.hi * x.w + tx.lo];
        const double v11 = src[ty.hi * x.w + tx.hi];
        dst[i * out_w + j] = (1.0 - ty.frac) * ((1.0 - tx.frac) * v00 + tx.frac * v01) +
                             ty.frac * ((1.0 - tx.frac) * v10 + tx.frac * v11);
      }
    }
  }
  return out;
}

Tensor nearest_resize(const Tensor &x, int out_h, int out_w) {
  Tensor out(x.n, x.c, out_h, out_w);
  std::vector<int> ys(out_h), xs(out_w);
  for (int i = 0; i < out_h; ++i)
    ys[i] = std::min(x.h - 1, static_cast<int>((i + 0.5) * x.h / out_h));
  for (int j = 0; j < out_w; ++j)
    xs[j] = std::min(x.w - 1, static_cast<int>((j + 0.5) * x.w / out_w));
  for (int p = 0; p < x.n * x.c; ++p) {
    const double *src = x.data.data() + static_cast<std::size_t>(p) * x.plane();
    double *dst = out.data.data() + static_cast<std::size_t>(p) * out_h * out_w;
    for (int i = 0; i < out_h; ++i)
      for (int j = 0; j < out_w; ++j) dst[i * out_w + j] = src[ys[i] * x.w + xs[j]];
  }
  return out;
}

namespace {

std::vector<double> ranks_with_ties(const std::vector<double> &xs) {
  const std::size_t n = xs.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return xs[a] < xs[b]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman(const std::vector<double> &xs, const std::vector<double> &ys) {
  if (xs.size() != ys.size()) throw ContractError("spearman length mismatch");
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  const std::vector<double> rx = ranks_with_ties(xs);
  const std::vector<double> ry = ranks_with_ties(ys);
  const double mean = (n + 1) / 2.0;
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rx[i] - mean;
    const double b = ry[i] - mean;
    num += a * b;
    dx += a * a;
    dy += b * b;
  }
  if (dx == 0.0 || dy == 0.0) return 0.0;
  return num / std::sqrt(dx * dy);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ContractError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * (values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - lo;
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

std::uint64_t fnv1a(const std::string &bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a_hex(const std::string &bytes) {
  std::ostringstream os;
  os << std::hex << fnv1a(bytes);
  return os.str();
}

}  // namespace bas
