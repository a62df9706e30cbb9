#include "bas/inference.hpp"

#include <algorithm>

#include "bas/errors.hpp"
#include "bas/numeric.hpp"

namespace bas {

Protocol protocol_from_string(const std::string &name) {
  if (name == "gt_known") return Protocol::GtKnown;
  if (name == "top1") return Protocol::Top1;
  if (name == "top5") return Protocol::Top5;
  throw ConfigError("unknown protocol '" + name + "' (expected gt_known|top1|top5)");
}

std::string protocol_to_string(Protocol p) {
  switch (p) {
    case Protocol::GtKnown: return "gt_known";
    case Protocol::Top1: return "top1";
    default: return "top5";
  }
}

Tensor fuse_topk(const Tensor &maps, const std::vector<double> &class_scores, int k,
                 std::optional<int> include_category) {
  if (maps.n != 1) throw ContractError("fuse_topk expects a single sample (1,C,h,w)");
  if (static_cast<int>(class_scores.size()) != maps.c)
    throw ContractError("fuse_topk: score count differs from category count");
  std::vector<int> selected = topk_indices(class_scores, k);
  if (include_category) {
    const int inc = *include_category;
    if (inc < 0 || inc >= maps.c) throw ContractError("include_category out of range");
    if (std::find(selected.begin(), selected.end(), inc) == selected.end())
      selected.back() = inc;
  }

  const int plane = maps.plane();
  Tensor out(1, 1, maps.h, maps.w);
  if (selected.size() == 1) {
    // bitwise identity with the single selected map
    std::copy_n(maps.data.data() + static_cast<std::size_t>(selected[0]) * plane, plane,
                out.data.data());
    return out;
  }
  for (int cat : selected) {
    const double *src = maps.data.data() + static_cast<std::size_t>(cat) * plane;
    for (int i = 0; i < plane; ++i) out.data[i] += src[i];
  }
  const double inv = 1.0 / static_cast<double>(selected.size());
  for (double &v : out.data) v *= inv;
  return out;
}

BBox extract_box(const Tensor &map, double tau) {
  if (map.n != 1 || map.c != 1) throw ContractError("extract_box expects (1,1,H,W)");
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0,1)");
  const int h = map.h, w = map.w;
  const double thresh = tau * map.max_value();

  std::vector<std::uint8_t> fg(static_cast<std::size_t>(h) * w);
  bool any = false;
  for (std::size_t i = 0; i < fg.size(); ++i) {
    fg[i] = map.data[i] > thresh ? 1 : 0;
    any = any || fg[i];
  }
  if (!any) return BBox{0, 0, static_cast<double>(w), static_cast<double>(h)};

  // largest 4-connected component by pixel count
  std::vector<std::int32_t> label(fg.size(), -1);
  std::vector<int> stack;
  int best_size = 0;
  BBox best{};
  std::int32_t next = 0;
  for (int start = 0; start < static_cast<int>(fg.size()); ++start) {
    if (!fg[start] || label[start] >= 0) continue;
    int count = 0;
    int x1 = w, y1 = h, x2 = -1, y2 = -1;
    stack.push_back(start);
    label[start] = next;
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      const int ci = cur / w, cj = cur % w;
      ++count;
      x1 = std::min(x1, cj);
      y1 = std::min(y1, ci);
      x2 = std::max(x2, cj);
      y2 = std::max(y2, ci);
      const int nbr[4] = {cur - w, cur + w, cj > 0 ? cur - 1 : -1, cj + 1 < w ? cur + 1 : -1};
      for (int nb : nbr) {
        if (nb < 0 || nb >= static_cast<int>(fg.size())) continue;
        if (fg[nb] && label[nb] < 0) {
          label[nb] = next;
          stack.push_back(nb);
        }
      }
    }
    if (count > best_size) {
      best_size = count;
      best = BBox{static_cast<double>(x1), static_cast<double>(y1), static_cast<double>(x2 + 1),
                  static_cast<double>(y2 + 1)};
    }
    ++next;
  }
  return best;
}

LocalizationResult localize(BASModel &model, const Tensor &image, Protocol protocol, int k,
                            double tau, std::optional<int> gt_category) {
  if (image.n != 1) throw ContractError("localize expects one image");
  auto fwd = model.forward_eval(image);

  std::vector<double> logits(fwd.logits.c);
  for (int c = 0; c < fwd.logits.c; ++c) logits[c] = fwd.logits.data[c];

  LocalizationResult out;
  out.class_scores = softmax(logits);
  out.topk_categories = topk_indices(out.class_scores, std::min(k, fwd.maps.c));

  std::optional<int> include;
  if (protocol == Protocol::GtKnown) {
    if (!gt_category) throw ContractError("gt_known protocol requires the ground-truth category");
    include = gt_category;
  }
  const Tensor fused_small = fuse_topk(fwd.maps, out.class_scores, k, include);
  out.fused_map = minmax01(bilinear_resize(fused_small, image.h, image.w));
  out.predicted_box = extract_box(out.fused_map, tau);
  return out;
}

}  // namespace bas
