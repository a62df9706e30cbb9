#include "bas/probe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "bas/errors.hpp"
#include "bas/numeric.hpp"
#include "bas/plot.hpp"

namespace bas {

namespace {

// Running the kxk window with the anchor at floor((k-1)/2); pixels outside
// the image count as background.
Tensor morphology(const Tensor &mask, int k, bool erosion) {
  if (mask.n != 1 || mask.c != 1) throw ContractError("morphology expects (1,1,H,W)");
  if (k < 1) throw ContractError("structuring element size must be >= 1");
  const int h = mask.h, w = mask.w;
  const int lo = (k - 1) / 2;
  const int hi = k / 2;
  Tensor out(1, 1, h, w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      bool all = true, any = false;
      for (int di = -lo; di <= hi && (erosion ? all : !any); ++di) {
        for (int dj = -lo; dj <= hi; ++dj) {
          const int ii = i + di, jj = j + dj;
          const bool v = ii >= 0 && ii < h && jj >= 0 && jj < w &&
                         mask.data[static_cast<std::size_t>(ii) * w + jj] > 0.5;
          all = all && v;
          any = any || v;
          if (erosion ? !all : any) break;
        }
      }
      out.data[static_cast<std::size_t>(i) * w + j] = erosion ? (all ? 1.0 : 0.0)
                                                              : (any ? 1.0 : 0.0);
    }
  }
  return out;
}

double mask_area_fraction(const Tensor &mask) {
  double s = 0.0;
  for (double v : mask.data) s += v > 0.5 ? 1.0 : 0.0;
  return s / static_cast<double>(mask.plane());
}

bool mask_empty(const Tensor &mask) {
  for (double v : mask.data)
    if (v > 0.5) return false;
  return true;
}

}  // namespace

Tensor erode_mask(const Tensor &mask, int k) { return morphology(mask, k, true); }
Tensor dilate_mask(const Tensor &mask, int k) { return morphology(mask, k, false); }

MaskFamily build_mask_family(const Tensor &gt_mask, int n_min, int n_max, int feat_h,
                             int feat_w) {
  if (gt_mask.n != 1 || gt_mask.c != 1)
    throw ContractError("build_mask_family expects (1,1,H,W)");
  if (mask_empty(gt_mask)) throw ContractError("ground-truth mask is empty");
  if (n_min > 0 || n_max < 0 || n_min > n_max)
    throw ConfigError("n range must include 0 with n_min <= 0 <= n_max");

  MaskFamily family;
  family.base = nearest_resize(gt_mask, feat_h, feat_w);

  for (int n = n_min; n <= n_max; ++n) {
    Tensor full = n == 0 ? gt_mask
                         : (n < 0 ? erode_mask(gt_mask, 5 * (-n)) : dilate_mask(gt_mask, 5 * n));
    if (mask_empty(full)) {
      family.dropped_n.push_back(n);
      continue;
    }
    MaskFamilyMember member;
    member.n = n;
    member.mask = nearest_resize(full, feat_h, feat_w);
    if (mask_empty(member.mask)) {
      family.dropped_n.push_back(n);
      continue;
    }
    member.area_fraction = mask_area_fraction(member.mask);
    family.members.push_back(std::move(member));
  }
  if (family.members.empty()) throw ContractError("every family member eroded away");
  return family;
}

std::vector<ProbePoint> probe_model(BASModel &model, const Tensor &image, int gt_category,
                                    const MaskFamily &family, bool image_level) {
  if (image.n != 1) throw ContractError("probe_model expects one image");
  if (gt_category < 0 || gt_category >= model.spec().num_categories)
    throw ContractError("probe_model category out of range");

  std::vector<ProbePoint> points;
  points.reserve(family.members.size());

  // feature map is shared across members on the feature-level path
  Graph g;
  const ValueId input = g.constant(image);
  const ValueId feature = model.extract(g, input, /*param_grads=*/false);
  const Tensor feature_v = g.value(feature);

  auto pooled_scores = [&](const Tensor &masked) {
    Graph gh;
    const ValueId x = gh.constant(masked);
    const ValueId logits = gh.global_avg_pool(model.head(gh, x, /*param_grads=*/false));
    const Tensor &t = gh.value(logits);
    return std::vector<double>(t.data.begin(), t.data.end());
  };

  auto apply_mask = [](const Tensor &x, const Tensor &m) {
    Tensor out = x;
    const int plane = x.plane();
    for (int c = 0; c < x.c; ++c)
      for (int i = 0; i < plane; ++i)
        out.data[static_cast<std::size_t>(c) * plane + i] *= m.data[i];
    return out;
  };

  for (const auto &member : family.members) {
    ProbePoint p;
    p.n = member.n;
    p.area_fraction = member.area_fraction;

    std::vector<double> fg_scores, bg_scores;
    if (image_level) {
      Tensor m_img = nearest_resize(member.mask, image.h, image.w);
      Tensor inv = m_img;
      for (double &v : inv.data) v = 1.0 - v;
      Graph gf;
      const ValueId xin = gf.constant(apply_mask(image, m_img));
      const ValueId feat_fg = model.extract(gf, xin, false);
      fg_scores = pooled_scores(gf.value(feat_fg));
      Graph gb;
      const ValueId xbg = gb.constant(apply_mask(image, inv));
      const ValueId feat_bg = model.extract(gb, xbg, false);
      bg_scores = pooled_scores(gb.value(feat_bg));
    } else {
      Tensor inv = member.mask;
      for (double &v : inv.data) v = 1.0 - v;
      fg_scores = pooled_scores(apply_mask(feature_v, member.mask));
      bg_scores = pooled_scores(apply_mask(feature_v, inv));
    }

    p.fg_activation = fg_scores[gt_category];
    p.bg_activation = bg_scores[gt_category];
    p.entropy = cross_entropy(fg_scores, gt_category);
    points.push_back(p);
  }
  return points;
}

void emit_probe_curves(const std::vector<ProbePoint> &points, double base_area_fraction,
                       const std::filesystem::path &csv_path,
                       const std::filesystem::path &png_path) {
  std::filesystem::create_directories(csv_path.parent_path());
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write " + csv_path.string());
  csv << "n,area_fraction,entropy,fg_activation,bg_activation\n";
  for (const auto &p : points) {
    csv << p.n << "," << p.area_fraction << "," << p.entropy << "," << p.fg_activation << ","
        << p.bg_activation << "\n";
  }
  csv.close();

  PlotSpec spec;
  spec.title = "response vs mask area";
  spec.xlabel = "mask area fraction";
  spec.ylabel = "value";
  PlotSeries entropy{"entropy", {}, {}, {200, 60, 40}};
  PlotSeries fg{"fg activation", {}, {}, {40, 110, 220}};
  PlotSeries bg{"bg activation", {}, {}, {40, 170, 90}};
  for (const auto &p : points) {
    entropy.xs.push_back(p.area_fraction);
    entropy.ys.push_back(p.entropy);
    fg.xs.push_back(p.area_fraction);
    fg.ys.push_back(p.fg_activation);
    bg.xs.push_back(p.area_fraction);
    bg.ys.push_back(p.bg_activation);
  }
  spec.series = {entropy, fg, bg};
  spec.dashed_vlines = {base_area_fraction};
  render_line_plot(png_path, spec);
}

}  // namespace bas
