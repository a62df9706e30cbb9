#include "bas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "bas/errors.hpp"
#include "bas/numeric.hpp"

namespace bas {

LocAccuracy loc_accuracies(const std::vector<ImageRecord> &records) {
  LocAccuracy acc;
  if (records.empty()) return acc;
  int gt = 0, t1 = 0, t5 = 0;
  for (const auto &r : records) {
    const bool loc_ok = r.iou > 0.5;
    gt += loc_ok;
    t1 += loc_ok && r.top1_hit;
    t5 += loc_ok && r.top5_hit;
  }
  const double n = static_cast<double>(records.size());
  acc.gt_known = 100.0 * gt / n;
  acc.top1 = 100.0 * t1 / n;
  acc.top5 = 100.0 * t5 / n;
  return acc;
}

PeakResult peak_metrics(const Tensor &map01, const Tensor &gt_mask) {
  if (map01.plane() != gt_mask.plane() || map01.h != gt_mask.h)
    throw ContractError("peak_metrics shape mismatch: " + map01.shape_str() + " vs " +
                        gt_mask.shape_str());
  const std::size_t total = static_cast<std::size_t>(map01.h) * map01.w;

  // For integer t, pixel value v participates for all t < v. Bucket by
  // ceil(v)-1 and take suffix sums, which reproduces the per-threshold
  // comparison (map*255 > t) exactly.
  std::array<std::int64_t, 257> above{}, inter{};
  std::int64_t gt_count = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const double v = map01.data[i] * 255.0;
    const bool fg = gt_mask.data[i] > 0.5;
    gt_count += fg;
    int hi = static_cast<int>(std::ceil(v)) - 1;
    if (v > 255.0) hi = 255;
    if (hi < 0) continue;
    if (hi > 255) hi = 255;
    ++above[hi];
    if (fg) ++inter[hi];
  }
  std::int64_t run_above = 0, run_inter = 0;
  PeakResult out;
  std::array<double, 256> curve{};
  for (int t = 255; t >= 0; --t) {
    run_above += above[t];
    run_inter += inter[t];
    const std::int64_t uni = run_above + gt_count - run_inter;
    curve[t] = uni > 0 ? static_cast<double>(run_inter) / static_cast<double>(uni) : 1.0;
  }
  out.curve = curve;
  PeakResult peak = peak_of_curve(curve);
  out.peak_t = peak.peak_t;
  out.peak_iou = peak.peak_iou;
  return out;
}

PeakResult peak_of_curve(const std::array<double, 256> &curve) {
  PeakResult out;
  out.curve = curve;
  out.peak_iou = curve[0];
  out.peak_t = 0;
  for (int t = 1; t < 256; ++t) {
    if (curve[t] > out.peak_iou) {
      out.peak_iou = curve[t];
      out.peak_t = t;  // smallest threshold attaining the maximum
    }
  }
  return out;
}

std::array<SizeBucket, 3> size_bucket_analysis(const std::vector<ImageRecord> &records) {
  std::array<SizeBucket, 3> buckets{SizeBucket{0.0, 0.2}, SizeBucket{0.2, 0.8},
                                    SizeBucket{0.8, 1.0}};
  for (const auto &r : records) {
    const double f = r.gt_area_fraction;
    int b = 2;
    if (f < 0.2)
      b = 0;
    else if (f < 0.8)
      b = 1;
    ++buckets[b].total;
    if (r.iou > 0.5) ++buckets[b].correct;
  }
  for (auto &bk : buckets)
    bk.gt_known = bk.total > 0 ? 100.0 * bk.correct / bk.total : 0.0;
  return buckets;
}

IoUStats correct_iou_stats(const std::vector<ImageRecord> &records) {
  IoUStats out;
  for (const auto &r : records)
    if (r.iou > 0.5) out.values.push_back(r.iou);
  out.count = static_cast<int>(out.values.size());
  out.empty = out.values.empty();
  if (out.empty) return out;
  out.median = quantile(out.values, 0.5);
  out.q1 = quantile(out.values, 0.25);
  out.q3 = quantile(out.values, 0.75);
  out.mean = std::accumulate(out.values.begin(), out.values.end(), 0.0) / out.count;
  return out;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["num_images"] = num_images;
  j["gt_known_loc"] = gt_known;
  j["top1_loc"] = top1_loc;
  j["top5_loc"] = top5_loc;
  j["top1_cls"] = top1_cls;
  j["top5_cls"] = top5_cls;
  if (has_mask_metrics) {
    j["peak_t"] = peak_t;
    j["peak_iou"] = peak_iou;
    j["per_image_peak_t"] = per_image_peak_t;
    j["per_image_peak_iou"] = per_image_peak_iou;
    j["iou_threshold_curve"] = iou_threshold_curve;
  }
  j["correct_iou"] = {{"count", correct_iou.count},
                      {"median", correct_iou.median},
                      {"q1", correct_iou.q1},
                      {"q3", correct_iou.q3},
                      {"mean", correct_iou.mean},
                      {"empty", correct_iou.empty}};
  nlohmann::json jb = nlohmann::json::array();
  for (const auto &b : size_buckets) {
    jb.push_back({{"lo", b.lo},
                  {"hi", b.hi},
                  {"total", b.total},
                  {"correct", b.correct},
                  {"gt_known", b.gt_known}});
  }
  j["size_buckets"] = jb;
  return j.dump(2);
}

}  // namespace bas
