#pragma once

#include <array>
#include <string>
#include <vector>

#include "bas/bbox.hpp"
#include "bas/tensor.hpp"

namespace bas {

/// Per-image evaluation record; iou is the best IoU over ground-truth boxes
/// for the GT-known-protocol box. protocol_box mirrors predicted unless a
/// label-free protocol was requested for the per-image output.
struct ImageRecord {
  std::string image_id;
  double iou = 0.0;
  bool top1_hit = false;
  bool top5_hit = false;
  double gt_area_fraction = 0.0;  // matched GT box area / image area
  BBox predicted;
  BBox gt;
  BBox protocol_box;
  double protocol_iou = 0.0;
};

struct LocAccuracy {
  double gt_known = 0.0;  // percent
  double top1 = 0.0;
  double top5 = 0.0;
};

/// Localization is correct iff IoU is strictly greater than 0.5;
/// top-1/top-5 variants additionally require the classification hit.
LocAccuracy loc_accuracies(const std::vector<ImageRecord> &records);

/// Mask IoU of (map*255 > t) against a binary mask for every integer
/// threshold t in [0,255]; the peak and the smallest threshold attaining it.
struct PeakResult {
  int peak_t = 0;
  double peak_iou = 0.0;
  std::array<double, 256> curve{};
};

PeakResult peak_metrics(const Tensor &map01, const Tensor &gt_mask);

/// Peak of a mean curve (dataset-level variant).
PeakResult peak_of_curve(const std::array<double, 256> &curve);

struct SizeBucket {
  double lo = 0.0, hi = 0.0;  // closed on the left
  int total = 0;
  int correct = 0;
  double gt_known = 0.0;  // percent; 0 when empty
};

/// GT-known accuracy over the boxes' area fractions, bucketed into
/// [0,0.2), [0.2,0.8), [0.8,1].
std::array<SizeBucket, 3> size_bucket_analysis(const std::vector<ImageRecord> &records);

/// Distribution of IoU over correctly localized records only.
struct IoUStats {
  bool empty = true;
  int count = 0;
  double median = 0.0, q1 = 0.0, q3 = 0.0, mean = 0.0;
  std::vector<double> values;
};

IoUStats correct_iou_stats(const std::vector<ImageRecord> &records);

/// Aggregated evaluation artifacts for one checkpoint + split.
struct EvalReport {
  double gt_known = 0.0, top1_loc = 0.0, top5_loc = 0.0;  // percent
  double top1_cls = 0.0, top5_cls = 0.0;                  // percent
  int num_images = 0;

  bool has_mask_metrics = false;
  int peak_t = 0;            // peak of the mean IoU-threshold curve
  double peak_iou = 0.0;
  double per_image_peak_t = 0.0;    // mean of per-image peaks
  double per_image_peak_iou = 0.0;
  std::array<double, 256> iou_threshold_curve{};

  IoUStats correct_iou;
  std::array<SizeBucket, 3> size_buckets{};

  std::string to_json() const;
};

}  // namespace bas
