#pragma once

#include <filesystem>
#include <vector>

#include "bas/model.hpp"
#include "bas/tensor.hpp"

namespace bas {

/// Binary erosion / dilation with a square structuring element of size k
/// (zero padding outside the image; anchor at floor((k-1)/2)).
Tensor erode_mask(const Tensor &mask, int k);
Tensor dilate_mask(const Tensor &mask, int k);

struct MaskFamilyMember {
  int n = 0;           // <0 erosions, >0 dilations, 0 the base
  Tensor mask;         // (1,1,fh,fw) at feature resolution
  double area_fraction = 0.0;
};

/// Masks nested by morphology: member n uses a 5|n| x 5|n| element.
/// Members that erode away (or vanish after downsampling) are dropped and
/// listed in dropped_n.
struct MaskFamily {
  Tensor base;  // (1,1,fh,fw)
  std::vector<MaskFamilyMember> members;  // ordered by n ascending
  std::vector<int> dropped_n;
};

MaskFamily build_mask_family(const Tensor &gt_mask, int n_min, int n_max, int feat_h, int feat_w);

struct ProbePoint {
  int n = 0;
  double area_fraction = 0.0;
  double entropy = 0.0;        // cross-entropy of the masked forward pass
  double fg_activation = 0.0;  // target-category score with the mask applied
  double bg_activation = 0.0;  // target-category score with the inverse mask
};

/// Run the head on feature maps gated by each family member (or on the
/// masked image itself when image_level is set) and record the response
/// curves. The sample must carry a ground-truth mask-derived family.
std::vector<ProbePoint> probe_model(BASModel &model, const Tensor &image, int gt_category,
                                    const MaskFamily &family, bool image_level = false);

/// CSV with columns (n, area_fraction, entropy, fg_activation,
/// bg_activation) plus a curve PNG; the base-mask area is marked with a
/// dashed vertical line.
void emit_probe_curves(const std::vector<ProbePoint> &points, double base_area_fraction,
                       const std::filesystem::path &csv_path,
                       const std::filesystem::path &png_path);

}  // namespace bas
